"""Instance generators shared by the CLI, sweeps and tests."""
from __future__ import annotations

import numpy as np

from .geometry import DomainError, construct_margin_third, construct_small_margin
from .protocol import Instance


def random_separable(gamma: float, d: int, n: int, seed=None, flips: int = 0) -> Instance:
    """``n`` points in R^d that a hidden unit vector separates with margin
    at least ``gamma`` on normalized points; norms vary in [0.5, 2].

    ``flips`` labels are then inverted at random, so the hidden separator
    has total error at most ``flips``.
    """
    if not 0.0 <= gamma <= 1.0:
        raise DomainError(f"gamma must lie in [0, 1], got {gamma!r}")
    if d < 1 or n < 0:
        raise DomainError("need d >= 1 and n >= 0")
    rng = np.random.default_rng(seed)
    w = rng.normal(size=d)
    w /= np.linalg.norm(w)
    signs = rng.choice((-1, 1), size=n)
    along = rng.uniform(gamma, 1.0, size=n)
    if d == 1:
        along[:] = 1.0
    across = rng.normal(size=(n, d))
    across -= np.outer(across @ w, w)
    norms = np.linalg.norm(across, axis=1)
    norms[norms == 0.0] = 1.0
    across /= norms[:, None]
    unit = signs[:, None] * along[:, None] * w + np.sqrt(1.0 - along**2)[:, None] * across
    points = unit * rng.uniform(0.5, 2.0, size=n)[:, None]
    labels = signs.copy()
    if flips:
        labels[rng.choice(n, size=min(flips, n), replace=False)] *= -1
    return Instance.from_arrays(points.reshape(n, d), labels)


def margin_third_instance(n: int) -> Instance:
    """The 1/3-margin construction with all-negative truth."""
    x, _ = construct_margin_third(n)
    return Instance.from_arrays(x, -np.ones(n, dtype=int))


def small_margin_instance(gamma: float, d: int, k: int, seed=None) -> Instance:
    x, _ = construct_small_margin(gamma, d, seed=seed, target_k=k)
    return Instance.from_arrays(x, -np.ones(len(x), dtype=int))
