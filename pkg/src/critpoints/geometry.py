"""Vector and margin arithmetic, closed-form disclosure bounds, and the
explicit skew-obtuse constructions used for the margin trichotomy.

All constructions are deterministic given their seed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TOL = 1e-9

# lifting weight of the lower-bound constructions
LIFT = 1.0 / math.sqrt(3.0)


class DomainError(ValueError):
    """Raised when an argument lies outside an operation's domain."""


class ConstructionFailed(RuntimeError):
    """Raised when a randomized construction exhausts its retry budget."""

    def __init__(self, message: str, partial: np.ndarray | None = None):
        super().__init__(message)
        self.partial = partial


@dataclass
class VectorFamily:
    """Paired unit-vector families: point directions ``v`` and witnesses ``w``."""

    v: np.ndarray
    w: np.ndarray
    gamma: float = 0.0
    slack: int = 0

    def __post_init__(self):
        self.v = np.atleast_2d(np.asarray(self.v, dtype=float))
        self.w = np.atleast_2d(np.asarray(self.w, dtype=float))
        if self.v.shape != self.w.shape:
            raise DomainError(f"v has shape {self.v.shape} but w has {self.w.shape}")
        if not np.all(np.isfinite(self.v)) or not np.all(np.isfinite(self.w)):
            raise DomainError("non-finite coordinate in vector family")
        for name, arr in (("v", self.v), ("w", self.w)):
            norms = np.linalg.norm(arr, axis=1)
            bad = np.flatnonzero(np.abs(norms - 1.0) > TOL)
            if bad.size:
                raise DomainError(f"{name}[{bad[0]}] has norm {norms[bad[0]]!r}, expected 1")
        if self.slack < 0:
            raise DomainError("slack must be nonnegative")

    @property
    def k(self) -> int:
        return self.v.shape[0]

    @property
    def d(self) -> int:
        return self.v.shape[1]

    def gram(self) -> np.ndarray:
        """Matrix of inner products; entry (i, j) is <v_i, w_j>."""
        return self.v @ self.w.T


@dataclass
class SkewObtuseReport:
    holds: bool
    diagonal_violations: list[int] = field(default_factory=list)
    # (i, j): <v_i, w_j> > -beta for a column j that ran out of slack
    violating_pairs: list[tuple[int, int]] = field(default_factory=list)
    obtuse_counts: list[int] = field(default_factory=list)
    required: int = 0


def normalize(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    n = np.linalg.norm(x)
    if n == 0.0:
        raise DomainError("cannot normalize a zero vector")
    return x / n


def normalize_rows(points) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    norms = np.linalg.norm(pts, axis=1)
    if pts.size and np.any(norms == 0.0):
        raise DomainError(f"zero-norm point at index {int(np.flatnonzero(norms == 0.0)[0])}")
    return pts / norms[:, None]


def loo_bound(gamma: float) -> float:
    """Upper bound (2 + 2g) / (3g - 1) on the Leave-One-Out dimension of
    linear classifiers with margin ``g > 1/3``."""
    if not gamma > 1.0 / 3.0:
        raise DomainError(f"gamma must exceed 1/3, got {gamma!r}")
    return (2.0 + 2.0 * gamma) / (3.0 * gamma - 1.0)


def robust_loo_bound(alpha: float, beta: float, slack: int) -> float:
    """Size bound (2 + 2L)(1 + beta) / (alpha + 2 beta - 1) for robust
    skew-obtuse families with slack ``L``."""
    if slack < 0:
        raise DomainError("slack must be nonnegative")
    denom = alpha + 2.0 * beta - 1.0
    if not denom > 0.0:
        raise DomainError(f"alpha + 2*beta must exceed 1, got {alpha + 2.0 * beta!r}")
    return (2.0 + 2.0 * slack) * (1.0 + beta) / denom


def verify_skew_obtuse(family: VectorFamily, alpha: float, beta: float) -> SkewObtuseReport:
    """Check the (robust) skew-obtuse conditions on ``family``.

    Diagonal entries must be at least ``alpha`` and every column ``j`` needs
    at least ``k - 1 - family.slack`` off-diagonal rows with
    ``<v_i, w_j> <= -beta``. Comparisons carry a 1e-9 absolute tolerance.
    """
    g = family.gram()
    k = family.k
    diag_bad = [i for i in range(k) if g[i, i] < alpha - TOL]
    required = max(k - 1 - family.slack, 0)
    pairs: list[tuple[int, int]] = []
    counts: list[int] = []
    for j in range(k):
        col = g[:, j]
        off = [i for i in range(k) if i != j]
        obtuse = [i for i in off if col[i] <= -beta + TOL]
        counts.append(len(obtuse))
        if len(obtuse) < required:
            pairs.extend((i, j) for i in off if col[i] > -beta + TOL)
    holds = not diag_bad and all(c >= required for c in counts)
    return SkewObtuseReport(holds, diag_bad, pairs, counts, required)


def construct_margin_third(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Points x_i = e_1/sqrt(3) + sqrt(2/3) e_{i+1} in R^{n+1} and witnesses
    with the first coordinate negated.

    Every witness has inner product 1/3 with its own point and -1/3 with
    every other point.
    """
    if n < 1:
        raise DomainError("n must be at least 1")
    body = math.sqrt(1.0 - LIFT * LIFT)
    x = np.zeros((n, n + 1))
    x[:, 0] = LIFT
    x[np.arange(n), np.arange(n) + 1] = body
    w = x.copy()
    w[:, 0] = -LIFT
    return x, w


def _lift(v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    body = math.sqrt(1.0 - LIFT * LIFT)
    k = v.shape[0]
    x = np.hstack([np.full((k, 1), LIFT), body * v])
    w = np.hstack([np.full((k, 1), -LIFT), body * v])
    return x, w


def nearly_orthogonal(
    d: int,
    epsilon: float,
    count: int,
    seed=None,
    retry_budget: int | None = None,
) -> np.ndarray:
    """Greedy rejection sampler for ``count`` unit vectors in R^d whose
    pairwise inner products are at most ``epsilon`` in absolute value.

    Candidates are uniform sign vectors in {+-1/sqrt(d)}^d; a candidate
    that violates the bound against any accepted vector is discarded.
    ``retry_budget`` (default ``200 * count``) caps the number of discards.
    """
    if d < 1 or count < 1:
        raise DomainError("d and count must be at least 1")
    if not 0.0 < epsilon < 1.0:
        raise DomainError(f"epsilon must lie in (0, 1), got {epsilon!r}")
    if retry_budget is None:
        retry_budget = 200 * count
    rng = np.random.default_rng(seed)
    scale = 1.0 / math.sqrt(d)
    # integer sign vectors keep inner products exact: <a, b> = (s_a . s_b) / d
    limit = epsilon * d
    accepted = np.empty((count, d), dtype=np.int64)
    n_acc = 0
    rejected = 0
    while n_acc < count:
        cand = rng.integers(0, 2, size=d, dtype=np.int64) * 2 - 1
        if n_acc and np.max(np.abs(accepted[:n_acc] @ cand)) > limit + TOL:
            rejected += 1
            if rejected > retry_budget:
                raise ConstructionFailed(
                    f"accepted {n_acc} of {count} vectors before exhausting "
                    f"retry budget {retry_budget}",
                    partial=accepted[:n_acc] * scale,
                )
            continue
        accepted[n_acc] = cand
        n_acc += 1
    return accepted * scale


def construct_small_margin(
    gamma: float,
    d: int,
    seed=None,
    target_k: int = 20,
    retry_budget: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Skew-obtuse family for margin ``gamma < 1/3`` in R^{d+1}.

    Lifts nearly-orthogonal directions v_i (pairwise |<v_i, v_j>| at most
    1.5 * (1/3 - gamma)) to x_i = e_1/sqrt(3) + sqrt(2/3) v_i with witness
    w_i = -e_1/sqrt(3) + sqrt(2/3) v_i. Raises ``ConstructionFailed`` when
    the sampler cannot reach ``target_k`` vectors.
    """
    if not 0.0 <= gamma < 1.0 / 3.0:
        raise DomainError(f"gamma must lie in [0, 1/3), got {gamma!r}; use construct_margin_third at 1/3")
    if d < 2:
        raise DomainError("d must be at least 2")
    if target_k < 1:
        raise DomainError("target_k must be at least 1")
    eps = 1.5 * (1.0 / 3.0 - gamma)
    v = nearly_orthogonal(d, min(eps, 1.0 - 1e-12), target_k, seed=seed, retry_budget=retry_budget)
    return _lift(v)


def margin_of(w, points, labels=None) -> float:
    """Margin of the unit classifier ``w`` on ``points``.

    Without labels this is min |<w, x>| / |x|; with labels the signed
    min y <w, x> / |x| is returned instead.
    """
    w = np.asarray(w, dtype=float)
    if abs(np.linalg.norm(w) - 1.0) > TOL:
        raise DomainError("w must be a unit vector")
    xb = normalize_rows(points)
    if xb.shape[0] == 0:
        raise DomainError("margin of an empty point set is undefined")
    proj = xb @ w
    if labels is None:
        return float(np.min(np.abs(proj)))
    return float(np.min(np.asarray(labels, dtype=float) * proj))


def write_family(family: VectorFamily, path) -> None:
    """Write ``family`` as text: header ``k d gamma slack``, then the k
    point directions, then the k witnesses, one vector per line."""
    with open(path, "w") as fh:
        fh.write(format_family(family))


def format_family(family: VectorFamily) -> str:
    lines = [f"{family.k} {family.d} {family.gamma!r} {family.slack}"]
    for row in np.vstack([family.v, family.w]):
        lines.append(" ".join(repr(float(c)) for c in row))
    return "\n".join(lines) + "\n"


def read_family(path) -> VectorFamily:
    with open(path) as fh:
        return parse_family(fh.read())


def parse_family(text: str) -> VectorFamily:
    rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not rows:
        raise DomainError("empty family record")
    k, d = int(rows[0][0]), int(rows[0][1])
    gamma, slack = float(rows[0][2]), int(rows[0][3])
    body = rows[1:]
    if len(body) != 2 * k:
        raise DomainError(f"expected {2 * k} vector lines, found {len(body)}")
    arr = np.array([[float(c) for c in r] for r in body], dtype=float).reshape(2 * k, d)
    return VectorFamily(arr[:k], arr[k:], gamma=gamma, slack=slack)
