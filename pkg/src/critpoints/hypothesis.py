"""Hypothesis-class oracles over labeled point sets.

Linear classifiers pass through the origin and are judged on normalized
points. Callers that want an affine classifier append a constant coordinate
before building a ``LabeledSet``; nothing here lifts silently.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import lsq_linear

from .geometry import DomainError, normalize_rows

MARGIN_TOL = 1e-7
ERM_MAX_SLACK = 3
ERM_MAX_POINTS = 64

# NNLS residual below this means the origin lies in the hull of y_i * x_i
_INFEASIBLE_RESIDUAL = 1e-12
# multipliers below this (relative) are treated as inactive
_SUPPORT_FLOOR = 1e-12


@dataclass
class LabeledSet:
    points: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim == 1:
            self.points = self.points.reshape(0 if self.points.size == 0 else 1, -1)
        self.labels = np.asarray(self.labels, dtype=int).reshape(-1)
        if len(self.points) != len(self.labels):
            raise DomainError(f"{len(self.points)} points but {len(self.labels)} labels")
        if not np.all(np.isin(self.labels, (-1, 1))):
            raise DomainError("labels must be +1 or -1")
        if len(self.points):
            normalize_rows(self.points)

    def __len__(self) -> int:
        return len(self.labels)

    def signed(self) -> np.ndarray:
        """Rows y_i * x_i / |x_i|."""
        return normalize_rows(self.points) * self.labels[:, None]


@dataclass
class OracleVerdict:
    realizable: bool
    witness: np.ndarray | int | None = None
    achieved_margin: float | None = None
    error_count: int | None = None
    # indices of the input treated as errors (ERM only)
    exempt: tuple[int, ...] = ()


@dataclass
class MaxMarginResult:
    separable: bool
    w: np.ndarray | None
    margin: float
    # indices whose convex combination certifies the margin
    support: tuple[int, ...] = field(default=())


@dataclass(frozen=True)
class LinearMarginClass:
    """Homogeneous linear classifiers with margin at least ``gamma``."""

    gamma: float
    max_slack: int = ERM_MAX_SLACK
    max_points: int = ERM_MAX_POINTS

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise DomainError(f"gamma must lie in [0, 1], got {self.gamma!r}")


@dataclass
class FiniteClass:
    """Explicit hypothesis class: one +-1 label row per hypothesis over ``universe``."""

    universe: np.ndarray
    hypotheses: np.ndarray

    def __post_init__(self):
        self.universe = np.atleast_2d(np.asarray(self.universe, dtype=float))
        self.hypotheses = np.asarray(self.hypotheses, dtype=int)
        if self.hypotheses.size == 0:
            self.hypotheses = self.hypotheses.reshape(0, len(self.universe))
        if self.hypotheses.ndim != 2 or self.hypotheses.shape[1] != len(self.universe):
            raise DomainError("each hypothesis needs exactly one label per universe point")
        if not np.all(np.isin(self.hypotheses, (-1, 1))):
            raise DomainError("hypothesis labels must be +1 or -1")
        self._index = {tuple(p): i for i, p in reversed(list(enumerate(self.universe.tolist())))}

    def __len__(self) -> int:
        return len(self.hypotheses)

    def locate(self, points) -> np.ndarray:
        idx = []
        for p in np.atleast_2d(np.asarray(points, dtype=float)).tolist():
            try:
                idx.append(self._index[tuple(p)])
            except KeyError:
                raise DomainError(f"point {p} is not in the class universe") from None
        return np.array(idx, dtype=int)

    @classmethod
    def from_positive_sets(cls, universe, positive_sets) -> "FiniteClass":
        n = len(universe)
        rows = []
        for s in positive_sets:
            row = -np.ones(n, dtype=int)
            row[list(s)] = 1
            rows.append(row)
        return cls(universe, np.array(rows, dtype=int).reshape(len(rows), n))


def _min_norm_direction(z: np.ndarray):
    """Solve min |u| s.t. z u >= 1 (Lawson-Hanson least-distance program).

    Returns (u, support) or (None, support) when infeasible; in the latter
    case the support indexes a convex combination of rows equal to zero.
    The inner nonnegative least squares runs through BVLS: scipy's ``nnls``
    stops short of the KKT point on some inputs.
    """
    m, d = z.shape
    e = np.vstack([z.T, np.ones((1, m))])
    f = np.zeros(d + 1)
    f[-1] = 1.0
    lam = lsq_linear(e, f, bounds=(0.0, np.inf), method="bvls", tol=1e-13).x
    r = e @ lam - f
    support = tuple(int(i) for i in np.flatnonzero(lam > _SUPPORT_FLOOR * max(lam.max(), 1.0)))
    if np.linalg.norm(r) <= _INFEASIBLE_RESIDUAL or r[-1] >= 0.0:
        return None, support
    return -r[:d] / r[-1], support


def _best_candidate(z: np.ndarray) -> tuple[np.ndarray, float]:
    """Best unit direction among the rows, their pairwise bisectors and
    perpendiculars of antipodal pairs. Exact for the inseparable case in
    d <= 2, a lower estimate beyond."""
    m, d = z.shape
    iu, ju = np.triu_indices(m, k=1)
    sums = z[iu] + z[ju]
    ns = np.linalg.norm(sums, axis=1)
    wide = ns > 1e-12
    cands = [z, sums[wide] / ns[wide, None]]
    if d >= 2 and not np.all(wide):
        # antipodal pairs: any direction orthogonal to both
        a = z[iu[~wide]]
        basis = np.eye(d)[np.argmin(np.abs(a), axis=1)]
        perp = basis - np.sum(basis * a, axis=1)[:, None] * a
        cands.append(perp / np.linalg.norm(perp, axis=1)[:, None])
    allc = np.vstack(cands)
    allc = np.vstack([allc, -allc])
    vals = np.min(allc @ z.T, axis=1)
    best = int(np.argmax(vals))
    return allc[best], float(vals[best])


def max_margin(labeled: LabeledSet) -> MaxMarginResult:
    """Maximum over unit w of min_i y_i <w, x_i> / |x_i|.

    Separable sets are solved as a hard-margin SVM through the origin; the
    margin is re-measured on the normalized points from the returned unit
    vector. For inseparable sets the reported margin is nonpositive.
    """
    if len(labeled) == 0:
        raise DomainError("max_margin of an empty set")
    z = labeled.signed()
    u, support = _min_norm_direction(z)
    if u is not None:
        w = u / np.linalg.norm(u)
        margin = float(np.min(z @ w))
        if margin > 0.0:
            return MaxMarginResult(True, w, margin, support)
    w, margin = _best_candidate(z)
    return MaxMarginResult(False, w, min(margin, 0.0), support)


def _one_sided_witness(labeled: LabeledSet) -> np.ndarray:
    z = labeled.signed()
    mean = z.mean(axis=0)
    n = np.linalg.norm(mean)
    return mean / n if n > 1e-12 else z[0]


def membership_linear_margin(labeled: LabeledSet, gamma: float) -> OracleVerdict:
    """Is the labeling realizable by a homogeneous classifier with margin
    at least ``gamma`` on the supplied points?

    One-sided (or empty) labelings count as realizable at every gamma; the
    witness is then the max-margin direction when one exists and the
    normalized signed mean otherwise.
    """
    if not 0.0 <= gamma <= 1.0:
        raise DomainError(f"gamma must lie in [0, 1], got {gamma!r}")
    if len(labeled) == 0:
        return OracleVerdict(True, None, 1.0)
    res = max_margin(labeled)
    if np.all(labeled.labels == labeled.labels[0]):
        w = res.w if res.separable else _one_sided_witness(labeled)
        return OracleVerdict(True, w, float(np.min(labeled.signed() @ w)))
    ok = res.separable and res.margin >= gamma - MARGIN_TOL
    return OracleVerdict(ok, res.w if ok else None, res.margin)


def membership_finite(cls: FiniteClass, labeled: LabeledSet) -> OracleVerdict:
    """Lowest-index hypothesis agreeing with every supplied label."""
    if len(labeled) == 0:
        return OracleVerdict(len(cls) > 0, 0 if len(cls) else None)
    idx = cls.locate(labeled.points)
    agree = np.all(cls.hypotheses[:, idx] == labeled.labels[None, :], axis=1)
    hits = np.flatnonzero(agree)
    if hits.size == 0:
        return OracleVerdict(False)
    return OracleVerdict(True, int(hits[0]), error_count=0)


def _linear_min_error(labeled: LabeledSet, gamma: float, budget: int, anchor: int | None):
    """Smallest exemption set E (|E| <= budget, anchor never exempt) such
    that the remaining labeling is realizable with margin gamma.

    A valid E either empties one side (one-sided sets are realizable) or
    hits the support of the current set's infeasibility certificate, so
    branching over that support is exhaustive.
    """
    labels = labeled.labels

    def verdict_for(keep):
        return membership_linear_margin(LabeledSet(labeled.points[keep], labels[keep]), gamma)

    def search(keep: list[int], left: int):
        if verdict_for(keep).realizable:
            return ()
        if left == 0:
            return None
        for side in (-1, 1):
            if anchor is not None and side == labels[anchor]:
                continue
            drop = [i for i in keep if labels[i] == side]
            if len(drop) <= left:
                return tuple(drop)
        support = max_margin(LabeledSet(labeled.points[keep], labels[keep])).support
        cert = [keep[s] for s in support if keep[s] != anchor] or [i for i in keep if i != anchor]
        for e in cert:
            found = search([i for i in keep if i != e], left - 1)
            if found is not None:
                return found + (e,)
        return None

    keep = list(range(len(labeled)))
    for b in range(budget + 1):
        exempt = search(keep, b)
        if exempt is not None:
            exempt = tuple(sorted(exempt))
            rest = [i for i in keep if i not in exempt]
            return verdict_for(rest).witness, exempt
    return None


def erm_with_slack(
    labeled: LabeledSet,
    anchor: int | None,
    slack: int,
    cls: LinearMarginClass | FiniteClass,
) -> OracleVerdict:
    """Find a class member labeling ``anchor`` positive with total error at
    most ``slack`` on the other labels, minimizing that error.

    For the linear class the anchor must also clear the margin, and an
    error is any point with y <w, x> / |x| below gamma. With ``anchor=None``
    no point is forced and the call is plain minimum-total-error search.
    """
    if slack < 0:
        raise DomainError("slack must be nonnegative")
    if anchor is not None:
        if not 0 <= anchor < len(labeled):
            raise DomainError(f"anchor {anchor} outside the labeled set")
        labels = labeled.labels.copy()
        labels[anchor] = 1
        labeled = LabeledSet(labeled.points, labels)
    if isinstance(cls, FiniteClass):
        return _erm_finite(cls, labeled, anchor, slack)
    if slack > cls.max_slack or len(labeled) > cls.max_points:
        raise DomainError(
            f"exhaustive ERM is capped at slack <= {cls.max_slack} and "
            f"{cls.max_points} points (got slack={slack}, n={len(labeled)})"
        )
    if len(labeled) == 0:
        return OracleVerdict(True, None, 1.0, 0)
    found = _linear_min_error(labeled, cls.gamma, slack, anchor)
    if found is None:
        return OracleVerdict(False)
    w, exempt = found
    return OracleVerdict(True, w, float(np.min(labeled.signed() @ w)), len(exempt), exempt)


def _erm_finite(cls: FiniteClass, labeled: LabeledSet, anchor, slack) -> OracleVerdict:
    if len(cls) == 0:
        return OracleVerdict(False)
    if len(labeled) == 0:
        return OracleVerdict(True, 0, error_count=0)
    idx = cls.locate(labeled.points)
    h = cls.hypotheses[:, idx]
    wrong = h != labeled.labels[None, :]
    allowed = np.ones(len(cls), dtype=bool)
    if anchor is not None:
        allowed = h[:, anchor] == 1
        wrong[:, anchor] = False
    errors = wrong.sum(axis=1)
    errors = np.where(allowed, errors, np.iinfo(np.int64).max)
    best = int(np.argmin(errors))
    if not allowed[best] or errors[best] > slack:
        return OracleVerdict(False)
    exempt = tuple(int(i) for i in np.flatnonzero(wrong[best]))
    return OracleVerdict(True, best, error_count=int(errors[best]), exempt=exempt)


class Oracle:
    """Index-level oracle bound to a fixed point universe.

    ``realizable`` answers membership for positives/negatives given as
    universe indices; ``erm`` forwards to :func:`erm_with_slack`.
    """

    def __init__(self, points, cls: LinearMarginClass | FiniteClass):
        self.points = np.atleast_2d(np.asarray(points, dtype=float))
        self.cls = cls
        self.calls = 0
        if isinstance(cls, FiniteClass):
            self._map = cls.locate(self.points) if len(self.points) else np.zeros(0, int)

    def _labeled(self, positive, negative):
        idx = list(positive) + list(negative)
        labels = [1] * len(positive) + [-1] * len(negative)
        pts = self.points[idx] if idx else np.zeros((0, self.points.shape[1]))
        return LabeledSet(pts, labels), idx

    def realizable(self, positive, negative) -> OracleVerdict:
        self.calls += 1
        labeled, _ = self._labeled(positive, negative)
        if isinstance(self.cls, FiniteClass):
            return membership_finite(self.cls, labeled)
        return membership_linear_margin(labeled, self.cls.gamma)

    def erm(self, positive, negative, anchor: int | None, slack: int) -> OracleVerdict:
        """Anchor is a universe index (must be among ``positive``) or None."""
        self.calls += 1
        labeled, idx = self._labeled(positive, negative)
        local = idx.index(anchor) if anchor is not None else None
        verdict = erm_with_slack(labeled, local, slack, self.cls)
        if verdict.exempt:
            verdict.exempt = tuple(sorted(idx[i] for i in verdict.exempt))
        return verdict

    def labels_of(self, witness) -> np.ndarray:
        """Labels a verdict's witness assigns to the whole universe."""
        if isinstance(self.cls, FiniteClass):
            return self.cls.hypotheses[witness][self._map]
        proj = normalize_rows(self.points) @ witness
        return np.where(proj > 0.0, 1, -1)
