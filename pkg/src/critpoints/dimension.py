"""Exact Leave-One-Out and robust Leave-One-Out dimension at desk scale.

A set C is a witness when every c in C is isolated by some set S:
``S & C == {c}``, or for slack L, ``c in S & C`` and ``|S & C| <= L + 1``.
Witnesses are closed under taking subsets, so the maximum is found by an
include-first depth-first search that only extends by elements keeping the
candidate valid. That visit order makes the first maximum found the
lexicographically least one.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .geometry import DomainError
from .hypothesis import LabeledSet, LinearMarginClass, erm_with_slack

MAX_GROUND = 24
MAX_MARGIN_POINTS = 18


@dataclass
class SetSystem:
    ground: list
    sets: list[frozenset]

    def __post_init__(self):
        self.ground = list(self.ground)
        if len(set(self.ground)) != len(self.ground):
            raise DomainError("duplicate ground element")
        self.sets = [frozenset(s) for s in self.sets]
        universe = set(self.ground)
        for s in self.sets:
            if not s <= universe:
                raise DomainError(f"set {sorted(s, key=str)} is not contained in the ground set")
        pos = {g: i for i, g in enumerate(self.ground)}
        self._masks = sorted({sum(1 << pos[e] for e in s) for s in self.sets})

    def isolates(self, c: int, members: Sequence[int], slack: int = 0) -> bool:
        """Does some set isolate ground position ``c`` inside ``members``?"""
        cmask = 0
        for m in members:
            cmask |= 1 << m
        bit = 1 << c
        for s in self._masks:
            if s & bit and (s & cmask).bit_count() <= slack + 1:
                return True
        return False

    @classmethod
    def from_hypotheses(cls, hypotheses, ground=None) -> "SetSystem":
        """Positive sets {x : h(x) = +1} of each +-1 label row."""
        h = np.asarray(hypotheses, dtype=int)
        ground = list(range(h.shape[1])) if ground is None else list(ground)
        return cls(ground, [frozenset(ground[i] for i in np.flatnonzero(row > 0)) for row in h])


class MarginClassSystem:
    """Lazily evaluated set system of linear classifiers with margin gamma.

    Position c is isolated inside C when some unit w has <c, w> >= gamma
    (normalized) and at most ``slack`` other members of C miss
    <x, w> <= -gamma; answered by the ERM oracle and memoized. Witness
    checks work at any size; exact search is capped at 18 points.
    """

    def __init__(self, points, gamma: float):
        self.points = np.atleast_2d(np.asarray(points, dtype=float))
        self.cls = LinearMarginClass(gamma)
        self.ground = list(range(len(self.points)))
        self._memo: dict[tuple[int, frozenset, int], bool] = {}
        self.queries = 0

    def isolates(self, c: int, members: Sequence[int], slack: int = 0) -> bool:
        key = (c, frozenset(members), slack)
        hit = self._memo.get(key)
        if hit is None:
            others = sorted(key[1] - {c})
            idx = [c] + others
            labeled = LabeledSet(self.points[idx], [1] + [-1] * len(others))
            self.queries += 1
            hit = erm_with_slack(labeled, 0, slack, self.cls).realizable
            self._memo[key] = hit
        return hit


def margin_class_system(points, gamma: float) -> MarginClassSystem:
    return MarginClassSystem(points, gamma)


def is_witness(system, members: Sequence[int], slack: int = 0) -> bool:
    """Positions ``members`` form a (robust) Leave-One-Out witness."""
    members = list(members)
    return all(system.isolates(c, members, slack) for c in members)


def _search(n: int, valid: Callable[[list[int]], bool]) -> list[int]:
    best: list[int] = []

    def grow(current: list[int], cands: list[int]):
        nonlocal best
        for pos, e in enumerate(cands):
            if len(current) + len(cands) - pos <= len(best):
                return
            nxt = current + [e]
            if len(nxt) > len(best):
                best = nxt
            rest = [q for q in cands[pos + 1:] if valid(nxt + [q])]
            if len(nxt) + len(rest) > len(best):
                grow(nxt, rest)

    grow([], [e for e in range(n) if valid([e])])
    return best


def _dimension(system, slack: int, cap: int):
    n = len(system.ground)
    if n > cap:
        raise DomainError(f"exact search is capped at {cap} ground elements, got {n}")
    if slack < 0:
        raise DomainError("slack must be nonnegative")
    best = _search(n, lambda members: is_witness(system, members, slack))
    if not is_witness(system, best, slack):
        raise RuntimeError(f"search returned an invalid witness {best}")
    return len(best), tuple(system.ground[i] for i in best)


def loo_dimension(system) -> tuple[int, tuple]:
    """Leave-One-Out dimension and the lexicographically least maximum witness."""
    cap = MAX_MARGIN_POINTS if isinstance(system, MarginClassSystem) else MAX_GROUND
    return _dimension(system, 0, cap)


def robust_loo_dimension(system, slack: int) -> tuple[int, tuple]:
    """Robust Leave-One-Out dimension with slack ``L``; equals
    :func:`loo_dimension` at ``L = 0``."""
    cap = MAX_MARGIN_POINTS if isinstance(system, MarginClassSystem) else MAX_GROUND
    return _dimension(system, slack, cap)


def brute_force_loo(system, slack: int = 0) -> int:
    """Full subset enumeration, largest first. Exponential; for tests."""
    n = len(system.ground)
    for size in range(n, 0, -1):
        for members in itertools.combinations(range(n), size):
            if is_witness(system, members, slack):
                return size
    return 0


def format_set_system(system: SetSystem) -> str:
    lines = [" ".join(str(g) for g in system.ground)]
    pos = {g: i for i, g in enumerate(system.ground)}
    for s in system.sets:
        lines.append(" ".join(str(g) for g in sorted(s, key=pos.__getitem__)) if s else "-")
    return "\n".join(lines) + "\n"


def parse_set_system(text: str) -> SetSystem:
    """First line lists the ground ids; each further line is one set, ``-``
    for the empty set. ``#`` starts a comment line."""
    rows = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows:
        raise DomainError("empty set-system record")
    ground = rows[0].split()
    sets = [frozenset() if r == "-" else frozenset(r.split()) for r in rows[1:]]
    return SetSystem(ground, sets)


def read_set_system(path) -> SetSystem:
    with open(path) as fh:
        return parse_set_system(fh.read())
