"""Critical-point scans: realizable, robust (slack L), and with verified negatives.

Each scan walks Alice's negatives in a fixed order, flips the visited point
to positive and asks the oracle whether the flipped labeling of
``X_A+ + {x}`` versus the surviving negatives is still attainable. Points
for which it is not are dropped for the rest of the scan.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

from .hypothesis import Oracle, OracleVerdict


class RequestError(ValueError):
    pass


@dataclass
class CriticalRequest:
    n: int
    alice_positive: frozenset[int]
    oracle: Oracle
    verified_negative: frozenset[int] = frozenset()
    slack: int = 0
    scan_order: tuple[int, ...] | None = None

    def __post_init__(self):
        self.alice_positive = frozenset(self.alice_positive)
        self.verified_negative = frozenset(self.verified_negative)
        universe = set(range(self.n))
        if not self.alice_positive <= universe or not self.verified_negative <= universe:
            raise RequestError("index outside the instance")
        if self.alice_positive & self.verified_negative:
            raise RequestError("a verified negative cannot be reported positive")
        if self.slack < 0:
            raise RequestError("slack must be nonnegative")
        negatives = self.alice_negative
        if self.scan_order is None:
            self.scan_order = tuple(sorted(negatives))
        else:
            self.scan_order = tuple(int(i) for i in self.scan_order)
            if sorted(self.scan_order) != sorted(negatives):
                raise RequestError("scan_order must be a permutation of Alice's negatives")

    @property
    def alice_negative(self) -> frozenset[int]:
        return frozenset(range(self.n)) - self.alice_positive


@dataclass
class ScanStep:
    step: int
    index: int
    removed: bool
    verdict: OracleVerdict


@dataclass
class CriticalResult:
    critical: tuple[int, ...]
    removal_log: list[ScanStep] = field(default_factory=list)
    # members of ``critical`` that were verified negatives and never scanned
    verified: tuple[int, ...] = ()

    @property
    def removed(self) -> tuple[int, ...]:
        return tuple(s.index for s in self.removal_log if s.removed)

    @property
    def oracle_calls(self) -> int:
        return len(self.removal_log)

    def trace_csv(self, ids=None) -> str:
        """Audit trace: one row per scan step."""
        buf = io.StringIO()
        out = csv.writer(buf, lineterminator="\n")
        out.writerow(["step", "point", "verdict", "margin"])
        for s in self.removal_log:
            point = ids[s.index] if ids is not None else s.index
            margin = "" if s.verdict.achieved_margin is None else repr(s.verdict.achieved_margin)
            out.writerow([s.step, point, "removed" if s.removed else "kept", margin])
        return buf.getvalue()


def _scan(req: CriticalRequest, robust: bool) -> CriticalResult:
    positives = sorted(req.alice_positive)
    keep = set(req.alice_negative)
    memo: dict[tuple[frozenset, frozenset], OracleVerdict] = {}
    log: list[ScanStep] = []
    for x in req.scan_order:
        if x in req.verified_negative:
            continue
        t1 = frozenset(positives) | {x}
        t2 = frozenset(keep - {x})
        key = (t1, t2)
        verdict = memo.get(key)
        if verdict is None:
            if robust:
                verdict = req.oracle.erm(sorted(t1), sorted(t2), x, req.slack)
            else:
                verdict = req.oracle.realizable(sorted(t1), sorted(t2))
            memo[key] = verdict
        removed = not verdict.realizable
        if removed:
            keep.discard(x)
        log.append(ScanStep(len(log), x, removed, verdict))
    critical = tuple(sorted(keep))
    verified = tuple(i for i in critical if i in req.verified_negative)
    return CriticalResult(critical, log, verified)


def critical_points(req: CriticalRequest) -> CriticalResult:
    """Critical points of Alice's report for a realizable class."""
    if req.slack != 0 or req.verified_negative:
        raise RequestError("critical_points takes slack=0 and no verified negatives")
    return _scan(req, robust=False)


def robust_critical_points(req: CriticalRequest) -> CriticalResult:
    """Robust critical points: a visited point survives if some class member
    labels it positive with total error at most ``req.slack`` on the flipped
    instance. Verified negatives, if any, are skipped like in
    :func:`critical_points_verified`."""
    return _scan(req, robust=True)


def critical_points_verified(req: CriticalRequest) -> CriticalResult:
    """Realizable scan that never visits (or drops) verified negatives; they
    stay in every negative side and in the returned set, flagged in
    ``CriticalResult.verified``."""
    if req.slack != 0:
        raise RequestError("critical_points_verified takes slack=0")
    return _scan(req, robust=False)
