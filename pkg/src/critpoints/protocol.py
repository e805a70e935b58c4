"""Multi-party verification runs: Alice reports labels, Trent computes
critical points, Bob reviews what is sent to him and the court settles
disputes.

Runs are single-threaded and deterministic given the instance, the
strategies and the scan order.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .critical import (
    CriticalRequest,
    CriticalResult,
    critical_points,
    critical_points_verified,
    robust_critical_points,
)
from .dimension import MarginClassSystem, SetSystem, loo_dimension
from .geometry import DomainError
from .hypothesis import FiniteClass, LinearMarginClass, Oracle


class ProtocolAborted(RuntimeError):
    def __init__(self, message: str, transcript: "Transcript | None" = None):
        super().__init__(message)
        self.transcript = transcript


@dataclass(frozen=True)
class Document:
    id: str
    point: tuple[float, ...]
    label: int


@dataclass
class Instance:
    documents: list[Document]

    def __post_init__(self):
        ids = [doc.id for doc in self.documents]
        if len(set(ids)) != len(ids):
            raise DomainError("document ids must be unique")
        for doc in self.documents:
            if doc.label not in (-1, 1):
                raise DomainError(f"document {doc.id} has label {doc.label}")
        self._pos = {doc.id: i for i, doc in enumerate(self.documents)}

    @classmethod
    def from_arrays(cls, points, labels, ids: Sequence | None = None) -> "Instance":
        points = np.atleast_2d(np.asarray(points, dtype=float))
        labels = np.asarray(labels, dtype=int).reshape(-1)
        if len(labels) == 0:
            return cls([])
        if ids is None:
            ids = [f"d{i}" for i in range(len(labels))]
        return cls([Document(str(i), tuple(p), int(y)) for i, p, y in zip(ids, points.tolist(), labels)])

    def __len__(self) -> int:
        return len(self.documents)

    @property
    def ids(self) -> list[str]:
        return [doc.id for doc in self.documents]

    @property
    def points(self) -> np.ndarray:
        return np.array([doc.point for doc in self.documents], dtype=float)

    @property
    def labels(self) -> np.ndarray:
        return np.array([doc.label for doc in self.documents], dtype=int)

    @property
    def n_plus(self) -> int:
        return sum(doc.label == 1 for doc in self.documents)

    def index(self, doc_id) -> int:
        try:
            return self._pos[str(doc_id)]
        except KeyError:
            raise DomainError(f"unknown document id {doc_id!r}") from None

    def subset(self, indices: Sequence[int], labels=None) -> "Instance":
        docs = [self.documents[i] for i in indices]
        if labels is not None:
            docs = [Document(d.id, d.point, int(y)) for d, y in zip(docs, labels)]
        return Instance(docs)


@dataclass(frozen=True)
class AliceStrategy:
    """How Alice reports. ``ids`` are document ids; detected errors are
    always relabeled truthfully."""

    kind: str = "truthful"
    ids: tuple[str, ...] = ()
    count: int = 0
    seed: int | None = None

    KINDS = ("truthful", "hide_positives", "flip_set", "random_errors")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise DomainError(f"unknown Alice strategy {self.kind!r}")

    @classmethod
    def truthful(cls):
        return cls()

    @classmethod
    def hide_positives(cls, ids):
        return cls("hide_positives", tuple(str(i) for i in ids))

    @classmethod
    def flip_set(cls, ids):
        return cls("flip_set", tuple(str(i) for i in ids))

    @classmethod
    def random_errors(cls, count: int, seed: int):
        return cls("random_errors", count=count, seed=seed)

    def report(self, instance: Instance) -> np.ndarray:
        labels = instance.labels.copy()
        targets = [instance.index(i) for i in self.ids]
        if self.kind == "hide_positives":
            labels[targets] = -1
        elif self.kind == "flip_set":
            labels[targets] *= -1
        elif self.kind == "random_errors":
            if not 0 <= self.count <= len(instance):
                raise DomainError(f"cannot place {self.count} errors in {len(instance)} documents")
            rng = np.random.default_rng(self.seed)
            labels[rng.choice(len(instance), size=self.count, replace=False)] *= -1
        return labels


@dataclass(frozen=True)
class BobStrategy:
    """Faithful by default; ``disputes`` lists ids Bob falsely contests."""

    disputes: tuple[str, ...] = ()

    def review(self, instance: Instance, shown: Sequence[int]) -> dict[int, int]:
        truth = instance.labels
        wrong = {instance.index(i) for i in self.disputes}
        return {i: int(-truth[i] if i in wrong else truth[i]) for i in shown}


class Court:
    def __init__(self, instance: Instance):
        self._truth = instance.labels
        self.rulings = 0

    def rule(self, index: int) -> int:
        self.rulings += 1
        return int(self._truth[index])


@dataclass
class Metrics:
    recall: float
    nonresponsive_disclosure: int


@dataclass
class Transcript:
    ids: list[str]
    events: list[dict] = field(default_factory=list)
    disclosed: set[int] = field(default_factory=set)
    adjudicated: set[int] = field(default_factory=set)
    detected_errors: int = 0
    oracle_calls: int = 0
    scan_calls: int = 0
    iterations: int = 0
    full_disclosure: bool = False
    critical: list[CriticalResult] = field(default_factory=list)

    def emit(self, event: str, **fields):
        self.events.append({"round": self.iterations, "event": event, **fields})

    def disclose(self, indices, reason: str):
        new = sorted(set(indices) - self.disclosed)
        self.disclosed.update(indices)
        self.emit("send_to_bob", reason=reason, ids=[self.ids[i] for i in sorted(indices)],
                  new=[self.ids[i] for i in new])

    def event_log(self) -> str:
        return "".join(json.dumps(e) + "\n" for e in self.events)


@dataclass
class Outcome:
    transcript: Transcript
    metrics: Metrics

    @property
    def iterations(self) -> int:
        return self.transcript.iterations


def metrics_of(instance: Instance, disclosed) -> Metrics:
    labels = instance.labels
    disclosed = sorted(disclosed)
    n_plus = int(np.sum(labels == 1))
    found = int(np.sum(labels[disclosed] == 1)) if disclosed else 0
    leaked = len(disclosed) - found
    return Metrics(1.0 if n_plus == 0 else found / n_plus, leaked)


def _ordered(scan_order, negatives) -> tuple[int, ...]:
    if scan_order is None:
        return tuple(sorted(negatives))
    return tuple(i for i in scan_order if i in negatives)


def _review(instance, reported, shown, bob, court, tr: Transcript):
    """Bob labels ``shown``; disputes go to court. Returns the indices where
    the court ruled against Alice and the settled label of every shown
    document."""
    bob_labels = bob.review(instance, shown)
    disputed = sorted(i for i in shown if bob_labels[i] != reported[i])
    tr.emit("bob_labels", disputed=[tr.ids[i] for i in disputed])
    settled = {i: int(reported[i]) for i in shown}
    against = []
    for i in disputed:
        ruling = court.rule(i)
        settled[i] = ruling
        tr.adjudicated.add(i)
        tr.emit("court_ruling", id=tr.ids[i], alice=int(reported[i]), bob=bob_labels[i], ruling=ruling)
        if ruling != reported[i]:
            against.append(i)
    return against, settled


def _one_round(instance, alice, cls, bob, scan_order, slack, robust) -> Outcome:
    n = len(instance)
    tr = Transcript(instance.ids)
    tr.iterations = 1
    if n == 0:
        tr.emit("empty_instance")
        return Outcome(tr, metrics_of(instance, ()))
    reported = alice.report(instance)
    positives = frozenset(np.flatnonzero(reported == 1).tolist())
    negatives = frozenset(range(n)) - positives
    tr.emit("report", positives=[tr.ids[i] for i in sorted(positives)])
    oracle = Oracle(instance.points, cls)
    court = Court(instance)

    if robust:
        ok = oracle.erm(sorted(positives), sorted(negatives), None, slack).realizable
    else:
        ok = oracle.realizable(sorted(positives), sorted(negatives)).realizable
    tr.emit("precheck", realizable=bool(ok))
    if not ok:
        tr.full_disclosure = True
        tr.disclose(range(n), "unrealizable_report")
        tr.oracle_calls = oracle.calls
        return Outcome(tr, metrics_of(instance, tr.disclosed))

    req = CriticalRequest(n, positives, oracle, slack=slack,
                          scan_order=_ordered(scan_order, negatives))
    result = robust_critical_points(req) if robust else critical_points(req)
    tr.critical.append(result)
    tr.scan_calls = result.oracle_calls
    tr.emit("critical_points", ids=[tr.ids[i] for i in result.critical], oracle_calls=result.oracle_calls)
    shown = sorted(positives | set(result.critical))
    tr.disclose(shown, "verification")
    against, _ = _review(instance, reported, shown, bob, court, tr)
    tr.detected_errors = len(against)
    if against:
        tr.full_disclosure = True
        tr.disclose(range(n), "court_ruled_against_alice")
    tr.oracle_calls = oracle.calls
    return Outcome(tr, metrics_of(instance, tr.disclosed))


def run_realizable(instance: Instance, alice: AliceStrategy, cls, bob: BobStrategy = BobStrategy(),
                   scan_order: Sequence[int] | None = None) -> Outcome:
    """One round of the critical-points protocol for a realizable class.

    A report that the class cannot realize triggers full disclosure before
    any critical point is computed; so does any court ruling against Alice.
    ``scan_order`` ranks document indices; only Alice's negatives are used.
    """
    return _one_round(instance, alice, cls, bob, scan_order, 0, robust=False)


def run_robust(instance: Instance, alice: AliceStrategy, cls, slack: int,
               bob: BobStrategy = BobStrategy(), scan_order: Sequence[int] | None = None) -> Outcome:
    """Robust variant: robust critical points with slack ``L``; the pre-check
    asks whether Alice's report is classifiable with total error at most L."""
    return _one_round(instance, alice, cls, bob, scan_order, slack, robust=True)


def run_error_tolerant(instance: Instance, alice: AliceStrategy, cls, inner: str = "realizable",
                       slack: int = 0, bob: BobStrategy = BobStrategy(),
                       scan_order: Sequence[int] | None = None,
                       max_iterations: int | None = None) -> Outcome:
    """Repeat the inner protocol until a round detects no misclassification.

    Detected documents are relabeled truthfully by Alice; there is no full
    disclosure. From the second round on, negatives Bob has already
    verified are passed to the scan as verified and never rescanned.
    """
    if inner not in ("realizable", "robust"):
        raise DomainError(f"unknown inner protocol {inner!r}")
    robust = inner == "robust"
    if not robust and slack:
        raise DomainError("the realizable inner protocol takes slack=0")
    n = len(instance)
    tr = Transcript(instance.ids)
    if n == 0:
        tr.iterations = 1
        tr.emit("empty_instance")
        return Outcome(tr, metrics_of(instance, ()))
    cap = 1 + n if max_iterations is None else max_iterations
    reported = alice.report(instance)
    oracle = Oracle(instance.points, cls)
    court = Court(instance)
    verified: set[int] = set()
    while True:
        if tr.iterations >= cap:
            raise ProtocolAborted(f"no clean round within {cap} iterations", tr)
        tr.iterations += 1
        positives = frozenset(np.flatnonzero(reported == 1).tolist())
        negatives = frozenset(range(n)) - positives
        tr.emit("report", positives=[tr.ids[i] for i in sorted(positives)])
        known = frozenset(verified & negatives) if tr.iterations > 1 else frozenset()
        req = CriticalRequest(n, positives, oracle, verified_negative=known, slack=slack,
                              scan_order=_ordered(scan_order, negatives))
        if robust:
            result = robust_critical_points(req)
        elif known:
            result = critical_points_verified(req)
        else:
            result = critical_points(req)
        tr.critical.append(result)
        tr.scan_calls += result.oracle_calls
        tr.emit("critical_points", ids=[tr.ids[i] for i in result.critical],
                verified=[tr.ids[i] for i in result.verified], oracle_calls=result.oracle_calls)
        shown = sorted(positives | set(result.critical))
        tr.disclose(shown, "verification")
        against, settled = _review(instance, reported, shown, bob, court, tr)
        verified.update(i for i, y in settled.items() if y == -1)
        if not against:
            break
        tr.detected_errors += len(against)
        for i in against:
            reported[i] = settled[i]
        tr.emit("alice_relabels", ids=[tr.ids[i] for i in against])
    tr.oracle_calls = oracle.calls
    return Outcome(tr, metrics_of(instance, tr.disclosed))


@dataclass
class LowerBoundWitness:
    """Documents ``subset`` with all-negative truth, plus one alternative
    truth per member in which only that member is positive."""

    loo_witness: tuple[int, ...]
    subset: tuple[int, ...]
    alternatives: dict[int, np.ndarray]

    def failing_alternatives(self, disclosed) -> list[int]:
        """Alternative truths under which disclosing ``disclosed`` (a subset
        of ``subset``) misses the single responsive document."""
        disclosed = set(disclosed)
        return [c for c in self.subset if c not in disclosed]


def _class_system(points, cls):
    if isinstance(cls, LinearMarginClass):
        return MarginClassSystem(points, cls.gamma)
    idx = cls.locate(points)
    return SetSystem.from_hypotheses(cls.hypotheses[:, idx])


def lower_bound_witness(points, cls: LinearMarginClass | FiniteClass) -> LowerBoundWitness:
    """Take a maximum Leave-One-Out witness C and drop its lowest-index
    member c. On X' = C - {c} the all-negative truth is realizable (the
    classifier isolating c) and so is every truth with one positive; a
    protocol with recall 1 cannot withhold any member of X'."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    _, witness = loo_dimension(_class_system(points, cls))
    witness = tuple(sorted(witness))
    subset = witness[1:]
    alternatives = {}
    for c in subset:
        labels = -np.ones(len(subset), dtype=int)
        labels[subset.index(c)] = 1
        alternatives[c] = labels
    return LowerBoundWitness(witness, subset, alternatives)


def withholding_check(witness: LowerBoundWitness) -> dict[tuple[int, ...], list[int]]:
    """For every disclosure set D within X', the alternative truths under
    which D loses recall 1. Only D = X' may map to an empty list."""
    out = {}
    members = witness.subset
    for r in range(len(members) + 1):
        for d in itertools.combinations(members, r):
            out[d] = witness.failing_alternatives(d)
    return out
