"""Scenario files, single runs with invariant checks, and the margin sweep.

A scenario is flat ``key = value`` text. Every random choice is derived
from the one ``seed`` through ``numpy.random.SeedSequence.spawn``, so the
same file reproduces the same summary byte for byte.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .dimension import MAX_GROUND, MAX_MARGIN_POINTS, loo_dimension, robust_loo_dimension
from .geometry import (
    ConstructionFailed,
    DomainError,
    construct_margin_third,
    construct_small_margin,
    loo_bound,
    robust_loo_bound,
)
from .generators import margin_third_instance, random_separable
from .hypothesis import FiniteClass, LinearMarginClass
from .protocol import (
    AliceStrategy,
    Instance,
    Outcome,
    ProtocolAborted,
    _class_system,
    run_error_tolerant,
    run_realizable,
    run_robust,
)

FORMAT_VERSION = 1
GENERATORS = ("margin_third", "small_margin", "random_separable", "explicit_file")
MODES = ("realizable", "robust", "error_tolerant")

SUMMARY_FIELDS = (
    "scenario", "generator", "mode", "n", "n_plus", "recall", "disclosure",
    "detected_errors", "k_bound", "loo_dimension", "oracle_calls", "scan_calls",
    "iterations", "full_disclosure", "checks",
)

# exact LOO search on top of a run; robust queries are costlier
LOO_LIMIT = {0: MAX_MARGIN_POINTS, 1: 14, 2: 12, 3: 10}
THIRD = 1.0 / 3.0


def parse_number(text: str) -> float:
    """Accepts decimals and fractions such as ``1/3``."""
    return float(Fraction(text.strip())) if "/" in text else float(text)


def is_third(gamma: float) -> bool:
    return math.isclose(gamma, THIRD, abs_tol=1e-12)


@dataclass
class Scenario:
    generator: str
    gamma: float = 0.5
    d: int = 2
    n: int = 0
    k: int = 20
    path: str | None = None
    class_kind: str = "linear_margin"
    class_gamma: float | None = None
    class_path: str | None = None
    strategy: str = "truthful"
    strategy_ids: tuple[str, ...] = ()
    strategy_count: int = 0
    mode: str = "realizable"
    slack: int = 0
    inner: str = "realizable"
    seed: int = 0
    out: str | None = None
    name: str = "scenario"
    base_dir: Path = field(default=Path("."), compare=False)

    def __post_init__(self):
        if self.generator not in GENERATORS:
            raise DomainError(f"unknown generator {self.generator!r}")
        if self.mode not in MODES:
            raise DomainError(f"unknown mode {self.mode!r}")
        if self.class_kind not in ("linear_margin", "finite"):
            raise DomainError(f"unknown class {self.class_kind!r}")
        if self.class_kind == "finite" and not self.class_path:
            raise DomainError("class = finite needs class_path")
        if self.generator == "explicit_file" and not self.path:
            raise DomainError("generator = explicit_file needs path")
        if self.slack < 0:
            raise DomainError("slack must be nonnegative")
        if self.mode == "realizable" and self.slack:
            raise DomainError("mode = realizable takes slack = 0")
        if self.mode == "error_tolerant" and self.inner not in ("realizable", "robust"):
            raise DomainError(f"unknown inner protocol {self.inner!r}")

    @property
    def margin(self) -> float:
        return self.gamma if self.class_gamma is None else self.class_gamma

    @property
    def robust(self) -> bool:
        return self.mode == "robust" or (self.mode == "error_tolerant" and self.inner == "robust")

    def resolve(self, p: str) -> Path:
        q = Path(p)
        return q if q.is_absolute() else self.base_dir / q


_INT_KEYS = {"d", "n", "k", "slack", "seed", "strategy_count", "version"}
_FLOAT_KEYS = {"gamma", "class_gamma"}
_RENAMES = {"class": "class_kind"}


def parse_scenario(text: str, base_dir=".") -> Scenario:
    fields: dict = {}
    version = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise DomainError(f"line {lineno}: expected key = value")
        key, value = key.strip(), value.strip()
        try:
            if key == "version":
                version = int(value)
                continue
            if key in _INT_KEYS:
                fields[key] = int(value)
            elif key in _FLOAT_KEYS:
                fields[key] = parse_number(value)
            elif key == "strategy_ids":
                fields[key] = tuple(v for v in value.replace(",", " ").split())
            else:
                fields[_RENAMES.get(key, key)] = value
        except ValueError:
            raise DomainError(f"line {lineno}: bad value for {key!r}: {value!r}") from None
    if version != FORMAT_VERSION:
        raise DomainError(f"scenario needs version = {FORMAT_VERSION}, got {version}")
    try:
        return Scenario(base_dir=Path(base_dir), **fields)
    except TypeError as exc:
        raise DomainError(f"bad scenario: {exc}") from None


def read_scenario(path) -> Scenario:
    path = Path(path)
    scen = parse_scenario(path.read_text(), base_dir=path.parent)
    if scen.name == "scenario":
        scen.name = path.stem
    return scen


def format_scenario(s: Scenario) -> str:
    lines = [f"version = {FORMAT_VERSION}", f"generator = {s.generator}"]
    pairs = [("gamma", s.gamma), ("d", s.d), ("n", s.n), ("k", s.k), ("path", s.path),
             ("class", s.class_kind), ("class_gamma", s.class_gamma), ("class_path", s.class_path),
             ("strategy", s.strategy), ("strategy_ids", ",".join(s.strategy_ids) or None),
             ("strategy_count", s.strategy_count), ("mode", s.mode), ("slack", s.slack),
             ("inner", s.inner), ("seed", s.seed), ("out", s.out), ("name", s.name)]
    lines += [f"{k} = {v!r}" if isinstance(v, float) else f"{k} = {v}" for k, v in pairs if v is not None]
    return "\n".join(lines) + "\n"


def format_instance(instance: Instance) -> str:
    """Header ``n d``, one coordinate line per document, then a ``labels``
    line. Ids are d0, d1, ... in file order."""
    pts = instance.points
    d = pts.shape[1] if len(instance) else 0
    lines = [f"{len(instance)} {d}"]
    lines += [" ".join(repr(float(c)) for c in row) for row in pts]
    lines.append(" ".join(["labels"] + [str(int(y)) for y in instance.labels]))
    return "\n".join(lines) + "\n"


def parse_instance(text: str) -> Instance:
    rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows:
        raise DomainError("empty instance record")
    n, d = int(rows[0][0]), int(rows[0][1])
    body = rows[1:]
    if len(body) != n + 1 or body[-1][0] != "labels":
        raise DomainError(f"expected {n} point lines and a labels line")
    labels = [int(y) for y in body[-1][1:]]
    if len(labels) != n:
        raise DomainError(f"expected {n} labels, found {len(labels)}")
    if n == 0:
        return Instance([])
    pts = np.array([[float(c) for c in r] for r in body[:-1]], dtype=float)
    if pts.shape != (n, d):
        raise DomainError(f"expected {n} points of dimension {d}")
    return Instance.from_arrays(pts, labels)


def parse_finite_class(text: str) -> FiniteClass:
    """Header ``m d``, m universe points, then one line of m +-1 labels per
    hypothesis."""
    rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows:
        raise DomainError("empty class record")
    m, d = int(rows[0][0]), int(rows[0][1])
    universe = np.array([[float(c) for c in r] for r in rows[1:1 + m]], dtype=float).reshape(m, d)
    hyps = np.array([[int(v) for v in r] for r in rows[1 + m:]], dtype=int).reshape(-1, m)
    return FiniteClass(universe, hyps)


def format_finite_class(cls: FiniteClass) -> str:
    lines = [f"{len(cls.universe)} {cls.universe.shape[1]}"]
    lines += [" ".join(repr(float(c)) for c in row) for row in cls.universe]
    lines += [" ".join(str(int(v)) for v in row) for row in cls.hypotheses]
    return "\n".join(lines) + "\n"


def _seeds(seed: int) -> tuple[np.random.SeedSequence, int]:
    gen, alice = np.random.SeedSequence(seed).spawn(2)
    return gen, int(alice.generate_state(1)[0])


def build_instance(s: Scenario) -> Instance:
    gen_seed, _ = _seeds(s.seed)
    if s.generator == "margin_third":
        return margin_third_instance(s.n)
    if s.generator == "random_separable":
        return random_separable(s.gamma, s.d, s.n, seed=gen_seed)
    if s.generator == "small_margin":
        x, _ = construct_small_margin(s.gamma, s.d, seed=gen_seed, target_k=s.k)
        return Instance.from_arrays(x, -np.ones(len(x), dtype=int))
    return parse_instance(s.resolve(s.path).read_text())


def build_class(s: Scenario):
    if s.class_kind == "finite":
        return parse_finite_class(s.resolve(s.class_path).read_text())
    return LinearMarginClass(s.margin)


def build_strategy(s: Scenario) -> AliceStrategy:
    _, alice_seed = _seeds(s.seed)
    if s.strategy == "random_errors":
        return AliceStrategy.random_errors(s.strategy_count, alice_seed)
    return AliceStrategy(s.strategy, tuple(s.strategy_ids))


def execute(s: Scenario, instance: Instance, cls, alice: AliceStrategy) -> Outcome:
    if s.mode == "realizable":
        return run_realizable(instance, alice, cls)
    if s.mode == "robust":
        return run_robust(instance, alice, cls, s.slack)
    return run_error_tolerant(instance, alice, cls, inner=s.inner, slack=s.slack)


def disclosure_bound(s: Scenario, cls) -> float | None:
    """Closed-form k bound for the run's class, if one applies."""
    if not isinstance(cls, LinearMarginClass) or cls.gamma <= THIRD or is_third(cls.gamma):
        return None
    if s.robust:
        return robust_loo_bound(cls.gamma, cls.gamma, s.slack)
    return loo_bound(cls.gamma)


def exact_loo(instance: Instance, cls, slack: int) -> int | None:
    """Exact (robust) LOO dimension of the class on the instance, or None
    when the instance is past the search limit."""
    n = len(instance)
    if n == 0:
        return 0
    limit = MAX_GROUND if isinstance(cls, FiniteClass) else LOO_LIMIT.get(slack, 0)
    if n > limit:
        return None
    system = _class_system(instance.points, cls)
    k, _ = robust_loo_dimension(system, slack) if slack else loo_dimension(system)
    return k


@dataclass
class RunReport:
    summary: dict
    checks: dict[str, bool]
    outcome: Outcome | None

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def summary_csv(self) -> str:
        return summary_csv([self.summary])


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def summary_csv(rows) -> str:
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(SUMMARY_FIELDS)
    for row in rows:
        out.writerow([_fmt(row.get(f)) for f in SUMMARY_FIELDS])
    return buf.getvalue()


def evaluate(s: Scenario, with_loo: bool = True) -> RunReport:
    """Run the scenario and check every invariant that applies to it."""
    instance = build_instance(s)
    cls = build_class(s)
    alice = build_strategy(s)
    out = execute(s, instance, cls, alice)
    tr, m = out.transcript, out.metrics
    truthful = alice.kind == "truthful"
    bound = disclosure_bound(s, cls)
    loo = exact_loo(instance, cls, s.slack) if with_loo and truthful else None
    n_plus = instance.n_plus
    slack = s.slack if s.robust else 0

    checks = {}
    checks["recall"] = m.recall >= (1.0 - slack / n_plus if n_plus else 1.0) - 1e-12
    checks["disclosed_covers_adjudicated"] = tr.adjudicated <= tr.disclosed
    if truthful and s.mode != "error_tolerant":
        if bound is not None:
            checks["disclosure_le_bound"] = m.nonresponsive_disclosure <= math.floor(bound + 1e-9)
        if loo is not None:
            checks["disclosure_le_loo"] = m.nonresponsive_disclosure <= loo
    if s.mode == "realizable" and not tr.full_disclosure:
        checks["oracle_budget"] = tr.scan_calls <= len(instance) - int(np.sum(alice.report(instance) == 1))
    if s.mode == "error_tolerant" and bound is not None:
        checks["disclosure_le_k_e_plus_1"] = (
            m.nonresponsive_disclosure <= math.floor(bound + 1e-9) * (tr.detected_errors + 1)
        )

    summary = {
        "scenario": s.name, "generator": s.generator,
        "mode": s.mode if s.mode != "error_tolerant" else f"error_tolerant({s.inner})",
        "n": len(instance), "n_plus": n_plus, "recall": float(m.recall),
        "disclosure": m.nonresponsive_disclosure, "detected_errors": tr.detected_errors,
        "k_bound": bound, "loo_dimension": loo, "oracle_calls": tr.oracle_calls,
        "scan_calls": tr.scan_calls, "iterations": tr.iterations,
        "full_disclosure": tr.full_disclosure,
        "checks": ";".join(f"{k}={'pass' if v else 'FAIL'}" for k, v in checks.items()),
    }
    return RunReport(summary, checks, out)


def run_scenario(s: Scenario, out_dir=None) -> tuple[int, RunReport | None, str]:
    """Run, write ``<name>.summary.csv`` and ``<name>.events.jsonl`` (and a
    scan trace) under ``out_dir``, return (exit status, report, message)."""
    try:
        report = evaluate(s)
    except (DomainError, ConstructionFailed, ProtocolAborted, OSError) as exc:
        return 2, None, f"{type(exc).__name__}: {exc}"
    target = out_dir if out_dir is not None else s.out
    if target is not None:
        target = Path(target)
        target.mkdir(parents=True, exist_ok=True)
        tr = report.outcome.transcript
        (target / f"{s.name}.summary.csv").write_text(report.summary_csv())
        (target / f"{s.name}.events.jsonl").write_text(tr.event_log())
        if tr.critical:
            trace = "".join(c.trace_csv(tr.ids) if i == 0 else c.trace_csv(tr.ids).split("\n", 1)[1]
                            for i, c in enumerate(tr.critical))
            (target / f"{s.name}.trace.csv").write_text(trace)
    failed = [k for k, v in report.checks.items() if not v]
    if failed:
        return 1, report, "invariant failures: " + ", ".join(failed)
    return 0, report, "all checks passed"


# ---- sweep ---------------------------------------------------------------

SWEEP_FIELDS = ("regime", "gamma", "seed", "d", "points", "construction_size",
                "disclosure", "recall", "bound", "status")


def regime_of(gamma: float) -> str:
    if is_third(gamma):
        return "gamma=1/3"
    return "gamma>1/3" if gamma > THIRD else "gamma<1/3"


def _sweep_cell(gamma: float, d: int, seed: int, n: int, target_k: int) -> dict:
    regime = regime_of(gamma)
    row = {"regime": regime, "gamma": gamma, "seed": seed, "d": d}
    gen_seed, _ = _seeds(seed)
    if regime == "gamma>1/3":
        instance = random_separable(gamma, d, n, seed=gen_seed)
        cls = LinearMarginClass(gamma)
        bound = loo_bound(gamma)
        row["bound"] = bound
        row["construction_size"] = None
    elif regime == "gamma=1/3":
        if d < 2:
            raise DomainError("the 1/3 construction needs d >= 2")
        instance = margin_third_instance(d - 1)
        cls = LinearMarginClass(THIRD)
        row["bound"] = None
        row["construction_size"] = d - 1
        row["d"] = d
    else:
        # the construction lives one dimension up
        x, _ = construct_small_margin(gamma, d - 1, seed=gen_seed, target_k=target_k)
        instance = Instance.from_arrays(x, -np.ones(len(x), dtype=int))
        cls = LinearMarginClass(gamma)
        row["bound"] = None
        row["construction_size"] = len(x)
    out = run_realizable(instance, AliceStrategy(), cls)
    row["points"] = len(instance)
    row["disclosure"] = out.metrics.nonresponsive_disclosure
    row["recall"] = float(out.metrics.recall)
    ok = out.metrics.recall == 1.0
    if row["bound"] is not None:
        ok = ok and row["disclosure"] <= math.floor(row["bound"] + 1e-9)
    if row["construction_size"] is not None:
        ok = ok and row["disclosure"] == row["construction_size"]
    row["status"] = "ok" if ok else "violation"
    return row


def sweep_trichotomy(gammas, d: int, seeds, n: int = 40, target_k: int = 30) -> list[dict]:
    """One row per (gamma, seed), grouped by regime. For gamma = 1/3 the
    construction with d - 1 points in R^d is used; for gamma < 1/3 the
    nearly-orthogonal construction of ``target_k`` points in R^d. A failed
    cell is recorded with its error and the sweep moves on."""
    order = {"gamma>1/3": 0, "gamma=1/3": 1, "gamma<1/3": 2}
    rows = []
    for gamma in sorted(gammas, key=lambda g: (order[regime_of(g)], -g)):
        for seed in seeds:
            try:
                rows.append(_sweep_cell(float(gamma), d, int(seed), n, target_k))
            except (DomainError, ConstructionFailed, ProtocolAborted) as exc:
                rows.append({"regime": regime_of(gamma), "gamma": float(gamma), "seed": seed, "d": d,
                             "status": f"failed: {type(exc).__name__}: {exc}"})
    return rows


def sweep_csv(rows) -> str:
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(SWEEP_FIELDS)
    for row in rows:
        out.writerow([_fmt(row.get(f)) for f in SWEEP_FIELDS])
    return buf.getvalue()


def family_from_construction(kind: str, **kw):
    """(points, witnesses) of either construction, for the CLI."""
    if kind == "third":
        return construct_margin_third(kw["n"])
    return construct_small_margin(kw["gamma"], kw["d"], seed=kw.get("seed"), target_k=kw["k"])

