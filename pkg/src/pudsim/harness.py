"""Characterization experiments over sampled row groups.

Each (bank, subarray) pair is an independent work unit with its own seed
stream, so results do not depend on how units are scheduled. Within a unit
the variation sample is frozen and reused across every knob setting, which
keeps temperature, voltage and pattern comparisons paired.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
import math
import os
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .bank import (FIXED_PATTERNS, PATTERN_NAMES, SOLID_PATTERNS, Bank, Subarray, act, byte_row,
                   pattern_matrix, pre, wr)
from .decoder import activation_set, find_pair_for_count, join_address
from .ops import (MAJ_N, MAJ_X, majority, maj_x, multi_row_copy, plan_replication, row_clone)
from .profile import DeviceProfile, get_profile

OPERATIONS = ("activation", "maj", "mrc")
ACTIVATION_N = (2, 4, 8, 16, 32)


@dataclass
class ExperimentConfig:
    operation: str = "maj"
    profile: str = "mfrH-512"
    t1: list[float] = field(default_factory=lambda: [1.5])
    t2: list[float] = field(default_factory=lambda: [3.0])
    n: list[int] = field(default_factory=lambda: [4, 8, 16, 32])
    x: list[int] = field(default_factory=lambda: [3, 5, 7, 9])
    patterns: list[str] = field(default_factory=lambda: ["random"])
    temperatures: list[float] = field(default_factory=lambda: [50.0])
    vpps: list[float] = field(default_factory=lambda: [2.5])
    trials: int = 10
    groups: int = 100
    subarrays: int = 3
    banks: int = 16
    columns: int = 256
    seed: int = 0
    analog: dict[str, Any] = field(default_factory=dict)

    def validate(self, profile: DeviceProfile | None = None) -> DeviceProfile:
        if self.operation not in OPERATIONS:
            raise ValueError(f"operation must be one of {OPERATIONS}")
        prof = profile or get_profile(self.profile)
        if self.analog:
            prof = prof.with_analog(**self.analog)
        g = prof.command_granularity
        for t in list(self.t1) + list(self.t2):
            k = t / g
            if t <= 0 or abs(k - round(k)) > 1e-6:
                raise ValueError(f"timing {t} is not a positive multiple of {g}ns")
        if not self.t1 or not self.t2 or not self.n:
            raise ValueError("timing and N grids must be non-empty")
        allowed_n = MAJ_N if self.operation == "maj" else ACTIVATION_N
        for n in self.n:
            if n not in allowed_n:
                raise ValueError(f"N={n} not valid for {self.operation}")
        if self.operation == "maj":
            if not self.x or any(x not in MAJ_X for x in self.x):
                raise ValueError(f"X list must be a non-empty subset of {MAJ_X}")
        for p in self.patterns:
            if p not in PATTERN_NAMES:
                raise ValueError(f"unknown data pattern {p!r}")
        for name in ("trials", "groups", "subarrays", "banks", "columns"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.subarrays > prof.rows_per_bank // prof.rows_per_subarray:
            raise ValueError("more subarrays requested than the bank holds")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must fit in 64 bits")
        from .analog import environment_scale
        for t, v in itertools.product(self.temperatures, self.vpps):
            environment_scale(prof.analog, t, v)
        return prof

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        bad = set(data) - known
        if bad:
            raise ValueError(f"unknown experiment fields: {sorted(bad)}")
        return cls(**dict(data))

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def tuples(self) -> list[tuple]:
        """Canonical parameter tuples (x, n, t1, t2, pattern, temperature, vpp)."""
        xs = sorted(self.x) if self.operation == "maj" else [0]
        out = []
        for x, n, t1, t2, pat, temp, vpp in itertools.product(
                xs, sorted(self.n), sorted(self.t1), sorted(self.t2), self.patterns,
                sorted(self.temperatures), sorted(self.vpps, reverse=True)):
            if self.operation == "maj" and n < x:
                continue
            out.append((x, n, float(t1), float(t2), pat, float(temp), float(vpp)))
        return out


PARAM_FIELDS = ("x", "n", "t1", "t2", "pattern", "temperature", "vpp")


@dataclass(frozen=True)
class GroupResult:
    operation: str
    params: tuple
    bank: int
    subarray: int
    group: int
    r_first: int
    r_second: int
    success: float


@dataclass(frozen=True)
class Summary:
    operation: str
    params: tuple
    groups: int
    mean: float
    min: float
    q1: float
    median: float
    q3: float
    max: float

    def as_row(self) -> dict[str, Any]:
        d = {"operation": self.operation}
        d.update(dict(zip(PARAM_FIELDS, self.params)))
        d.update(groups=self.groups, mean=self.mean, min=self.min, q1=self.q1,
                 median=self.median, q3=self.q3, max=self.max)
        return d


@dataclass
class ReportSet:
    config: ExperimentConfig
    groups: list[GroupResult]
    summaries: list[Summary]

    def summary(self, **match) -> Summary:
        hits = [s for s in self.summaries
                if all(dict(zip(PARAM_FIELDS, s.params))[k] == v for k, v in match.items())]
        if len(hits) != 1:
            raise KeyError(f"{len(hits)} summaries match {match}")
        return hits[0]

    def mean(self, **match) -> float:
        return self.summary(**match).mean


def quartiles(values: Sequence[float]) -> tuple[float, float, float, float, float]:
    """(min, Q1, median, Q3, max) with inclusive quartiles."""
    v = sorted(values)
    if len(v) == 1:
        return (v[0],) * 5
    q1, med, q3 = statistics.quantiles(v, n=4, method="inclusive")
    return v[0], q1, med, q3, v[-1]


def summarize(operation: str, results: Iterable[GroupResult]) -> list[Summary]:
    by: dict[tuple, list[float]] = {}
    for r in results:
        by.setdefault(r.params, []).append(r.success)
    out = []
    for params in sorted(by, key=_sort_key):
        vals = by[params]
        mn, q1, med, q3, mx = quartiles(vals)
        out.append(Summary(operation, params, len(vals), float(np.mean(vals)), mn, q1, med, q3, mx))
    return out


def _sort_key(params: tuple) -> tuple:
    x, n, t1, t2, pat, temp, vpp = params
    return (x, n, t1, t2, PATTERN_NAMES.index(pat), temp, -vpp)


# ------------------------------------------------------------------ per-group work

def _polarity_vectors(X: int, groups: int, rng: np.random.Generator) -> np.ndarray:
    """Operand polarity vector (groups x X) for fixed-pattern runs.

    When there are at least as many groups as vectors, every vector is used
    equally often (up to the remainder). Otherwise Hamming weights follow the
    binomial proportions exactly (largest remainder). Either way fixed
    patterns see the same input mix as random data.
    """
    if 2 ** X <= groups:
        codes = rng.permutation(np.arange(groups) % 2 ** X)
        return ((codes[:, None] >> np.arange(X)) & 1).astype(np.uint8)
    probs = np.array([math.comb(X, k) for k in range(X + 1)], dtype=float) / 2 ** X
    raw = probs * groups
    counts = np.floor(raw).astype(int)
    rem = groups - counts.sum()
    order = np.lexsort((np.arange(X + 1), -(raw - counts)))
    counts[order[:rem]] += 1
    weights = rng.permutation(np.repeat(np.arange(X + 1), counts))
    out = np.zeros((groups, X), dtype=np.uint8)
    for g, w in enumerate(weights):
        out[g, rng.choice(X, size=int(w), replace=False)] = 1
    return out


def _maj_operands(pattern: str, X: int, columns: int, polarity: np.ndarray,
                  rng: np.random.Generator) -> np.ndarray:
    if pattern == "random":
        return rng.integers(0, 2, (X, columns), dtype=np.uint8)
    if pattern in SOLID_PATTERNS:
        return np.full((X, columns), SOLID_PATTERNS[pattern], dtype=np.uint8)
    base = byte_row(FIXED_PATTERNS[pattern], columns)
    return base[None, :] ^ polarity[:, None]


def _source_bits(pattern: str, columns: int, rng: np.random.Generator) -> np.ndarray:
    if pattern == "random":
        return rng.integers(0, 2, columns, dtype=np.uint8)
    if pattern in SOLID_PATTERNS:
        return np.full(columns, SOLID_PATTERNS[pattern], dtype=np.uint8)
    return byte_row(FIXED_PATTERNS[pattern], columns)


def _run_maj(sub: Subarray, prof: DeviceProfile, params: tuple, pair, trials: int,
             polarity: np.ndarray, rng: np.random.Generator) -> float:
    x, n, t1, t2, pat, _, _ = params
    rows = activation_set(*pair, prof)
    plan = plan_replication(x, n, rows)
    operands = _maj_operands(pat, x, sub.columns, polarity, rng)
    expected = majority(operands)
    ok = np.ones(sub.columns, dtype=bool)
    for _ in range(trials):
        res = maj_x(sub, plan, pair[0], pair[1], operands, prof, t1, t2)
        ok &= (res.value == expected) & res.reliable
    return float(ok.mean())


def _run_mrc(sub: Subarray, prof: DeviceProfile, params: tuple, pair, trials: int,
             rng: np.random.Generator) -> float:
    _, n, t1, t2, pat, _, _ = params
    rows = activation_set(*pair, prof)
    dests = [r for r in rows if r != pair[0]]
    src = _source_bits(pat, sub.columns, rng)
    ok = np.ones((len(dests), sub.columns), dtype=bool)
    for _ in range(trials):
        sub.write_rows([pair[0]], src)
        sub.write_rows(dests, 1 - src)
        res = multi_row_copy(sub, pair[0], pair[1], prof, t1, t2)
        ok &= res.correct
    return float(ok.mean())


def _run_activation(sub: Subarray, prof: DeviceProfile, params: tuple, pair, trials: int,
                    rng: np.random.Generator) -> float:
    _, n, t1, t2, pat, _, _ = params
    rows = activation_set(*pair, prof)
    init = pattern_matrix(pat, len(rows), sub.columns, rng)
    data = 1 - init[0] if pat != "random" else rng.integers(0, 2, sub.columns, dtype=np.uint8)
    bank = Bank(prof, params=sub.params, columns=sub.columns, subarrays={sub.index: sub})
    g = lambda r: join_address(sub.index, r, prof)
    ok = np.ones((len(rows), sub.columns), dtype=bool)
    for _ in range(trials):
        sub.write_rows(rows, init)
        bank.execute([act(g(pair[0]), t1), pre(t2), act(g(pair[1]), prof.tRCD),
                      wr(data, prof.tRAS), pre(prof.tRP)])
        got, reliable = sub.read_rows(rows)
        ok &= (got == data) & reliable
    return float(ok.mean())


def _tested_subarrays(prof: DeviceProfile, count: int, seed: int, bank: int) -> list[int]:
    total = prof.rows_per_bank // prof.rows_per_subarray
    rng = np.random.default_rng([seed, bank, 0xA5])
    return sorted(int(i) for i in rng.choice(total, size=count, replace=False))


def _run_unit(args) -> list[GroupResult]:
    cfg, prof, bank_i, slot, sub_idx = args
    ss = np.random.SeedSequence([cfg.seed, bank_i, sub_idx])
    sub = Subarray(prof, ss, cfg.columns, prof.analog, sub_idx)
    out = []
    tuples = cfg.tuples()
    polarity: dict[tuple, np.ndarray] = {}
    for params in tuples:
        x, n, t1, t2, pat, temp, vpp = params
        sub.set_environment(temp, vpp)
        pat_i = PATTERN_NAMES.index(pat)
        if cfg.operation == "maj" and (x, n) not in polarity:
            polarity[(x, n)] = _polarity_vectors(x, cfg.groups,
                                                 np.random.default_rng([cfg.seed, bank_i, sub_idx, x, n, 1]))
        for gi in range(cfg.groups):
            pair = find_pair_for_count(prof, n, np.random.default_rng([cfg.seed, bank_i, sub_idx, gi, n]))
            # data depends on the group and pattern only, so knob sweeps see identical inputs
            drng = np.random.default_rng([cfg.seed, bank_i, sub_idx, gi, n, x, pat_i, 2])
            if cfg.operation == "maj":
                s = _run_maj(sub, prof, params, pair, cfg.trials, polarity[(x, n)][gi], drng)
            elif cfg.operation == "mrc":
                s = _run_mrc(sub, prof, params, pair, cfg.trials, drng)
            else:
                s = _run_activation(sub, prof, params, pair, cfg.trials, drng)
            out.append(GroupResult(cfg.operation, params, bank_i, slot, gi, pair[0], pair[1], s))
    return out


def run_experiment(cfg: ExperimentConfig, profile: DeviceProfile | None = None,
                   jobs: int = 1) -> ReportSet:
    prof = cfg.validate(profile)
    units = []
    for b in range(cfg.banks):
        for slot, idx in enumerate(_tested_subarrays(prof, cfg.subarrays, cfg.seed, b)):
            units.append((cfg, prof, b, slot, idx))
    if jobs > 1 and len(units) > 1:
        with ProcessPoolExecutor(jobs) as ex:
            parts = list(ex.map(_run_unit, units))
    else:
        parts = [_run_unit(u) for u in units]
    results = sorted(itertools.chain.from_iterable(parts),
                     key=lambda r: (_sort_key(r.params), r.bank, r.subarray, r.group))
    return ReportSet(cfg, results, summarize(cfg.operation, results))


def run_activation_test(cfg: ExperimentConfig, **kw) -> ReportSet:
    if cfg.operation != "activation":
        raise ValueError("config operation must be 'activation'")
    return run_experiment(cfg, **kw)


def run_maj_sweep(cfg: ExperimentConfig, **kw) -> ReportSet:
    if cfg.operation != "maj":
        raise ValueError("config operation must be 'maj'")
    return run_experiment(cfg, **kw)


def run_mrc_sweep(cfg: ExperimentConfig, **kw) -> ReportSet:
    if cfg.operation != "mrc":
        raise ValueError("config operation must be 'mrc'")
    return run_experiment(cfg, **kw)


def best_timing(report: ReportSet, **match) -> tuple[float, float]:
    """(t1, t2) with the highest mean success among matching summaries.

    Selection is per profile; ties go to the smaller t1 + t2.
    """
    cands = [s for s in report.summaries
             if all(dict(zip(PARAM_FIELDS, s.params))[k] == v for k, v in match.items())]
    if not cands:
        raise KeyError(f"no summaries match {match}")
    best = max(cands, key=lambda s: (s.mean, -(s.params[2] + s.params[3])))
    return best.params[2], best.params[3]


# ------------------------------------------------------------------ boundary discovery

def discover_subarrays(bank: Bank, threshold: float = 0.9) -> list[tuple[int, int]]:
    """Inclusive row ranges inside which RowClone succeeds.

    For each range start, doubles the probe distance until a copy fails,
    then bisects for the last row that still copies. Assumes ranges are
    contiguous, which holds for a hierarchical decoder.
    """
    prof = bank.profile
    total = (prof.rows_per_bank // prof.rows_per_subarray) * prof.rows_per_subarray
    rng = np.random.default_rng([bank.seed, 0xD15C])

    def copies(a: int, b: int) -> bool:
        sa = bank.subarray(a // prof.rows_per_subarray)
        sb = bank.subarray(b // prof.rows_per_subarray)
        bits = rng.integers(0, 2, sa.columns, dtype=np.uint8)
        sa.write_rows([a % prof.rows_per_subarray], bits)
        sb.write_rows([b % prof.rows_per_subarray], 1 - bits)
        return row_clone(bank, a, b).correct.mean() >= threshold

    ranges = []
    start = 0
    while start < total:
        step, good = 1, start
        while start + step < total and copies(start, start + step):
            good = start + step
            step *= 2
        bad = min(start + step, total)
        while bad - good > 1:
            mid = (good + bad) // 2
            if copies(start, mid):
                good = mid
            else:
                bad = mid
        ranges.append((start, good))
        start = good + 1
    return ranges


# ------------------------------------------------------------------ export

SUMMARY_COLUMNS = ("operation",) + PARAM_FIELDS + ("groups", "mean", "min", "q1", "median", "q3", "max")
GROUP_COLUMNS = ("operation",) + PARAM_FIELDS + ("bank", "subarray", "group", "r_first", "r_second", "success")


def _fmt(v: Any) -> Any:
    return f"{v:.6f}" if isinstance(v, float) else v


def _group_row(r: GroupResult) -> dict[str, Any]:
    d = {"operation": r.operation}
    d.update(dict(zip(PARAM_FIELDS, r.params)))
    d.update(bank=r.bank, subarray=r.subarray, group=r.group, r_first=r.r_first,
             r_second=r.r_second, success=r.success)
    return d


def _csv(rows: list[dict[str, Any]], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: _fmt(r[k]) for k in columns})
    return buf.getvalue()


def plot_data(report: ReportSet) -> list[dict[str, Any]]:
    """x/y/series triples: mean success against N, one series per other parameter."""
    out = []
    for s in report.summaries:
        x, n, t1, t2, pat, temp, vpp = s.params
        series = f"{report.config.operation} X={x} t1={t1:g} t2={t2:g} {pat} {temp:g}C {vpp:g}V"
        out.append({"x": n, "y": round(s.mean, 6), "series": series})
    return out


def render(reports: Sequence[ReportSet], fmt: str = "csv", stem: str = "results",
           plot: bool = True) -> dict[str, str]:
    """File name to text for every export artifact, in canonical order."""
    if not reports or not any(r.summaries for r in reports):
        raise ValueError("nothing to export")
    if fmt not in ("csv", "json"):
        raise ValueError("format must be 'csv' or 'json'")
    summaries = [s.as_row() for r in reports for s in r.summaries]
    groups = [_group_row(g) for r in reports for g in r.groups]
    out = {}
    if fmt == "csv":
        out[f"{stem}_summary.csv"] = _csv(summaries, SUMMARY_COLUMNS)
        out[f"{stem}_groups.csv"] = _csv(groups, GROUP_COLUMNS)
    else:
        body = {"summaries": [{k: _round(v) for k, v in s.items()} for s in summaries],
                "groups": [{k: _round(v) for k, v in g.items()} for g in groups]}
        out[f"{stem}.json"] = json.dumps(body, indent=1, sort_keys=True) + "\n"
    if plot:
        pts = [pt for r in reports for pt in plot_data(r)]
        out[f"{stem}_plot.json"] = json.dumps(pts, indent=1, sort_keys=True) + "\n"
    return out


def export(reports: Sequence[ReportSet], directory: str | os.PathLike, fmt: str = "csv",
           stem: str = "results", plot: bool = True) -> list[Path]:
    """Write summaries and per-group records; returns the written paths."""
    files = render(reports, fmt, stem, plot)
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, text in files.items():
        p = d / name
        p.write_text(text)
        paths.append(p)
    return paths


def _round(v: Any) -> Any:
    return round(v, 6) if isinstance(v, float) else v
