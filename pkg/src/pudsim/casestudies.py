"""Analytical cost models for majority-based arithmetic and content destruction.

Kernels are lowered to majority gates over dual-rail literals. A literal is
an input bit, a constant row, or the output of an earlier gate, possibly
complemented. Complemented inputs come from extra host writes. A
complemented gate output is produced by the dual gate, because
``not MAJ(x...) == MAJ(not x...)``.

Each gate expands into operand placement (RowClone or Multi-RowCopy per
operand), Frac for neutral rows, and one APA.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .ops import MAJ_N, MAJ_X, plan_replication
from .profile import DeviceProfile, get_profile

KERNELS = ("AND", "OR", "XOR", "ADD", "SUB", "MUL", "DIV")
STEP_KINDS = ("MajX", "MultiRowCopy", "RowClone", "FracInit", "HostWrite")
MRC_N = (2, 4, 8, 16, 32)

# Chip-measured mean MAJ success per (X, N); MAJ3 at N=4 sits 30.81 points
# below MAJ3 at N=32.
MEASURED_RATES: dict[tuple[int, int], float] = {
    (3, 4): 0.6819,
    (3, 32): 0.9900,
    (5, 32): 0.7964,
    (7, 32): 0.3387,
    (9, 32): 0.0591,
}
BASELINE = (3, 4)


# ------------------------------------------------------------------ latencies

def latency_table(profile: DeviceProfile, t1: float = 1.5, t2: float = 3.0,
                  rowclone_t2: float = 6.0, mrc_t2: float = 3.0) -> dict[str, float]:
    """Per-primitive latency in ns, derived from command timing sums.

    Published chip latencies are not available, so every entry is the sum of
    the delays in its command sequence.
    """
    p = profile
    return {
        "MajX": t1 + t2 + p.tRAS + p.tRP,
        "RowClone": p.tRAS + rowclone_t2 + p.tRAS + p.tRP,
        "MultiRowCopy": p.tRAS + mrc_t2 + p.tRAS + p.tRP,
        # two short ACT/PRE rounds leave the cells near Vdd/2
        "FracInit": 2 * (p.command_granularity + p.tRP),
        "HostWrite": p.tRCD + (p.columns / p.burst_bits) * p.tCCD + p.tWR + p.tRP,
    }


@dataclass
class CostModel:
    latency: dict[str, float]
    usable: dict[tuple[int, int], float]
    columns: int = 65536
    baseline: tuple[int, int] = BASELINE

    def __post_init__(self) -> None:
        self.usable = {(int(x), int(n)): float(v) for (x, n), v in self.usable.items()}
        for k, v in self.usable.items():
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"usable fraction for {k} outside [0, 1]")
        for k, v in self.latency.items():
            if v <= 0:
                raise ValueError(f"latency of {k} must be positive")

    @classmethod
    def default(cls, profile: DeviceProfile | str = "mfrH-512",
                rates: Mapping[tuple[int, int], float] | None = None) -> "CostModel":
        prof = get_profile(profile) if isinstance(profile, str) else profile
        return cls(latency_table(prof), dict(MEASURED_RATES if rates is None else rates),
                   columns=prof.columns)

    def scaled(self, factor: float) -> "CostModel":
        return CostModel({k: v * factor for k, v in self.latency.items()}, dict(self.usable),
                         self.columns, self.baseline)

    def _lat(self, kind: str) -> float:
        try:
            return self.latency[kind]
        except KeyError:
            raise KeyError(f"cost model has no latency for {kind}") from None

    def gate_latency(self, X: int, N: int) -> float:
        """Placement, neutral-row Frac and the APA of one MAJ-X at N rows."""
        plan = plan_replication(X, N)
        place = self._lat("RowClone") if plan.copies == 1 else self._lat("MultiRowCopy")
        return X * place + plan.neutral_count * self._lat("FracInit") + self._lat("MajX")

    def rate(self, X: int, N: int) -> float:
        try:
            return self.usable[(X, N)]
        except KeyError:
            raise KeyError(f"cost model has no usable fraction for MAJ{X} at N={N}") from None

    def best_n(self, X: int) -> int:
        """N with the highest rate / latency among the covered entries."""
        cands = [n for (x, n) in self.usable if x == X]
        if not cands:
            raise KeyError(f"cost model has no entry for MAJ{X}")
        return max(sorted(cands), key=lambda n: self.usable[(X, n)] / self.gate_latency(X, n))


# ------------------------------------------------------------------ programs

@dataclass(frozen=True)
class Step:
    kind: str
    params: dict[str, Any]
    latency: float

    def __post_init__(self) -> None:
        if self.kind not in STEP_KINDS:
            raise ValueError(f"unknown step kind {self.kind!r}")
        if self.latency <= 0:
            raise ValueError("step latency must be positive")
        if self.kind == "MajX" and not {"X", "N"} <= set(self.params):
            raise ValueError("MAJ steps need X and N")


@dataclass
class PudProgram:
    kernel: str
    width: int
    xs: tuple[int, ...]
    steps: list[Step] = field(default_factory=list)
    inputs: tuple[str, ...] = ()
    outputs: tuple[str, ...] = ()

    @property
    def latency(self) -> float:
        return sum(s.latency for s in self.steps)

    def gates(self) -> list[Step]:
        return [s for s in self.steps if s.kind == "MajX"]

    def count(self, kind: str) -> int:
        return sum(1 for s in self.steps if s.kind == kind)

    def maj_configs(self) -> set[tuple[int, int]]:
        return {(s.params["X"], s.params["N"]) for s in self.gates()}


# Literals are (name, negated). Inputs look like "a3", constants "0"/"1",
# gate outputs "g17".
Lit = tuple[str, bool]
ZERO: Lit = ("0", False)
ONE: Lit = ("1", False)


def _neg(l: Lit) -> Lit:
    if l[0] in ("0", "1"):
        return ONE if l == ZERO else ZERO
    return (l[0], not l[1])


class _Netlist:
    """Majority-gate netlist with structural hashing and trivial folding."""

    def __init__(self, xs: Sequence[int]):
        self.xs = tuple(sorted(xs))
        self.gates: dict[str, tuple[Lit, ...]] = {}
        self._key: dict[tuple[Lit, ...], str] = {}

    def maj(self, *lits: Lit) -> Lit:
        if len(lits) % 2 == 0:
            raise ValueError("majority needs an odd number of inputs")
        # a complementary pair adds exactly one vote, so it can be dropped
        pool = sorted(lits)
        changed = True
        while changed:
            changed = False
            for i, l in enumerate(pool):
                n = _neg(l)
                if n in pool[i + 1:]:
                    j = pool.index(n, i + 1)
                    del pool[j], pool[i]
                    changed = True
                    break
        if len(set(pool)) == 1:
            return pool[0]
        m = len(pool)
        for x in pool:
            if 2 * pool.count(x) > m:
                return x
        width = next((x for x in self.xs if x >= m), None)
        if width is None:
            raise ValueError(f"no available MAJ width fits {m} inputs")
        pad = (width - m) // 2
        key = tuple(sorted(pool + [ZERO] * pad + [ONE] * pad))
        name = self._key.get(key)
        if name is None:
            name = f"g{len(self.gates)}"
            self.gates[name] = key
            self._key[key] = name
        return (name, False)

    # boolean helpers --------------------------------------------------
    def AND(self, a: Lit, b: Lit) -> Lit:
        return self.maj(a, b, ZERO)

    def OR(self, a: Lit, b: Lit) -> Lit:
        return self.maj(a, b, ONE)

    def XOR(self, a: Lit, b: Lit) -> Lit:
        if 5 in self.xs:
            n = self.maj(_neg(a), _neg(b), ONE)
            return self.maj(a, b, n, n, ZERO)
        return self.maj(self.maj(a, b, ONE), self.maj(_neg(a), _neg(b), ONE), ZERO)

    def full_add(self, a: Lit, b: Lit, c: Lit) -> tuple[Lit, Lit]:
        """(sum, carry)."""
        cout = self.maj(a, b, c)
        if 5 in self.xs:
            s = self.maj(a, b, c, _neg(cout), _neg(cout))
        else:
            t = self.maj(a, b, _neg(c))
            s = self.maj(t, _neg(cout), c)
        return s, cout

    def mux(self, sel: Lit, x: Lit, y: Lit) -> Lit:
        """sel ? x : y."""
        u = self.maj(sel, x, ZERO)
        if 5 in self.xs:
            return self.maj(u, u, _neg(sel), y, ONE)
        return self.maj(u, self.maj(_neg(sel), y, ZERO), ONE)

    def add(self, a: Sequence[Lit], b: Sequence[Lit], cin: Lit = ZERO) -> tuple[list[Lit], Lit]:
        out = []
        for ai, bi in zip(a, b):
            s, cin = self.full_add(ai, bi, cin)
            out.append(s)
        return out, cin


def _bits(name: str, width: int) -> list[Lit]:
    return [(f"{name}{i}", False) for i in range(width)]


def _build(kernel: str, width: int, net: _Netlist) -> list[Lit]:
    a, b = _bits("a", width), _bits("b", width)
    if kernel == "AND":
        return [net.AND(x, y) for x, y in zip(a, b)]
    if kernel == "OR":
        return [net.OR(x, y) for x, y in zip(a, b)]
    if kernel == "XOR":
        return [net.XOR(x, y) for x, y in zip(a, b)]
    if kernel == "ADD":
        return net.add(a, b)[0]
    if kernel == "SUB":
        return net.add(a, [_neg(y) for y in b], ONE)[0]
    if kernel == "MUL":
        acc = [net.AND(x, b[0]) for x in a]
        for j in range(1, width):
            pp = [net.AND(a[i], b[j]) for i in range(width - j)]
            hi, _ = net.add(acc[j:], pp)
            acc = acc[:j] + hi
        return acc
    if kernel == "DIV":
        # restoring division; the partial remainder carries one guard bit
        rem = [ZERO] * width
        q = [ZERO] * width
        nb = [_neg(y) for y in b] + [ONE]
        for i in range(width - 1, -1, -1):
            shifted = [a[i]] + rem[:width]
            diff, ok = net.add(shifted, nb, ONE)
            q[i] = ok
            rem = [net.mux(ok, d, r) for d, r in zip(diff[:width], shifted[:width])]
        return q
    raise ValueError(f"unknown kernel {kernel!r}; choose from {KERNELS}")


def lower_kernel(kernel: str, width: int, xs: Iterable[int], cost: CostModel | None = None,
                 n: Mapping[int, int] | None = None) -> PudProgram:
    """Lower a bitwise kernel to a PUD program using only MAJ widths in ``xs``.

    MAJ5 forms are used for the adder sum, XOR and the division mux when
    available. No MAJ7 or MAJ9 form shortens these kernels, so wider gates
    only appear through padding. ``n`` fixes the activation count per X;
    by default the cost model picks the highest-throughput N.
    """
    kernel = kernel.upper()
    if width < 1:
        raise ValueError("width must be >= 1")
    xs = tuple(sorted(set(xs)))
    if not xs:
        raise ValueError("the available MAJ width set is empty")
    if any(x not in MAJ_X for x in xs):
        raise ValueError(f"MAJ widths must come from {MAJ_X}")
    cost = cost or CostModel.default()
    net = _Netlist(xs)
    outs = _build(kernel, width, net)
    prog = PudProgram(kernel, width, xs,
                      inputs=tuple(f"{v}{i}" for v in "ab" for i in range(width)))
    n_for = dict(n) if n else {}

    def n_of(X: int) -> int:
        if X not in n_for:
            n_for[X] = cost.best_n(X)
        if n_for[X] not in MAJ_N or n_for[X] < X:
            raise ValueError(f"invalid N={n_for[X]} for MAJ{X}")
        return n_for[X]

    rows: dict[Lit, str] = {}
    steps = prog.steps
    gid = 0

    def row(l: Lit) -> str:
        nonlocal gid
        if l in rows:
            return rows[l]
        name, neg = l
        if name in ("0", "1"):
            rows[l] = name
            steps.append(Step("HostWrite", {"dst": name, "src": name}, cost._lat("HostWrite")))
        elif not name.startswith("g"):
            rows[l] = f"~{name}" if neg else name
            if neg:
                steps.append(Step("HostWrite", {"dst": rows[l], "src": rows[l]},
                                  cost._lat("HostWrite")))
        else:
            ins = net.gates[name]
            if neg:
                ins = tuple(sorted(_neg(i) for i in ins))
            srcs = [row(i) for i in ins]
            X = len(ins)
            N = n_of(X)
            plan = plan_replication(X, N)
            gid += 1
            kind = "RowClone" if plan.copies == 1 else "MultiRowCopy"
            for k, s in enumerate(srcs):
                steps.append(Step(kind, {"src": s, "operand": k, "gate": gid},
                                  cost._lat(kind)))
            for _ in range(plan.neutral_count):
                steps.append(Step("FracInit", {"gate": gid}, cost._lat("FracInit")))
            out = f"~{name}" if neg else name
            steps.append(Step("MajX", {"X": X, "N": N, "inputs": tuple(srcs), "dst": out,
                                       "gate": gid}, cost._lat("MajX")))
            rows[l] = out
        return rows[l]

    prog.outputs = tuple(row(l) for l in outs)
    return prog


def widen(program: PudProgram, X: int) -> PudProgram:
    """Replace every MAJ step by a MAJ-X with the same function.

    Inputs are replicated when the width divides X; otherwise equal numbers
    of constant-0 and constant-1 operands pad the gate.
    """
    steps = []
    for s in program.steps:
        if s.kind == "MajX" and s.params["X"] < X:
            ins = list(s.params["inputs"])
            k = len(ins)
            if X % k == 0:
                ins = [i for i in ins for _ in range(X // k)]
            else:
                pad = (X - k) // 2
                ins = ins + ["0"] * pad + ["1"] * pad
            s = Step("MajX", dict(s.params, X=X, inputs=tuple(ins)), s.latency)
        steps.append(s)
    return PudProgram(program.kernel, program.width, program.xs, steps, program.inputs,
                      program.outputs)


def simulate(program: PudProgram, a, b) -> np.ndarray:
    """Bit-exact evaluation over integer arrays ``a`` and ``b``; returns y."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    a, b = np.broadcast_arrays(a, b)
    w = program.width
    rows: dict[str, np.ndarray] = {"0": np.zeros(a.shape, bool), "1": np.ones(a.shape, bool)}
    for i in range(w):
        rows[f"a{i}"] = (a >> i) & 1 == 1
        rows[f"b{i}"] = (b >> i) & 1 == 1
    for s in program.steps:
        p = s.params
        if s.kind == "HostWrite":
            src = p["src"]
            rows[p["dst"]] = ~rows[src[1:]] if src.startswith("~") else rows[src]
        elif s.kind == "MajX":
            votes = sum(rows[r].astype(np.int64) for r in p["inputs"])
            rows[p["dst"]] = 2 * votes > len(p["inputs"])
    y = np.zeros(a.shape, dtype=np.int64)
    for i, r in enumerate(program.outputs):
        y |= rows[r].astype(np.int64) << i
    return y


def oracle(kernel: str, width: int, a, b) -> np.ndarray:
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    mask = (1 << width) - 1
    k = kernel.upper()
    if k == "AND":
        return a & b
    if k == "OR":
        return a | b
    if k == "XOR":
        return a ^ b
    if k == "ADD":
        return (a + b) & mask
    if k == "SUB":
        return (a - b) & mask
    if k == "MUL":
        return (a * b) & mask
    if k == "DIV":
        if np.any(b == 0):
            raise ZeroDivisionError("division oracle needs nonzero divisors")
        return a // b
    raise ValueError(f"unknown kernel {kernel!r}")


# ------------------------------------------------------------------ speedup

def program_time(program: PudProgram, cost: CostModel, mode: str = "usable") -> float:
    """Latency re-costed from the model; in ``retry`` mode each gate's
    steps are repeated 1/p times on average."""
    if mode not in ("usable", "retry"):
        raise ValueError("mode must be 'usable' or 'retry'")
    rates = {}
    for s in program.gates():
        rates[s.params["gate"]] = cost.rate(s.params["X"], s.params["N"])
    total = 0.0
    for s in program.steps:
        lat = cost._lat(s.kind)
        if mode == "retry" and "gate" in s.params:
            p = rates[s.params["gate"]]
            lat = math.inf if p == 0 else lat / p
        total += lat
    return total


def throughput(program: PudProgram, cost: CostModel, mode: str = "usable") -> float:
    """Correct output columns per ns."""
    t = program_time(program, cost, mode)
    if mode == "retry":
        return cost.columns / t
    fracs = [cost.rate(x, n) for x, n in program.maj_configs()]
    usable = min(fracs) if fracs else 1.0
    return cost.columns * usable / t


def baseline_program(kernel: str, width: int, cost: CostModel | None = None) -> PudProgram:
    cost = cost or CostModel.default()
    X, N = cost.baseline
    return lower_kernel(kernel, width, {X}, cost, n={X: N})


def estimate_speedup(program: PudProgram, cost: CostModel | None = None,
                     mode: str = "usable", baseline: PudProgram | None = None) -> float:
    """Throughput ratio to the MAJ3 / 4-row lowering of the same kernel."""
    cost = cost or CostModel.default()
    base = baseline or baseline_program(program.kernel, program.width, cost)
    return throughput(program, cost, mode) / throughput(base, cost, mode)


def speedup_table(cost: CostModel | None = None, width: int = 32,
                  kernels: Sequence[str] = KERNELS,
                  x_sets: Sequence[Sequence[int]] = ((3,), (3, 5), (3, 5, 7), (3, 5, 7, 9)),
                  mode: str = "usable") -> list[dict[str, Any]]:
    cost = cost or CostModel.default()
    out = []
    for k in kernels:
        base = baseline_program(k, width, cost)
        for xs in x_sets:
            prog = lower_kernel(k, width, xs, cost)
            out.append({"kernel": k, "width": width, "max_x": max(xs),
                        "gates": len(prog.gates()), "latency_ns": program_time(prog, cost, mode),
                        "speedup": estimate_speedup(prog, cost, mode, base)})
    return out


def geomean(values: Iterable[float]) -> float:
    v = list(values)
    return float(math.exp(sum(math.log(x) for x in v) / len(v)))


# ------------------------------------------------------------------ content destruction

def destruction_time(method: str, profile: DeviceProfile | str = "mfrH-512",
                     cost: CostModel | None = None, n: int | None = None) -> dict[str, float]:
    """Time to overwrite a whole bank, and speedup over the RowClone method.

    ``method`` is ``rowclone``, ``frac`` or ``mrc`` (with ``n`` rows per
    Multi-RowCopy, or written ``mrc32``).
    """
    prof = get_profile(profile) if isinstance(profile, str) else profile
    cost = cost or CostModel(latency_table(prof), {}, columns=prof.columns)
    m = method.lower()
    if m.startswith("mrc") and len(m) > 3:
        n = int(m[3:])
        m = "mrc"
    R = prof.rows_per_subarray
    subarrays = prof.rows_per_bank // R
    lat = cost._lat

    def per_sub(kind: str, N: int | None = None) -> float:
        if kind == "rowclone":
            return lat("HostWrite") + (R - 1) * lat("RowClone")
        if kind == "frac":
            return R * lat("FracInit")
        if N not in MRC_N:
            raise ValueError(f"Multi-RowCopy needs N in {MRC_N}")
        return lat("HostWrite") + math.ceil((R - 1) / (N - 1)) * lat("MultiRowCopy")

    if m not in ("rowclone", "frac", "mrc"):
        raise ValueError(f"unknown destruction method {method!r}")
    total = subarrays * per_sub(m, n)
    ref = subarrays * per_sub("rowclone")
    return {"total_ns": total, "speedup": ref / total}


def destruction_table(profile: DeviceProfile | str = "mfrH-512",
                      cost: CostModel | None = None) -> list[dict[str, Any]]:
    rows = []
    for m in ["rowclone", "frac"] + [f"mrc{n}" for n in MRC_N]:
        r = destruction_time(m, profile, cost)
        rows.append({"method": m, "total_ns": r["total_ns"], "speedup": r["speedup"]})
    return rows


# ------------------------------------------------------------------ io

def rates_from_csv(path: str | os.PathLike) -> dict[tuple[int, int], float]:
    """Usable fractions from a harness MAJ summary CSV.

    Means are averaged over pattern, temperature and Vpp per timing, then
    the best timing is kept for each (X, N).
    """
    by: dict[tuple, list[float]] = {}
    with open(path, newline="") as f:
        for r in csv.DictReader(f):
            if r["operation"] != "maj":
                continue
            key = (int(r["x"]), int(r["n"]), float(r["t1"]), float(r["t2"]))
            by.setdefault(key, []).append(float(r["mean"]))
    if not by:
        raise ValueError(f"{path}: no MAJ summaries")
    out: dict[tuple[int, int], float] = {}
    for (x, n, _, _), v in sorted(by.items()):
        out[(x, n)] = max(out.get((x, n), 0.0), float(np.mean(v)))
    return out


def table_text(rows: Sequence[Mapping[str, Any]], fmt: str = "csv") -> str:
    """Render a list of flat records as CSV (6-decimal floats) or JSON."""
    if not rows:
        raise ValueError("empty table")
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: f"{v:.6f}" if isinstance(v, float) else v for k, v in r.items()})
        return buf.getvalue()
    if fmt == "json":
        body = [{k: round(v, 6) if isinstance(v, float) else v for k, v in r.items()} for r in rows]
        return json.dumps(body, indent=1, sort_keys=True) + "\n"
    raise ValueError("format must be 'csv' or 'json'")


def write_table(rows: Sequence[Mapping[str, Any]], path: str | os.PathLike, fmt: str = "csv") -> Path:
    path = Path(path)
    path.write_text(table_text(rows, fmt))
    return path
