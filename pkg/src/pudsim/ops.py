"""PUD operations built on the bank state machine.

MAJ-X with operand replication and neutral rows, Frac, RowClone and
Multi-RowCopy, plus the all-trials success-rate metric.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bank import (ActivationMode, Bank, SenseMode, Subarray, apa, classify_timing, pre)
from .decoder import activation_set, join_address, split_address
from .profile import DeviceProfile

MAJ_X = (3, 5, 7, 9)
MAJ_N = (4, 8, 16, 32)

NEUTRAL = -1


@dataclass(frozen=True)
class ReplicationPlan:
    X: int
    N: int
    copies: int
    neutral_count: int
    rows: tuple[int, ...]          # activation-set rows, ascending
    assignment: tuple[int, ...]    # operand index per row, NEUTRAL for Frac rows

    def operand_rows(self, k: int) -> list[int]:
        return [r for r, a in zip(self.rows, self.assignment) if a == k]

    @property
    def neutral_rows(self) -> list[int]:
        return [r for r, a in zip(self.rows, self.assignment) if a == NEUTRAL]


def plan_replication(X: int, N: int, rows: Sequence[int] | None = None,
                     neutral: str = "high") -> ReplicationPlan:
    """Assign ``floor(N/X)`` copies of each operand and ``N mod X`` neutral rows.

    Neutral rows sit at the highest (``"high"``) or lowest (``"low"``)
    addresses of the set; operands are interleaved over the rest.
    """
    if X not in MAJ_X:
        raise ValueError(f"X must be one of {MAJ_X}")
    if N not in MAJ_N:
        raise ValueError(f"N must be one of {MAJ_N}")
    if N < X:
        raise ValueError(f"cannot fit MAJ{X} into {N} rows")
    rows = tuple(sorted(range(N) if rows is None else rows))
    if len(rows) != N or len(set(rows)) != N:
        raise ValueError("row list must hold N distinct rows")
    copies, nn = divmod(N, X)
    if neutral == "high":
        ops_idx = range(N - nn)
    elif neutral == "low":
        ops_idx = range(nn, N)
    else:
        raise ValueError("neutral placement must be 'high' or 'low'")
    assign = [NEUTRAL] * N
    for j, i in enumerate(ops_idx):
        assign[i] = j % X
    return ReplicationPlan(X, N, copies, nn, rows, tuple(assign))


def majority(bits: np.ndarray) -> np.ndarray:
    """Boolean majority along axis 0."""
    bits = np.asarray(bits)
    return (2 * bits.sum(axis=0) > bits.shape[0]).astype(np.uint8)


def frac_init(sub: Subarray, rows: Sequence[int]) -> Subarray:
    sub.frac(rows)
    return sub


@dataclass
class MajResult:
    value: np.ndarray
    reliable: np.ndarray
    rows: list[int]


def _bank_for(sub: Subarray, profile: DeviceProfile) -> Bank:
    return Bank(profile, params=sub.params, columns=sub.columns, subarrays={sub.index: sub})


def _run_apa(sub: Subarray, r_first: int, r_second: int, t1: float, t2: float,
             profile: DeviceProfile, environment=None) -> tuple[np.ndarray, np.ndarray]:
    """APA then a nominal PRE; returns the sensed bits and reliability."""
    bank = _bank_for(sub, profile)
    if environment is not None:
        sub.set_environment(*environment)
    g = lambda r: join_address(sub.index, r, profile)
    bank.execute(apa(g(r_first), g(r_second), t1, t2, profile))
    values, reliable = bank.state.sense_values.copy(), bank.state.sense_reliable.copy()
    bank.apply(pre(profile.tRP))
    return values, reliable


def maj_x(sub: Subarray, plan: ReplicationPlan, r_first: int, r_second: int,
          operands: np.ndarray, profile: DeviceProfile, t1: float = 1.5, t2: float = 3.0,
          environment=None) -> MajResult:
    """Write operand copies, Frac the neutral rows, fire APA, return sensed bits.

    ``operands`` is an X x columns bit matrix. Every activated row ends up
    holding the sensed value.
    """
    regime = classify_timing(t1, t2, profile)
    if (regime.activation_mode is not ActivationMode.SIMULTANEOUS_UNION
            or regime.sense_mode is not SenseMode.CHARGE_SHARING):
        raise ValueError(f"timing ({t1}, {t2}) gives {regime}, not charge-sharing union")
    rows = activation_set(r_first, r_second, profile)
    if tuple(rows) != plan.rows:
        raise ValueError("plan rows do not match the activation set of the pair")
    operands = np.asarray(operands, dtype=np.uint8)
    if operands.shape != (plan.X, sub.columns):
        raise ValueError(f"operands must be {plan.X} x {sub.columns}")
    idx = [i for i, a in enumerate(plan.assignment) if a != NEUTRAL]
    sub.write_rows([plan.rows[i] for i in idx], operands[[plan.assignment[i] for i in idx]])
    if plan.neutral_count:
        sub.frac(plan.neutral_rows)
    values, reliable = _run_apa(sub, r_first, r_second, t1, t2, profile, environment)
    return MajResult(values, reliable, rows)


@dataclass
class CopyResult:
    destinations: list[int]
    correct: np.ndarray      # destinations x columns
    source_bits: np.ndarray

    @property
    def success(self) -> bool:
        return bool(self.correct.all())


def multi_row_copy(sub: Subarray, source_row: int, r_second: int, profile: DeviceProfile,
                   t1: float | None = None, t2: float = 3.0, environment=None) -> CopyResult:
    """Copy the first-activated row into every other row of the APA set.

    Correctness is judged by nominally reading each destination back.
    """
    t1 = profile.tRAS if t1 is None else t1
    rows = activation_set(source_row, r_second, profile)
    dests = [r for r in rows if r != source_row]
    if source_row not in rows:
        raise ValueError("source row is not in the activation set")
    src_bits = (sub.charge[source_row] > 0.5).astype(np.uint8)
    _run_apa(sub, source_row, r_second, t1, t2, profile, environment)
    got, reliable = sub.read_rows(dests)
    return CopyResult(dests, (got == src_bits) & reliable, src_bits)


def row_clone(bank: Bank, src: int, dst: int, t2: float = 6.0) -> CopyResult:
    """Consecutive two-row activation; bank-level so cross-subarray pairs can be tried.

    Destination cells that do not read back as the source count as failures.
    """
    prof = bank.profile
    s_sub, s_loc = split_address(src, prof)
    d_sub, d_loc = split_address(dst, prof)
    src_sub = bank.subarray(s_sub)
    dst_sub = bank.subarray(d_sub)
    src_bits = (src_sub.charge[s_loc] > 0.5).astype(np.uint8)
    if src == dst:
        return CopyResult([dst], np.ones((1, src_sub.columns), dtype=bool), src_bits)
    bank.execute(apa(src, dst, prof.tRAS, t2, prof) + [pre(prof.tRP)])
    got, reliable = dst_sub.read_rows([d_loc])
    return CopyResult([dst], (got == src_bits) & reliable, src_bits)


@dataclass
class SuccessRateReport:
    stable: np.ndarray       # per cell
    fraction: float
    trials: int
    groups: list[float] | None = None

    @property
    def percent(self) -> float:
        return 100.0 * self.fraction


def success_rate(outcomes, group_axis: int | None = None) -> SuccessRateReport:
    """Stable cells over total cells; ``outcomes`` is trials x cells (bool).

    A cell is stable only if it was correct in every trial.
    """
    if isinstance(outcomes, (list, tuple)):
        lengths = {np.shape(o) for o in outcomes}
        if len(lengths) > 1:
            raise ValueError("ragged trial outcomes")
    arr = np.asarray(outcomes, dtype=bool)
    if arr.ndim < 2 or arr.shape[0] < 1:
        raise ValueError("outcomes must be trials x cells with at least one trial")
    stable = arr.all(axis=0)
    groups = None
    if group_axis is not None:
        axes = tuple(i for i in range(stable.ndim) if i != group_axis)
        groups = stable.mean(axis=axes).tolist() if axes else stable.astype(float).tolist()
    return SuccessRateReport(stable, float(stable.mean()), arr.shape[0], groups)
