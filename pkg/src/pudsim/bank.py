"""Bank state machine, subarray cell state and timing classification.

Commands carry the delay until the next command, so the effect of an ACT
is only known once the following command arrives. The machine therefore
keeps the first ACT pending and resolves it when a nominal command, a
nominal PRE, or an interrupting ACT (the APA pattern) shows up.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import analog
from .decoder import (LatchState, expand_activation, join_address, latch_union,
                      predecode, single_latch, split_address)
from .profile import AnalogParams, DeviceProfile

FIXED_PATTERNS = {
    "0x00/0xFF": 0x00,
    "0xAA/0x55": 0xAA,
    "0xCC/0x33": 0xCC,
    "0x66/0x99": 0x66,
}
SOLID_PATTERNS = {"all0": 0, "all1": 1}
PATTERN_NAMES = tuple(FIXED_PATTERNS) + ("random",) + tuple(SOLID_PATTERNS)


class ActivationMode(enum.Enum):
    NOMINAL = "Nominal"
    CONSECUTIVE_TWO_ROW = "ConsecutiveTwoRow"
    SIMULTANEOUS_UNION = "SimultaneousUnion"


class SenseMode(enum.Enum):
    FULLY_LATCHED = "FullyLatched"
    CHARGE_SHARING = "ChargeSharing"
    UNDERDRIVEN = "Underdriven"


@dataclass(frozen=True)
class TimingRegime:
    activation_mode: ActivationMode
    sense_mode: SenseMode

    def __str__(self) -> str:
        return f"({self.activation_mode.value}, {self.sense_mode.value})"


def classify_timing(t1: float, t2: float, profile: DeviceProfile) -> TimingRegime:
    eps = 1e-9
    if t2 <= profile.union_threshold + eps:
        act = ActivationMode.SIMULTANEOUS_UNION
    elif t2 < profile.tRP - eps:
        act = ActivationMode.CONSECUTIVE_TWO_ROW
    else:
        act = ActivationMode.NOMINAL
    if t1 >= profile.tRAS - eps:
        sense = SenseMode.FULLY_LATCHED
    elif t1 <= profile.charge_sharing_threshold + eps:
        sense = SenseMode.CHARGE_SHARING
    else:
        sense = SenseMode.UNDERDRIVEN
    return TimingRegime(act, sense)


# ---------------------------------------------------------------- data patterns

def byte_row(byte: int, columns: int) -> np.ndarray:
    bits = np.unpackbits(np.array([byte], dtype=np.uint8))
    return np.resize(bits, columns)


def pattern_matrix(pattern, rows: int, columns: int, rng: np.random.Generator) -> np.ndarray:
    """Bit matrix for a named pattern or a validated explicit matrix.

    Fixed byte patterns alternate the byte and its complement row by row.
    """
    if isinstance(pattern, str):
        if pattern in FIXED_PATTERNS:
            b = byte_row(FIXED_PATTERNS[pattern], columns)
            out = np.empty((rows, columns), dtype=np.uint8)
            out[0::2] = b
            out[1::2] = 1 - b
            return out
        if pattern in SOLID_PATTERNS:
            return np.full((rows, columns), SOLID_PATTERNS[pattern], dtype=np.uint8)
        if pattern == "random":
            return rng.integers(0, 2, (rows, columns), dtype=np.uint8)
        raise ValueError(f"unknown data pattern {pattern!r}")
    m = np.asarray(pattern)
    if m.shape != (rows, columns):
        raise ValueError(f"pattern matrix shape {m.shape} != {(rows, columns)}")
    if not np.isin(m, (0, 1)).all():
        raise ValueError("pattern matrix must hold bits")
    return m.astype(np.uint8)


# ---------------------------------------------------------------- subarray

class Subarray:
    """Cell charges and frozen per-cell variation for one subarray.

    ``columns`` may be smaller than the profile's row width; experiments
    typically simulate a column sample.
    """

    def __init__(self, profile: DeviceProfile, seed, columns: int | None = None,
                 params: AnalogParams | None = None, index: int = 0):
        self.profile = profile
        self.params = params or profile.analog
        self.index = index
        self.columns = columns or profile.columns
        self.rows = profile.rows_per_subarray
        ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        var_ss, noise_ss, pattern_ss = ss.spawn(3)
        vr = np.random.default_rng(var_ss)
        shape = (self.rows, self.columns)
        self.capacitance, self.efficiency = analog.sample_variation(self.params, vr, shape)
        self.connect_u = vr.random(shape)
        self.offset = (vr.normal(0.0, self.params.offset_sigma, self.columns)
                       if self.params.offset_sigma > 0 else np.zeros(self.columns))
        self.charge = np.zeros(shape)
        self.rng = np.random.default_rng(noise_ss)
        self.pattern_rng = np.random.default_rng(pattern_ss)
        self.efficiency_scale = 1.0

    def set_environment(self, temperature: float = 50.0, vpp: float = 2.5) -> None:
        self.efficiency_scale = analog.environment_scale(self.params, temperature, vpp)

    def eff(self, rows) -> np.ndarray:
        return np.clip(self.efficiency[rows] * self.efficiency_scale, 0.0, 1.0)

    def fill(self, bits: np.ndarray) -> None:
        self.charge[:] = bits

    def write_rows(self, rows: Sequence[int], bits, n_active: int | None = None,
                   mask: np.ndarray | None = None) -> None:
        """Drive ``bits`` into the rows' cells through the write/restore path."""
        rows = list(rows)
        fid = analog.writeback_fidelity(self.params, self.eff(rows), n_active or 1)
        if mask is not None:
            fid = fid * mask
        target = np.broadcast_to(np.asarray(bits, dtype=float), (len(rows), self.columns))
        q = self.charge[rows]
        self.charge[rows] = q + (target - q) * fid

    def frac(self, rows: Sequence[int]) -> None:
        rows = list(rows)
        if self.profile.manufacturer == "M" and self.params.mfrM_bias != 0:
            # neutral rows hold the polarity opposite to the sense bias
            self.charge[rows] = 0.0 if self.params.mfrM_bias > 0 else 1.0
        else:
            self.charge[rows] = analog.sample_frac_charge(self.params, self.rng, (len(rows), self.columns))

    def sense_rows(self, rows: Sequence[int], weights=None, extra_charge=None,
                   extra_capacitance=None, mask: np.ndarray | None = None) -> analog.SenseOutcome:
        rows = list(rows)
        w = np.ones((len(rows), 1)) if weights is None else np.asarray(weights, dtype=float)[:, None]
        eff = self.eff(rows)
        if mask is not None:
            eff = eff * mask
        pert = analog.charge_share(self.charge[rows], self.capacitance[rows], eff, w, self.params,
                                   extra_charge, extra_capacitance)
        pert = analog.couple(pert, self.params)
        return analog.sense(pert, self.params, self.rng, offset=self.offset)

    def read_rows(self, rows: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
        """Nominal ACT/RD/PRE of each row in turn: (bits, reliable), restoring each row."""
        rows = list(rows)
        eff = self.eff(rows)
        c = self.capacitance[rows] * eff
        cb = self.params.capacitance_ratio
        pert = (cb * 0.5 + c * self.charge[rows]) / (cb + c) - 0.5
        pert = analog.couple(pert, self.params)
        out = analog.sense(pert, self.params, self.rng, offset=self.offset[None, :])
        self.write_rows(rows, out.value)
        return out.value, out.reliable


def init_subarray(profile: DeviceProfile, pattern, seed, columns: int | None = None,
                  params: AnalogParams | None = None, index: int = 0) -> Subarray:
    sub = Subarray(profile, seed, columns, params, index)
    sub.fill(pattern_matrix(pattern, sub.rows, sub.columns, sub.pattern_rng))
    return sub


# ---------------------------------------------------------------- commands

class CommandKind(enum.Enum):
    ACT = "ACT"
    PRE = "PRE"
    WR = "WR"
    RD = "RD"
    REF = "REF"


@dataclass(frozen=True)
class Command:
    kind: CommandKind
    delay_after: float
    row: int | None = None
    data: np.ndarray | None = field(default=None, compare=False)

    def __str__(self) -> str:
        arg = f" {self.row}" if self.row is not None else ""
        return f"{self.kind.value}{arg} +{self.delay_after:g}ns"


def act(row: int, delay: float) -> Command:
    return Command(CommandKind.ACT, delay, row=row)


def pre(delay: float) -> Command:
    return Command(CommandKind.PRE, delay)


def wr(data, delay: float) -> Command:
    return Command(CommandKind.WR, delay, data=np.asarray(data, dtype=np.uint8))


def rd(delay: float) -> Command:
    return Command(CommandKind.RD, delay)


def ref(delay: float) -> Command:
    return Command(CommandKind.REF, delay)


def apa(r_first: int, r_second: int, t1: float, t2: float, profile: DeviceProfile,
        hold: float | None = None) -> list[Command]:
    """ACT R_F, wait t1, PRE, wait t2, ACT R_S (held for ``hold``, default tRAS)."""
    return [act(r_first, t1), pre(t2), act(r_second, profile.tRAS if hold is None else hold)]


def nominal_write(row: int, data, profile: DeviceProfile) -> list[Command]:
    return [act(row, profile.tRCD), wr(data, profile.tRAS), pre(profile.tRP)]


def nominal_read(row: int, profile: DeviceProfile) -> list[Command]:
    return [act(row, profile.tRCD), rd(profile.tRAS), pre(profile.tRP)]


class Phase(enum.Enum):
    PRECHARGED = "Precharged"
    SENSING = "Sensing"
    ACTIVATED = "Activated"


class CommandError(RuntimeError):
    """Illegal command for the bank's current phase."""


@dataclass
class BankState:
    phase: Phase = Phase.PRECHARGED
    subarray: int | None = None
    activated_rows: frozenset[int] = frozenset()   # local rows of ``subarray``
    latch: LatchState | None = None
    sense_values: np.ndarray | None = None
    sense_reliable: np.ndarray | None = None
    connected: np.ndarray | None = None            # per activated row x column
    first_row: int | None = None
    act_time: float = 0.0
    pre_time: float | None = None
    pending_t2: float | None = None
    elapsed: float = 0.0

    @property
    def bank_rows(self) -> list[int]:
        return sorted(self.activated_rows)


@dataclass
class Event:
    index: int
    time: float
    command: str
    subarray: int | None = None
    rows: list[int] | None = None
    regime: TimingRegime | None = None
    t1: float | None = None
    t2: float | None = None
    data: np.ndarray | None = None
    reliable_fraction: float | None = None

    def to_dict(self) -> dict:
        d = {"index": self.index, "time_ns": round(self.time, 6), "command": self.command}
        if self.subarray is not None:
            d["subarray"] = self.subarray
        if self.rows is not None:
            d["rows"] = list(self.rows)
        if self.regime is not None:
            d["activation_mode"] = self.regime.activation_mode.value
            d["sense_mode"] = self.regime.sense_mode.value
            d["t1"], d["t2"] = self.t1, self.t2
        if self.data is not None:
            d["data"] = "".join(map(str, self.data[:64].tolist()))
        if self.reliable_fraction is not None:
            d["reliable_fraction"] = round(self.reliable_fraction, 6)
        return d


@dataclass
class TraceResult:
    state: BankState
    events: list[Event]


class Bank:
    """One bank: a state machine over lazily created subarrays."""

    def __init__(self, profile: DeviceProfile, seed: int = 0, pattern="all0",
                 columns: int | None = None, params: AnalogParams | None = None,
                 temperature: float = 50.0, vpp: float = 2.5,
                 subarrays: dict[int, Subarray] | None = None):
        self.profile = profile
        self.params = params or profile.analog
        self.seed = seed
        self.pattern = pattern
        self.columns = columns or profile.columns
        self.temperature = temperature
        self.vpp = vpp
        # supplied subarrays keep their own environment setting
        self.subarrays: dict[int, Subarray] = dict(subarrays or {})
        self.state = BankState()
        self._count = 0

    def subarray(self, index: int) -> Subarray:
        if index not in self.subarrays:
            ss = np.random.SeedSequence([self.seed, index])
            sub = init_subarray(self.profile, self.pattern, ss, self.columns, self.params, index)
            sub.set_environment(self.temperature, self.vpp)
            self.subarrays[index] = sub
        return self.subarrays[index]

    # -- helpers
    def _check_delay(self, cmd: Command) -> None:
        g = self.profile.command_granularity
        k = cmd.delay_after / g
        if cmd.delay_after <= 0 or abs(k - round(k)) > 1e-6:
            raise ValueError(f"{cmd}: delay must be a positive multiple of {g}ns")

    def _resolve_first(self) -> None:
        """Single-row sense and restore of a pending ACT."""
        st = self.state
        if st.phase is not Phase.SENSING:
            return
        sub = self.subarrays[st.subarray]
        row = st.first_row
        out = sub.sense_rows([row])
        sub.write_rows([row], out.value)
        st.sense_values, st.sense_reliable = out.value, out.reliable
        st.phase = Phase.ACTIVATED

    def _close(self) -> None:
        self.state = BankState(elapsed=self.state.elapsed)

    def _open(self, sub_idx: int, local: int) -> None:
        st = self.state
        self.subarray(sub_idx)
        st.phase = Phase.SENSING
        st.subarray = sub_idx
        st.first_row = local
        st.latch = single_latch(predecode(local, self.profile))
        st.activated_rows = frozenset({local})
        st.connected = None
        st.act_time = st.elapsed
        st.pre_time = None
        st.pending_t2 = None

    def _interrupting_act(self, local: int, ev: Event) -> None:
        st, prof = self.state, self.profile
        t1 = st.pre_time - st.act_time
        t2 = st.pending_t2
        regime = classify_timing(t1, t2, prof)
        ev.regime, ev.t1, ev.t2 = regime, t1, t2
        sub = self.subarrays[st.subarray]
        first = st.first_row
        if regime.activation_mode is ActivationMode.SIMULTANEOUS_UNION:
            latch = tuple(a | b for a, b in zip(st.latch, latch_union(predecode(first, prof),
                                                                       predecode(local, prof))))
            rows = expand_activation(latch, prof)
        else:
            latch = single_latch(predecode(local, prof))
            rows = sorted({first, local})
        others = [r for r in rows if r != first]
        order = [first] + others
        n = len(rows)
        p_fail = analog.underdrive_probability(self.params, t1 + t2)
        mask = np.ones((n, sub.columns))
        if p_fail > 0 and others:
            mask[1:] = sub.connect_u[others] >= p_fail

        latched = st.phase is Phase.ACTIVATED or regime.sense_mode is SenseMode.FULLY_LATCHED
        if latched:
            self._resolve_first()
            values, reliable = st.sense_values, st.sense_reliable
        else:
            weights = np.ones(n)
            weights[0] = analog.first_row_weight(self.params, t1 + t2)
            extra_c = extra_q = None
            if regime.sense_mode is SenseMode.UNDERDRIVEN:
                pre_out = sub.sense_rows([first])
                drive = min(1.0, t1 / prof.tRAS)
                extra_c = drive * self.params.sa_drive_ratio * self.params.capacitance_ratio
                extra_q = pre_out.value.astype(float)
            out = sub.sense_rows(order, weights, extra_q, extra_c, mask=mask)
            values, reliable = out.value, out.reliable
        sub.write_rows(order, values, n_active=n, mask=mask)
        if regime.activation_mode is ActivationMode.SIMULTANEOUS_UNION:
            st.latch = latch
            st.activated_rows = frozenset(rows)
            st.connected = mask[np.argsort(order)]
        else:
            st.latch = latch
            st.activated_rows = frozenset({local})
            st.connected = mask[[order.index(local)]]
        st.sense_values, st.sense_reliable = values, reliable
        st.phase = Phase.ACTIVATED
        st.pre_time = None
        st.pending_t2 = None
        ev.rows = [join_address(st.subarray, r, prof) for r in sorted(st.activated_rows)]
        ev.reliable_fraction = float(np.mean(reliable))

    # -- the machine
    def apply(self, cmd: Command) -> Event:
        self._check_delay(cmd)
        st, prof = self.state, self.profile
        ev = Event(self._count, st.elapsed, str(cmd))
        self._count += 1
        kind = cmd.kind
        if kind is CommandKind.ACT:
            sub_idx, local = split_address(cmd.row, prof)
            if st.phase is Phase.PRECHARGED:
                self._open(sub_idx, local)
            elif st.pending_t2 is None:
                raise CommandError("ACT to a bank with an open row")
            elif sub_idx != st.subarray:
                if prof.reject_cross_subarray:
                    raise CommandError("APA across subarrays")
                self._resolve_first()
                self._close()
                self._open(sub_idx, local)
            else:
                self._interrupting_act(local, ev)
            ev.subarray = self.state.subarray
            if ev.rows is None:
                ev.rows = [join_address(sub_idx, local, prof)]
        elif kind is CommandKind.PRE:
            if st.phase is not Phase.PRECHARGED:
                if st.pending_t2 is not None:
                    raise CommandError("PRE while a precharge is in flight")
                if cmd.delay_after >= prof.tRP - 1e-9:
                    self._resolve_first()
                    self._close()
                else:
                    st.pre_time = st.elapsed
                    st.pending_t2 = cmd.delay_after
        elif kind in (CommandKind.WR, CommandKind.RD):
            if st.phase is Phase.PRECHARGED:
                raise CommandError(f"{kind.value} to a precharged bank")
            if st.pending_t2 is not None:
                raise CommandError(f"{kind.value} while the bank is precharging")
            self._resolve_first()
            sub = self.subarrays[st.subarray]
            ev.subarray = st.subarray
            if kind is CommandKind.WR:
                data = np.resize(np.asarray(cmd.data, dtype=np.uint8), sub.columns)
                rows = st.bank_rows
                mask = st.connected if st.connected is not None and len(st.connected) == len(rows) else None
                sub.write_rows(rows, data, n_active=len(rows), mask=mask)
                st.sense_values = data.copy()
                st.sense_reliable = np.ones(sub.columns, dtype=bool)
            ev.data = st.sense_values.copy()
            ev.rows = [join_address(st.subarray, r, prof) for r in st.bank_rows]
        elif kind is CommandKind.REF:
            if st.phase is not Phase.PRECHARGED:
                raise CommandError("REF while a row is open")
        st = self.state
        st.elapsed += cmd.delay_after
        return ev

    def execute(self, seq: Iterable[Command]) -> TraceResult:
        events = [self.apply(c) for c in seq]
        return TraceResult(self.state, events)


def apply_command(bank: Bank, cmd: Command) -> Event:
    return bank.apply(cmd)


def execute_sequence(bank: Bank, seq: Iterable[Command]) -> TraceResult:
    return bank.execute(seq)
