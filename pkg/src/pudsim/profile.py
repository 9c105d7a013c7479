"""Device profiles and analog calibration parameters.

A profile bundles the geometry, DDR4 timing, decoder partition and the
analog defaults of one simulated chip family. Profiles are immutable; use
``dataclasses.replace`` (or :func:`with_analog`) to derive variants.
"""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping

import yaml

PROFILE_DIR_ENV = "PUDSIM_PROFILE_DIR"


@dataclass(frozen=True)
class AnalogParams:
    # charge sharing
    capacitance_ratio: float = 6.0       # C_bitline / C_cell(nominal)
    sensing_margin: float = 0.03         # fraction of Vdd
    sense_offset_sigma: float = 0.003    # static per-column SA offset at 0% variation
    offset_variation_gain: float = 0.07  # extra offset sigma per unit of variation
    noise_sigma: float = 0.002           # dynamic per-trial sense noise
    coupling: float = 0.15               # adjacent-bitline coupling during sensing
    # process variation
    variation_pct: float = 10.0
    variation_dist: str = "uniform"      # "uniform" or "normal"
    frac_variation_gain: float = 1.5     # spread of Frac charge relative to cell spread
    # timing-dependent behaviour
    first_row_slope: float = 0.5         # extra R_F weight per ns of t1+t2 above 3ns
    first_row_cap: float = 4.0
    underdrive_pmax: float = 0.25        # connect-failure probability at t1+t2 = 3ns
    underdrive_exponent: float = 3.0
    sa_drive_ratio: float = 20.0         # SA drive strength relative to C_bitline
    # write path
    write_drive: float = 1.3
    writeback_load: float = 0.001        # fidelity loss per extra activated row
    # environment
    temperature_slope: float = 0.0005    # efficiency gain per degree C above 50
    vpp_slope: float = 0.02              # efficiency loss per volt below 2.5
    efficiency_scale: float = 1.0        # set by apply_environment
    mfrM_bias: float = 0.0               # signed fixed sense bias (+ toward one)

    def __post_init__(self) -> None:
        if self.capacitance_ratio <= 0:
            raise ValueError("capacitance_ratio must be positive")
        if not 0 < self.sensing_margin < 0.5:
            raise ValueError("sensing_margin must lie in (0, 0.5)")
        if not 0 <= self.underdrive_pmax <= 1:
            raise ValueError("underdrive_pmax must lie in [0, 1]")
        if self.variation_pct < 0 or self.variation_pct >= 100:
            raise ValueError("variation_pct must lie in [0, 100)")
        if self.variation_dist not in ("uniform", "normal"):
            raise ValueError(f"unknown variation_dist {self.variation_dist!r}")
        for name in ("sense_offset_sigma", "offset_variation_gain", "noise_sigma",
                     "coupling", "frac_variation_gain", "first_row_slope",
                     "sa_drive_ratio", "writeback_load", "efficiency_scale"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.first_row_cap < 1:
            raise ValueError("first_row_cap must be >= 1")

    @property
    def offset_sigma(self) -> float:
        """Static sense offset spread, widened by process variation."""
        return self.sense_offset_sigma + self.offset_variation_gain * self.variation_pct / 100.0

    @classmethod
    def ideal(cls, **overrides: Any) -> "AnalogParams":
        """No variation, no offset, no noise, no coupling, equal weights."""
        base = dict(variation_pct=0.0, sense_offset_sigma=0.0, offset_variation_gain=0.0,
                    noise_sigma=0.0, coupling=0.0, first_row_slope=0.0,
                    underdrive_pmax=0.0, writeback_load=0.0)
        base.update(overrides)
        return cls(**base)


@dataclass(frozen=True)
class DeviceProfile:
    name: str
    rows_per_subarray: int
    subarrays_per_bank: int
    decoder_partition: tuple[int, ...]
    rows_per_bank: int = 1 << 16
    columns: int = 65536
    tRAS: float = 36.0
    tRP: float = 15.0
    tRCD: float = 15.0
    tWR: float = 15.0
    tCCD: float = 5.0
    burst_bits: int = 512
    command_granularity: float = 1.5
    union_threshold: float = 3.0         # t2 at or below -> simultaneous union
    charge_sharing_threshold: float = 3.0  # t1 at or below -> no SA latching
    reject_cross_subarray: bool = False
    manufacturer: str = "H"
    analog: AnalogParams = field(default_factory=AnalogParams)

    def __post_init__(self) -> None:
        object.__setattr__(self, "decoder_partition", tuple(int(w) for w in self.decoder_partition))
        if self.rows_per_subarray < 1 or self.subarrays_per_bank < 1:
            raise ValueError("subarray geometry must be positive")
        if self.rows_per_subarray * self.subarrays_per_bank > self.rows_per_bank:
            raise ValueError("subarrays do not fit in the bank")
        if any(w < 1 for w in self.decoder_partition):
            raise ValueError("decoder field widths must be >= 1")
        if 1 << self.decoder_bits < self.rows_per_subarray:
            raise ValueError("decoder partition cannot address every row")
        if _is_pow2(self.rows_per_subarray) and 1 << self.decoder_bits != self.rows_per_subarray:
            raise ValueError("decoder partition must cover exactly log2(rows_per_subarray) bits")
        if self.command_granularity <= 0:
            raise ValueError("command_granularity must be positive")
        if not self.tRAS > self.tRP > 0:
            raise ValueError("timing must satisfy tRAS > tRP > 0")
        if self.manufacturer not in ("H", "M"):
            raise ValueError("manufacturer must be 'H' or 'M'")

    @property
    def decoder_bits(self) -> int:
        return sum(self.decoder_partition)

    @property
    def decoder_rows(self) -> int:
        return 1 << self.decoder_bits

    def with_analog(self, **overrides: Any) -> "DeviceProfile":
        return replace(self, analog=replace(self.analog, **overrides))

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["decoder_partition"] = list(self.decoder_partition)
        return d


def _is_pow2(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


PRESETS: dict[str, DeviceProfile] = {
    "mfrH-512": DeviceProfile("mfrH-512", 512, 128, (1, 2, 2, 2, 2), manufacturer="H"),
    # 640-row subarrays reuse a 10-bit decoder; addresses >= 640 are invalid
    "mfrH-640": DeviceProfile("mfrH-640", 640, 102, (2, 2, 2, 2, 2), manufacturer="H"),
    "mfrM-1024": DeviceProfile("mfrM-1024", 1024, 128, (2, 2, 2, 2, 2), rows_per_bank=1 << 17,
                               manufacturer="M", analog=AnalogParams(mfrM_bias=-0.004)),
    # 8-row toy decoder for walk-throughs
    "demo-8": DeviceProfile("demo-8", 8, 1, (1, 2), rows_per_bank=8, columns=8),
}


def get_profile(name: str) -> DeviceProfile:
    """Look up a preset, then ``<name>.yaml``/``.json`` in the profile directory."""
    if name in PRESETS:
        return PRESETS[name]
    directory = os.environ.get(PROFILE_DIR_ENV)
    if directory:
        for ext in (".yaml", ".yml", ".json"):
            path = Path(directory) / f"{name}{ext}"
            if path.exists():
                return load_profile(path)
    raise KeyError(f"unknown profile {name!r}")


def profile_from_dict(data: Mapping[str, Any]) -> DeviceProfile:
    data = dict(data)
    base_name = data.pop("base", None)
    analog = data.pop("analog", None) or {}
    known_a = {f.name for f in fields(AnalogParams)}
    bad = set(analog) - known_a
    if bad:
        raise ValueError(f"unknown analog fields: {sorted(bad)}")
    known_p = {f.name for f in fields(DeviceProfile)} - {"analog"}
    bad = set(data) - known_p
    if bad:
        raise ValueError(f"unknown profile fields: {sorted(bad)}")
    if base_name is not None:
        base = get_profile(base_name)
        prof = replace(base, **data)
        return replace(prof, analog=replace(base.analog, **analog))
    return DeviceProfile(**data, analog=AnalogParams(**analog))


def load_profile(path: str | os.PathLike) -> DeviceProfile:
    path = Path(path)
    text = path.read_text()
    data = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    if not isinstance(data, dict):
        raise ValueError(f"{path}: profile must be a mapping")
    data.setdefault("name", path.stem)
    return profile_from_dict(data)
