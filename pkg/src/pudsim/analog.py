"""Bitline charge sharing, sense amplification and process variation.

Voltages are fractions of Vdd; bitlines precharge to 0.5. All functions
are vectorised: the first axis of cell arrays runs over the cells sharing
one bitline and the trailing axes over independent bitlines.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .profile import AnalogParams

TEMPERATURE_RANGE = (50.0, 90.0)
VPP_RANGE = (2.1, 2.5)


@dataclass
class SenseOutcome:
    value: np.ndarray     # uint8 bits
    reliable: np.ndarray  # bool
    adjusted: np.ndarray  # perturbation after offset, bias and noise


def charge_share(charges, capacitances, efficiencies, weights, params: AnalogParams,
                 extra_charge=None, extra_capacitance=None) -> np.ndarray:
    """Bitline perturbation after the listed cells share charge with it.

    The effective capacitance of cell i is ``w_i * e_i * C_i``; the bitline
    contributes ``ratio * 1.0`` at 0.5 Vdd. ``extra_*`` lets a partially
    driven sense amplifier join the divider as one more source.
    """
    q = np.asarray(charges, dtype=float)
    if q.shape[0] == 0:
        raise ValueError("charge sharing needs at least one cell")
    c = (np.asarray(weights, dtype=float) * np.asarray(efficiencies, dtype=float)
         * np.asarray(capacitances, dtype=float))
    c = np.broadcast_to(c, q.shape)
    cb = params.capacitance_ratio
    num = cb * 0.5 + (c * q).sum(axis=0)
    den = cb + c.sum(axis=0)
    if extra_capacitance is not None:
        num = num + np.asarray(extra_capacitance) * np.asarray(extra_charge)
        den = den + np.asarray(extra_capacitance)
    return num / den - 0.5


def couple(perturbation: np.ndarray, params: AnalogParams) -> np.ndarray:
    """Adjacent-bitline coupling along the last axis.

    A bitline is pulled away from neighbours whose swing exceeds its own.
    Uniform neighbourhoods (including mirrored ones) are unaffected.
    """
    if params.coupling == 0 or perturbation.shape[-1] < 2:
        return perturbation
    mag = np.abs(perturbation)
    pad = np.pad(mag, [(0, 0)] * (mag.ndim - 1) + [(1, 1)], mode="edge")
    excess = np.maximum(pad[..., :-2] - mag, 0) + np.maximum(pad[..., 2:] - mag, 0)
    return perturbation - np.sign(perturbation) * params.coupling * excess


def sense(perturbation, params: AnalogParams, rng: np.random.Generator | None = None,
          offset=None) -> SenseOutcome:
    """Resolve bitlines to bits.

    ``offset`` is the static per-column offset (sampled from the params when
    omitted and an rng is given); dynamic noise is added when an rng is given.
    """
    p = np.asarray(perturbation, dtype=float)
    adjusted = p + params.mfrM_bias
    if offset is None and rng is not None and params.offset_sigma > 0:
        offset = rng.normal(0.0, params.offset_sigma, p.shape)
    if offset is not None:
        adjusted = adjusted - offset
    if rng is not None and params.noise_sigma > 0:
        adjusted = adjusted + rng.normal(0.0, params.noise_sigma, p.shape)
    value = adjusted > 0
    if params.mfrM_bias > 0:
        value |= adjusted == 0
    return SenseOutcome(value.astype(np.uint8), np.abs(adjusted) >= params.sensing_margin,
                        np.asarray(adjusted))


def _spread(params: AnalogParams, rng: np.random.Generator, shape) -> np.ndarray:
    """Zero-mean relative deviation with the configured distribution."""
    p = params.variation_pct / 100.0
    if p == 0:
        return np.zeros(shape)
    if params.variation_dist == "uniform":
        return rng.uniform(-p, p, shape)
    return np.clip(rng.normal(0.0, p / np.sqrt(3.0), shape), -0.95, 0.95)


def sample_variation(params: AnalogParams, rng: np.random.Generator, shape=()) -> tuple[np.ndarray, np.ndarray]:
    """Per-cell (capacitance, transfer efficiency)."""
    cap = 1.0 + _spread(params, rng, shape)
    eff = np.clip(1.0 + _spread(params, rng, shape), 0.0, 1.0)
    return cap, eff


def sample_frac_charge(params: AnalogParams, rng: np.random.Generator, shape=()) -> np.ndarray:
    """Charge left in a cell after Frac; nominally 0.5."""
    dev = _spread(params, rng, shape) * 0.5 * params.frac_variation_gain
    return np.clip(0.5 + dev, 0.0, 1.0)


def first_row_weight(params: AnalogParams, t_sum: float) -> float:
    """Charge-share multiplier of the first-activated row."""
    return min(params.first_row_cap, 1.0 + params.first_row_slope * max(0.0, t_sum - 3.0))


def underdrive_probability(params: AnalogParams, t_sum: float) -> float:
    """Per-cell probability of failing to connect when t1 + t2 < 6ns."""
    if t_sum >= 6.0:
        return 0.0
    return min(1.0, params.underdrive_pmax * ((6.0 - t_sum) / 3.0) ** params.underdrive_exponent)


def environment_scale(params: AnalogParams, temperature: float, vpp: float) -> float:
    lo, hi = TEMPERATURE_RANGE
    if not lo <= temperature <= hi:
        raise ValueError(f"temperature {temperature} outside tested range {TEMPERATURE_RANGE}")
    lo, hi = VPP_RANGE
    if not lo - 1e-9 <= vpp <= hi + 1e-9:
        raise ValueError(f"vpp {vpp} outside tested range {VPP_RANGE}")
    return ((1.0 + params.temperature_slope * (temperature - 50.0))
            * (1.0 - params.vpp_slope * (2.5 - vpp)))


def apply_environment(params: AnalogParams, temperature: float = 50.0, vpp: float = 2.5,
                      t1: float | None = None, t2: float | None = None) -> tuple[AnalogParams, float]:
    """Return params with the environment folded in, plus the connect-failure probability."""
    scaled = replace(params, efficiency_scale=environment_scale(params, temperature, vpp))
    p_fail = 0.0 if t1 is None or t2 is None else underdrive_probability(params, t1 + t2)
    return scaled, p_fail


def writeback_fidelity(params: AnalogParams, efficiency, n_rows: int) -> np.ndarray:
    """Fraction of the gap to the driven level closed by a restore or write."""
    drive = np.clip(np.asarray(efficiency) * params.write_drive, 0.0, 1.0)
    return drive / (1.0 + params.writeback_load * (n_rows - 1))


@dataclass
class MonteCarloResult:
    success: float
    mean_abs_perturbation: float
    perturbations: np.ndarray


def monte_carlo_success(charges: Sequence[float], expected: int, params: AnalogParams,
                        trials: int, rng: np.random.Generator | np.random.SeedSequence | int,
                        weights: Sequence[float] | None = None, chunk: int = 2000,
                        jobs: int = 1) -> MonteCarloResult:
    """Success of one bitline configuration over independent variation draws.

    Each trial samples fresh cell variation, Frac charge for cells whose
    nominal charge is 0.5, and a sense offset. A trial succeeds when the
    sensed bit is the expected one and the margin is met. Trials are split
    into chunks with spawned seeds so any ``jobs`` value gives the same result.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    q0 = np.asarray(charges, dtype=float)
    w = np.ones_like(q0) if weights is None else np.asarray(weights, dtype=float)
    if isinstance(rng, np.random.Generator):
        seq = rng.bit_generator.seed_seq
    elif isinstance(rng, np.random.SeedSequence):
        seq = rng
    else:
        seq = np.random.SeedSequence(rng)
    sizes = [min(chunk, trials - i) for i in range(0, trials, chunk)]
    seeds = seq.spawn(len(sizes))

    def run(args):
        size, s = args
        g = np.random.default_rng(s)
        shape = (len(q0), size)
        cap, eff = sample_variation(params, g, shape)
        eff = np.clip(eff * params.efficiency_scale, 0.0, 1.0)
        q = np.broadcast_to(q0[:, None], shape).copy()
        neutral = q0 == 0.5
        if neutral.any():
            q[neutral] = sample_frac_charge(params, g, (int(neutral.sum()), size))
        pert = charge_share(q, cap, eff, w[:, None], params)
        out = sense(pert, params, g)
        ok = (out.value == expected) & out.reliable
        return ok, pert

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as ex:
            parts = list(ex.map(run, zip(sizes, seeds)))
    else:
        parts = [run(a) for a in zip(sizes, seeds)]
    ok = np.concatenate([p[0] for p in parts])
    pert = np.concatenate([p[1] for p in parts])
    return MonteCarloResult(float(ok.mean()), float(np.abs(pert).mean()), pert)
