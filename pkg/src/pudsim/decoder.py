"""Hierarchical row decoder with latched predecoders.

Each predecoder owns a contiguous slice of the local row address (lowest
field first). An ACT that arrives while a precharge is still in flight
latches its predecoded values on top of the previous ones, so every
predecoder can end up asserting two outputs. The local wordlines that fire
are the Cartesian product of the asserted outputs.
"""
from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np

from .profile import DeviceProfile

PredecodeVector = tuple[int, ...]
LatchState = tuple[frozenset[int], ...]


def split_address(row: int, profile: DeviceProfile) -> tuple[int, int]:
    """Bank row address -> (subarray index, local row)."""
    nsub = profile.rows_per_bank // profile.rows_per_subarray
    if not 0 <= row < nsub * profile.rows_per_subarray:
        raise ValueError(f"row {row} outside bank of {nsub * profile.rows_per_subarray} rows")
    return divmod(row, profile.rows_per_subarray)


def join_address(subarray: int, local: int, profile: DeviceProfile) -> int:
    return subarray * profile.rows_per_subarray + local


def predecode(local_row: int, profile: DeviceProfile) -> PredecodeVector:
    if not 0 <= local_row < profile.rows_per_subarray:
        raise ValueError(f"local row {local_row} outside subarray")
    out = []
    shift = 0
    for width in profile.decoder_partition:
        out.append((local_row >> shift) & ((1 << width) - 1))
        shift += width
    return tuple(out)


def latch_union(first: PredecodeVector, second: PredecodeVector) -> LatchState:
    if len(first) != len(second):
        raise ValueError("predecode vectors come from different decoders")
    return tuple(frozenset((a, b)) for a, b in zip(first, second))


def single_latch(vec: PredecodeVector) -> LatchState:
    return tuple(frozenset((v,)) for v in vec)


def expand_activation(latch: LatchState, profile: DeviceProfile) -> list[int]:
    """Local rows driven by a latch state, sorted ascending."""
    if len(latch) != len(profile.decoder_partition):
        raise ValueError("latch state does not match the decoder partition")
    return list(_expand(latch, profile.decoder_partition, profile.rows_per_subarray))


@lru_cache(maxsize=65536)
def _expand(latch: LatchState, partition: tuple[int, ...], nrows: int) -> tuple[int, ...]:
    offsets = np.cumsum((0,) + partition[:-1]).tolist()
    rows = (sum(v << off for v, off in zip(combo, offsets))
            for combo in itertools.product(*(sorted(s) for s in latch)))
    return tuple(sorted(r for r in rows if r < nrows))


def activation_set(r_first: int, r_second: int, profile: DeviceProfile) -> list[int]:
    """Local rows activated by an APA pair inside one subarray."""
    return expand_activation(latch_union(predecode(r_first, profile),
                                         predecode(r_second, profile)), profile)


def differing_fields(r_first: int, r_second: int, profile: DeviceProfile) -> int:
    return sum(a != b for a, b in zip(predecode(r_first, profile), predecode(r_second, profile)))


def activation_counts(profile: DeviceProfile) -> np.ndarray:
    """|activation set| for every local pair, as a rows x rows matrix.

    Vectorised over the whole subarray; power-of-two subarrays only.
    """
    n = profile.rows_per_subarray
    if n != profile.decoder_rows:
        raise ValueError("vectorised counts need a power-of-two subarray")
    r = np.arange(n)
    diff = np.zeros((n, n), dtype=np.int64)
    shift = 0
    for width in profile.decoder_partition:
        f = (r >> shift) & ((1 << width) - 1)
        diff += f[:, None] != f[None, :]
        shift += width
    return 1 << diff


def find_pair_for_count(profile: DeviceProfile, n: int, rng: np.random.Generator,
                        max_tries: int = 10000) -> tuple[int, int]:
    """Random (R_F, R_S) pair whose activation set has exactly ``n`` valid rows.

    Draws uniformly over qualifying ordered pairs: R_F uniform, the set of
    differing fields weighted by how many partners it admits, then uniform
    new values in those fields. Out-of-range partners (non-power-of-two
    subarrays) are redrawn.
    """
    k = n.bit_length() - 1
    nfields = len(profile.decoder_partition)
    if n < 1 or 1 << k != n or k > nfields:
        raise ValueError(f"{n}-row activation unreachable with {nfields} predecoders")
    widths = profile.decoder_partition
    offsets = np.cumsum((0,) + widths[:-1])
    subsets = list(itertools.combinations(range(nfields), k))
    weights = np.array([np.prod([(1 << widths[i]) - 1 for i in s]) for s in subsets], dtype=float)
    weights /= weights.sum()
    for _ in range(max_tries):
        first = int(rng.integers(profile.rows_per_subarray))
        f = predecode(first, profile)
        second = list(f)
        for i in subsets[int(rng.choice(len(subsets), p=weights))]:
            v = int(rng.integers((1 << widths[i]) - 1))
            second[i] = v if v < f[i] else v + 1
        r_s = sum(v << int(off) for v, off in zip(second, offsets))
        if r_s >= profile.rows_per_subarray:
            continue
        if len(activation_set(first, r_s, profile)) == n:
            return first, r_s
    raise ValueError(f"no {n}-row pair found in {max_tries} draws")
