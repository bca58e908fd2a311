"""Batched Monte Carlo driver.

Samples are processed in fixed-size chunks; sample ``i`` always draws its
noise from ``RngStream(seed, i)``, and chunk boundaries do not depend on the
worker count, so every result is a deterministic function of
(configuration, seed).
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import PreconditionError
from .noise import PATH, NoiseSpectrum, RngStream
from .scheme import Discretization, diverged_rows

DEFAULT_CHUNK = 256
# fine steps of noise drawn per sample per refill
NOISE_BLOCK = 64


@dataclass
class Level:
    """A coarser resolution driven by folded fine-path increments."""

    disc: Discretization
    ratio: int


class NoiseSource:
    """Standard normals for a chunk of samples, one Philox stream per sample."""

    def __init__(self, seed: int, sample_ids, n_modes: int, block: int = NOISE_BLOCK):
        self.streams = [RngStream(seed, int(i), PATH) for i in sample_ids]
        self.n_modes = n_modes
        self.block = block
        self._buf = None
        self._pos = 0

    def next(self) -> np.ndarray:
        if self._buf is None or self._pos == self._buf.shape[0]:
            draws = [s.normal((self.block, self.n_modes)) for s in self.streams]
            self._buf = np.stack(draws, axis=1)
            self._pos = 0
        z = self._buf[self._pos]
        self._pos += 1
        return z


@dataclass
class BatchResult:
    final: np.ndarray
    level_finals: list = field(default_factory=list)
    records: Optional[np.ndarray] = None
    record_times: Optional[np.ndarray] = None
    level_records: list = field(default_factory=list)
    blowup_step: Optional[np.ndarray] = None


def run_batch(
    disc: Discretization,
    n_steps: int,
    u0: np.ndarray,
    spectrum: NoiseSpectrum,
    seed: int,
    sample_ids: Sequence[int],
    levels: Sequence[Level] = (),
    record: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    save_stride: int = 1,
    record_levels: bool = False,
    backend=None,
) -> BatchResult:
    """Advance one chunk of samples ``n_steps`` fine steps.

    ``u0`` is a coefficient vector or a ``(B, N)`` array of per-sample
    initial states. Each level steps once every ``ratio`` fine steps using
    the first ``level.disc.n_modes`` modes of the folded fine increments.
    ``record`` maps a ``(B, N)`` state to ``(B,)`` values stored every
    ``save_stride`` steps (including step 0).
    """
    B = len(sample_ids)
    N = disc.n_modes
    q = spectrum.with_modes(N).q
    std = disc.noise_std(q)
    for lv in levels:
        if lv.disc.n_modes > N or n_steps % lv.ratio:
            raise PreconditionError("level incompatible with the fine discretization")
        if lv.disc.variant == "semi_implicit" or disc.variant == "semi_implicit":
            raise PreconditionError("coupling is defined for the exponential variants only")

    V = _initial(u0, B, N)
    Vl = [_initial(u0, B, lv.disc.n_modes) for lv in levels]
    acc = [np.zeros((B, lv.disc.n_modes)) for lv in levels]
    source = NoiseSource(seed, sample_ids, N)
    blowup = np.full(B, -1, dtype=np.int64)

    n_saves = n_steps // save_stride + 1 if record is not None else 0
    records = np.empty((n_saves, B)) if record is not None else None
    lrec = [np.empty((n_steps // lv.ratio + 1, B)) for lv in levels] if record_levels else []
    if record is not None:
        records[0] = record(V)
        for i, (lv, W) in enumerate(zip(levels, Vl)):
            if record_levels:
                lrec[i][0] = record(W)

    for k in range(1, n_steps + 1):
        inc = std * source.next()
        with np.errstate(over="ignore", invalid="ignore"):
            V = disc.step(V, inc, backend)
        _mark_blowup(V, blowup, k)
        for i, lv in enumerate(levels):
            n = lv.disc.n_modes
            # Horner fold of fine increments into the coarse convolution increment
            acc[i] = disc.decay[:n] * acc[i] + inc[:, :n]
            if k % lv.ratio == 0:
                with np.errstate(over="ignore", invalid="ignore"):
                    Vl[i] = lv.disc.step(Vl[i], acc[i], backend)
                _mark_blowup(Vl[i], blowup, k)
                acc[i] = np.zeros_like(acc[i])
                if record_levels:
                    lrec[i][k // lv.ratio] = record(Vl[i])
        if record is not None and k % save_stride == 0:
            records[k // save_stride] = record(V)

    times = np.arange(n_saves) * save_stride * disc.tau if record is not None else None
    return BatchResult(V, Vl, records, times, lrec, blowup)


def _initial(u0, B, N):
    u0 = np.asarray(u0, dtype=float)
    V = np.zeros((B, N))
    if u0.ndim == 1:
        n = min(N, u0.size)
        V[:, :n] = u0[:n]
    else:
        n = min(N, u0.shape[1])
        V[:, :n] = u0[:, :n]
    return V


def _mark_blowup(V, blowup, k):
    bad = diverged_rows(V)
    if bad.any():
        fresh = bad & (blowup < 0)
        blowup[fresh] = k
        # park diverged samples at zero so later steps stay finite
        V[bad] = 0.0


def chunks(M: int, chunk: int = DEFAULT_CHUNK):
    return [np.arange(s, min(s + chunk, M)) for s in range(0, M, chunk)]


def map_chunks(fn: Callable, M: int, threads: int = 1, chunk: int = DEFAULT_CHUNK) -> list:
    """Apply ``fn(sample_ids)`` to every chunk; results come back in chunk order."""
    parts = chunks(M, chunk)
    if threads <= 1 or len(parts) == 1:
        return [fn(ids) for ids in parts]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, parts))


def run_ensemble(
    disc: Discretization,
    n_steps: int,
    u0,
    spectrum: NoiseSpectrum,
    M: int,
    seed: int,
    levels: Sequence[Level] = (),
    record=None,
    save_stride: int = 1,
    record_levels: bool = False,
    threads: int = 1,
    chunk: int = DEFAULT_CHUNK,
    backend=None,
    first_sample: int = 0,
) -> BatchResult:
    """Run ``M`` samples (ids ``first_sample..first_sample+M-1``) and concatenate."""

    def work(ids):
        return run_batch(
            disc, n_steps, _slice_u0(u0, ids), spectrum, seed, ids + first_sample,
            levels, record, save_stride, record_levels, backend,
        )

    parts = map_chunks(work, M, threads, chunk)
    out = BatchResult(
        final=np.concatenate([p.final for p in parts]),
        level_finals=[np.concatenate([p.level_finals[i] for p in parts]) for i in range(len(levels))],
        blowup_step=np.concatenate([p.blowup_step for p in parts]),
    )
    if record is not None:
        out.records = np.concatenate([p.records for p in parts], axis=1)
        out.record_times = parts[0].record_times
    if record_levels:
        out.level_records = [
            np.concatenate([p.level_records[i] for p in parts], axis=1) for i in range(len(levels))
        ]
    return out


def _slice_u0(u0, ids):
    u0 = np.asarray(u0, dtype=float)
    return u0 if u0.ndim == 1 else u0[ids]
