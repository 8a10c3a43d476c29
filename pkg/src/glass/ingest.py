"""Continuous-recording ingestion: epoch extraction, bandpass filtering,
decimation, and the design-rank identifiability diagnostic.

The decoder itself consumes unfiltered full-rate epochs; filtering and
decimation exist for baseline-classifier pipelines and data inspection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import List, Optional, Tuple

import numpy as np
from scipy import signal as sps

from .errors import (
    DimensionMismatch,
    IncompleteHalfSequence,
    InvalidBand,
    InvalidRate,
    WindowOverrun,
)
from .model import (
    HALF_TYPES,
    N_STIMULI,
    Dataset,
    HalfSequence,
    StimulusEpoch,
    TimingConfig,
)

RANK_TOLERANCE = 1e-8  # relative singular-value cutoff


@dataclass(frozen=True)
class StimulusEvent:
    """One stimulus onset within a continuous recording."""

    sample_index: int
    character: int
    sequence: int
    half_type: str  # "row" or "column"
    stimulus: int  # j in 1..6
    is_target: Optional[bool] = None

    def __post_init__(self):
        if self.half_type not in HALF_TYPES:
            raise ValueError(f"half_type must be one of {HALF_TYPES}")
        if not 1 <= self.stimulus <= N_STIMULI:
            raise ValueError("stimulus must be in 1..6")


@dataclass(frozen=True)
class ContinuousRecording:
    """Raw multichannel EEG with stimulus-onset events."""

    samples: np.ndarray  # (E, T)
    sample_rate: float
    events: Tuple[StimulusEvent, ...] = ()
    channel_names: Optional[tuple] = None

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 2:
            raise DimensionMismatch("samples must be a 2-D E x T array")
        events = tuple(self.events)
        indices = [ev.sample_index for ev in events]
        if any(b <= a for a, b in zip(indices, indices[1:])):
            raise ValueError("event sample indices must be strictly increasing")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "events", events)


@dataclass(frozen=True)
class FilterSpec:
    """Zero-phase Butterworth bandpass specification."""

    low_hz: float = 0.5
    high_hz: float = 15.0
    order: int = 4
    zero_phase: bool = True


# ---------------------------------------------------------------------------
# Epoch extraction
# ---------------------------------------------------------------------------

def epoch_length(window_ms: float, sample_rate: float, include_endpoint: bool = True) -> int:
    """Samples per epoch for a window: floor(window * rate) plus the onset
    sample when the endpoint is included (the default)."""
    n = math.floor(window_ms / 1000.0 * sample_rate)
    return n + 1 if include_endpoint else n


def extract_epochs(rec: ContinuousRecording, window_ms: float = 800.0,
                   include_endpoint: bool = True,
                   timing: Optional[TimingConfig] = None) -> Dataset:
    """Cut a fixed window after every event and group them into half-sequences."""
    m = epoch_length(window_ms, rec.sample_rate, include_endpoint)
    n_total = rec.samples.shape[1]
    grouped: dict = {}
    for ev in rec.events:
        if ev.sample_index + m > n_total:
            raise WindowOverrun(
                f"event at sample {ev.sample_index} needs {m} samples but only "
                f"{n_total - ev.sample_index} remain"
            )
        epoch = StimulusEpoch(
            signals=rec.samples[:, ev.sample_index:ev.sample_index + m].copy(),
            sample_rate=rec.sample_rate,
        )
        key = (ev.character, ev.sequence, ev.half_type)
        grouped.setdefault(key, {})[ev.stimulus] = (epoch, ev.is_target)

    halves: List[HalfSequence] = []
    for key, stimuli in grouped.items():
        if sorted(stimuli) != list(range(1, N_STIMULI + 1)):
            raise IncompleteHalfSequence(
                f"half-sequence {key} has stimuli {sorted(stimuli)}; needs 1..6"
            )
        target = None
        for j, (_, is_target) in stimuli.items():
            if is_target:
                target = j
        halves.append(HalfSequence(
            key=key,
            epochs=tuple(stimuli[j][0] for j in range(1, N_STIMULI + 1)),
            target=target,
        ))
    if timing is None:
        timing = TimingConfig(window_ms=window_ms)
    return Dataset(half_sequences=tuple(halves), timing=timing,
                   channel_names=rec.channel_names)


# ---------------------------------------------------------------------------
# Filtering and decimation
# ---------------------------------------------------------------------------

def bandpass(rec: ContinuousRecording, spec: FilterSpec) -> ContinuousRecording:
    """Butterworth bandpass per channel, forward-backward when zero-phase."""
    nyquist = rec.sample_rate / 2.0
    if not 0 < spec.low_hz < spec.high_hz < nyquist:
        raise InvalidBand(
            f"need 0 < low < high < Nyquist={nyquist}, got ({spec.low_hz}, {spec.high_hz})"
        )
    sos = sps.butter(spec.order, [spec.low_hz, spec.high_hz], btype="bandpass",
                     fs=rec.sample_rate, output="sos")
    if spec.zero_phase:
        # the default pad is far too short for sub-hertz edges; reflect a few
        # periods of the lowest passband frequency
        padlen = min(rec.samples.shape[1] - 1,
                     int(3 * rec.sample_rate / spec.low_hz))
        filtered = sps.sosfiltfilt(sos, rec.samples, axis=1, padlen=padlen)
    else:
        filtered = sps.sosfilt(sos, rec.samples, axis=1)
    return replace(rec, samples=np.ascontiguousarray(filtered))


def _decimation_step(source_rate: float, target_hz: float) -> int:
    k = round(source_rate / target_hz)
    if k < 1 or abs(source_rate / target_hz - k) > 1e-9:
        raise InvalidRate(
            f"target rate {target_hz} Hz must integer-divide the source rate {source_rate} Hz"
        )
    return int(k)


def downsample(data, target_hz: float = 32.0):
    """Keep every k-th sample, k = source_rate / target_hz.

    Accepts a ContinuousRecording or a Dataset (each epoch is decimated along
    time, keeping indices 0, k, 2k, ...).  Apply a bandpass first: the upper
    band edge is the anti-aliasing filter.
    """
    if isinstance(data, ContinuousRecording):
        k = _decimation_step(data.sample_rate, target_hz)
        if k == 1:
            return data
        events = tuple(replace(ev, sample_index=ev.sample_index // k) for ev in data.events)
        return replace(data, samples=np.ascontiguousarray(data.samples[:, ::k]),
                       sample_rate=data.sample_rate / k, events=events)
    if isinstance(data, Dataset):
        k = _decimation_step(data.sample_rate, target_hz)
        if k == 1:
            return data
        halves = []
        for half in data.half_sequences:
            epochs = tuple(
                StimulusEpoch(signals=np.ascontiguousarray(ep.signals[:, ::k]),
                              sample_rate=ep.sample_rate / k)
                for ep in half.epochs
            )
            halves.append(HalfSequence(key=half.key, epochs=epochs, target=half.target))
        return Dataset(half_sequences=tuple(halves), timing=data.timing,
                       channel_names=data.channel_names)
    raise TypeError(f"cannot downsample a {type(data).__name__}")


# ---------------------------------------------------------------------------
# Identifiability diagnostic
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IdentifiabilityReport:
    rank: int
    full_column_rank: bool
    n_rows: int  # 5N
    n_cols: int  # EM
    message: str


def identifiability_check(data: Dataset) -> IdentifiabilityReport:
    """Numerical rank of the stacked difference design.

    Each half-sequence contributes the five rows vec(X_ij - X_i6), j=1..5;
    the coefficient matrix is identified exactly when the stack has full
    column rank, which requires 5N >= EM.
    """
    n = len(data)
    if n == 0:
        return IdentifiabilityReport(0, False, 0, 0, "empty dataset")
    e, m = data.n_channels, data.n_times
    n_rows, n_cols = 5 * n, e * m
    x = np.empty((n_rows, n_cols))
    for i, half in enumerate(data.half_sequences):
        stack = half.signal_stack().reshape(N_STIMULI, n_cols)
        x[5 * i:5 * (i + 1)] = stack[:5] - stack[5]
    values = np.linalg.svd(x, compute_uv=False)
    largest = float(values[0]) if values.size else 0.0
    rank = int((values > RANK_TOLERANCE * largest).sum()) if largest > 0 else 0
    full = rank == n_cols
    if n_rows < n_cols:
        msg = f"unidentifiable: 5N = {n_rows} < EM = {n_cols} (need 5N >= EM)"
    elif full:
        msg = "full column rank"
    else:
        msg = f"rank deficient: rank {rank} < EM = {n_cols}"
    return IdentifiabilityReport(rank, full, n_rows, n_cols, msg)
