"""Shared toy fixtures for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from glass.model import COLUMN, ROW, Dataset, HalfSequence, StimulusEpoch


def make_half(rng, n_channels=2, n_times=3, key=(1, 1, ROW), target=1, scale=1.0,
              sample_rate=32.0):
    epochs = tuple(
        StimulusEpoch(signals=scale * rng.normal(size=(n_channels, n_times)),
                      sample_rate=sample_rate)
        for _ in range(6)
    )
    return HalfSequence(key=key, epochs=epochs, target=target)


def make_dataset(rng, n_half=4, n_channels=2, n_times=3, scale=1.0, labeled=True):
    halves = []
    for i in range(n_half):
        u = ROW if i % 2 == 0 else COLUMN
        target = int(rng.integers(1, 7)) if labeled else None
        halves.append(make_half(rng, n_channels, n_times, key=(i // 2 + 1, 1, u),
                                target=target, scale=scale))
    return Dataset(half_sequences=tuple(halves))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def toy_dataset(rng):
    return make_dataset(rng, n_half=6, n_channels=3, n_times=4)
