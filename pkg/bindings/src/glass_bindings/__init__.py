"""Callable wrappers over the glass command-line pipeline.

Each function marshals inputs (paths, in-memory arrays, config mappings),
invokes the same command implementations the CLI runs, and returns the
written tables as pandas DataFrames.  No numeric logic lives here: results
are byte-identical to the CLI for identical seeds, and core error messages
propagate verbatim.
"""

from __future__ import annotations

import tempfile
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd

from glass.cli import (
    RunConfig,
    cmd_evaluate,
    cmd_fit,
    cmd_predict,
    cmd_simulate,
    cmd_summarize,
)
from glass.model import Dataset, HalfSequence, StimulusEpoch, TimingConfig
from glass.storage import write_dataset

__version__ = "0.1.0"

__all__ = [
    "ClosedHandle",
    "SessionHandle",
    "dataset_from_arrays",
    "evaluate",
    "fit",
    "predict",
    "simulate",
    "summarize",
]


class ClosedHandle(RuntimeError):
    """Raised when a session is used after close()."""


DataLike = Union[str, Path, Dataset]


def _build_config(config: Optional[dict]) -> RunConfig:
    return RunConfig(dict(config) if config else {})


def dataset_from_arrays(signals: np.ndarray, characters: Sequence[int],
                        sequences: Sequence[int], half_types: Sequence[str],
                        targets: Optional[Sequence[Optional[int]]] = None,
                        sample_rate: float = 256.0,
                        timing: Optional[TimingConfig] = None,
                        channel_names: Optional[tuple] = None) -> Dataset:
    """Assemble a Dataset from an (N, 6, E, M) signal array and key columns."""
    signals = np.asarray(signals, dtype=np.float64)
    if signals.ndim != 4 or signals.shape[1] != 6:
        raise ValueError(f"signals must be (N, 6, E, M), got {signals.shape}")
    n = signals.shape[0]
    if not (len(characters) == len(sequences) == len(half_types) == n):
        raise ValueError("characters, sequences and half_types must have length N")
    if targets is None:
        targets = [None] * n
    halves = []
    for i in range(n):
        epochs = tuple(StimulusEpoch(signals=signals[i, j], sample_rate=sample_rate)
                       for j in range(6))
        halves.append(HalfSequence(
            key=(int(characters[i]), int(sequences[i]), str(half_types[i])),
            epochs=epochs,
            target=None if targets[i] is None else int(targets[i]),
        ))
    return Dataset(half_sequences=tuple(halves),
                   timing=timing if timing is not None else TimingConfig(),
                   channel_names=channel_names)


def _materialize(data: DataLike, workdir: Path, name: str) -> Path:
    if isinstance(data, Dataset):
        path = workdir / name
        write_dataset(path, data)
        return path
    return Path(data)


class SessionHandle:
    """A fitted model plus the dataset it was trained on.

    Obtained from fit(); consumed by predict/summarize/evaluate.  All file
    outputs live under the session's working directory.
    """

    def __init__(self, workdir: Path, config: RunConfig, model_path: Path,
                 train_path: Path):
        self.workdir = Path(workdir)
        self.config = config
        self.model_path = Path(model_path)
        self.train_path = Path(train_path)
        self._closed = False

    def close(self) -> None:
        self._closed = True

    def __enter__(self) -> "SessionHandle":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _check_open(self) -> None:
        if self._closed:
            raise ClosedHandle("this session has been closed")


def _workdir(out_dir) -> Path:
    if out_dir is None:
        return Path(tempfile.mkdtemp(prefix="glass_session_"))
    path = Path(out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


# ---------------------------------------------------------------------------
# pipeline stages
# ---------------------------------------------------------------------------

def simulate(config: Optional[dict] = None, out_dir=None, preset: Optional[str] = None):
    """Generate a synthetic dataset; returns (dataset path, ground-truth path)."""
    workdir = _workdir(out_dir)
    run_config = _build_config(config)
    if preset is not None:
        run_config.simulate["preset"] = preset
    data_path = cmd_simulate(run_config, workdir)
    return data_path, workdir / "ground_truth.json"


def fit(data: DataLike, config: Optional[dict] = None, out_dir=None) -> SessionHandle:
    """Train on a dataset (path, Dataset, or arrays via dataset_from_arrays)."""
    workdir = _workdir(out_dir)
    run_config = _build_config(config)
    train_path = _materialize(data, workdir, "train.bin")
    model_paths = cmd_fit(str(train_path), run_config, workdir)
    return SessionHandle(workdir, run_config, model_paths[0], train_path)


def predict(handle: SessionHandle, data: DataLike) -> pd.DataFrame:
    """Posterior predictions for new data; rows match the predict command's CSV."""
    handle._check_open()
    new_path = _materialize(data, handle.workdir, "predict_input.bin")
    out = handle.workdir / "predict"
    pred_path = cmd_predict(str(handle.model_path), str(new_path), handle.config,
                            out, train_path=str(handle.train_path))
    return pd.read_csv(pred_path)


def summarize(handle: SessionHandle) -> dict:
    """Posterior summaries as DataFrames keyed 'effects' and 'channels'."""
    handle._check_open()
    out = handle.workdir / "summary"
    cmd_summarize(str(handle.model_path), handle.config, out)
    return {
        "effects": pd.read_csv(out / "effects.csv"),
        "channels": pd.read_csv(out / "channels.csv"),
    }


def evaluate(handle: SessionHandle, data: DataLike) -> pd.DataFrame:
    """Accuracy and utility on a labeled dataset."""
    handle._check_open()
    test_path = _materialize(data, handle.workdir, "evaluate_input.bin")
    out = handle.workdir / "evaluation"
    metrics_path = cmd_evaluate(str(test_path), handle.config, out,
                                model_path=str(handle.model_path),
                                train_path=str(handle.train_path),
                                scores_path=None)
    return pd.read_csv(metrics_path)
