"""File formats: a binary epoch container, a plain-text tabular importer,
model checkpoints, and ground-truth sidecars.

The binary container is a magic-tagged file holding one JSON header followed
by fixed-size half-sequence records: a (c, s, u) key, an optional target
label, and six little-endian float64 channels-by-time blocks in stimulus
order.  Round-trips are bit-exact.
"""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import asdict
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__ as _tool_version
from .errors import InvalidConfig
from .fitting import FitConfig
from .gradients import GradConfig, VariationalParams
from .model import (
    COLUMN,
    N_STIMULI,
    ROW,
    Dataset,
    HalfSequence,
    Hyperparams,
    ModelParams,
    StimulusEpoch,
    TimingConfig,
)
from .simulate import GroundTruth

MAGIC = b"P3EPOCHS"
CONTAINER_VERSION = 1
CHECKPOINT_VERSION = 1

_HALF_CODE = {ROW: 1, COLUMN: 2}
_CODE_HALF = {1: ROW, 2: COLUMN}
_RECORD_HEAD = struct.Struct("<IIBBH")  # c, s, u, has_target, target


# ---------------------------------------------------------------------------
# Binary dataset container
# ---------------------------------------------------------------------------

def write_dataset(path, data: Dataset) -> None:
    path = Path(path)
    e = data.n_channels if len(data) else 0
    m = data.n_times if len(data) else 0
    header = {
        "n_channels": e,
        "n_times": m,
        "sample_rate": data.sample_rate if len(data) else 0.0,
        "channel_names": list(data.channel_names) if data.channel_names else None,
        "timing": asdict(data.timing),
        "n_half_sequences": len(data),
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", CONTAINER_VERSION))
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for half in data.half_sequences:
            c, s, u = half.key
            has_target = half.target is not None
            fh.write(_RECORD_HEAD.pack(c, s, _HALF_CODE[u], int(has_target),
                                       half.target if has_target else 0))
            for epoch in half.epochs:
                fh.write(np.ascontiguousarray(epoch.signals, dtype="<f8").tobytes())


def read_dataset(path) -> Dataset:
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise InvalidConfig(f"{path} is not an epoch container (bad magic {magic!r})")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != CONTAINER_VERSION:
            raise InvalidConfig(f"unsupported container version {version}")
        (header_len,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(header_len).decode("utf-8"))
        e, m = header["n_channels"], header["n_times"]
        rate = header["sample_rate"]
        timing = TimingConfig(**header["timing"])
        names = tuple(header["channel_names"]) if header["channel_names"] else None
        block = N_STIMULI * e * m * 8
        halves = []
        for _ in range(header["n_half_sequences"]):
            c, s, u_code, has_target, target = _RECORD_HEAD.unpack(fh.read(_RECORD_HEAD.size))
            raw = np.frombuffer(fh.read(block), dtype="<f8").reshape(N_STIMULI, e, m)
            halves.append(HalfSequence(
                key=(c, s, _CODE_HALF[u_code]),
                epochs=tuple(StimulusEpoch(signals=raw[j].copy(), sample_rate=rate)
                             for j in range(N_STIMULI)),
                target=target if has_target else None,
            ))
    return Dataset(half_sequences=tuple(halves), timing=timing, channel_names=names)


# ---------------------------------------------------------------------------
# Plain-text tabular interchange
# ---------------------------------------------------------------------------

def write_dataset_csv(path, data: Dataset) -> None:
    """One row per channel of each stimulus epoch: c,s,u,j,e,z,x1..xM."""
    m = data.n_times
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["c", "s", "u", "j", "e", "z"] + [f"x{i + 1}" for i in range(m)])
        for half in data.half_sequences:
            c, s, u = half.key
            z = half.target if half.target is not None else ""
            for j, epoch in enumerate(half.epochs, start=1):
                for e_idx in range(epoch.n_channels):
                    writer.writerow([c, s, u, j, e_idx + 1, z]
                                    + [repr(float(v)) for v in epoch.signals[e_idx]])


def read_dataset_csv(path, sample_rate: float,
                     timing: Optional[TimingConfig] = None,
                     channel_names: Optional[tuple] = None) -> Dataset:
    """Import the tabular format written by `write_dataset_csv`."""
    grouped: dict = {}
    targets: dict = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        head = next(reader)
        n_fixed = 6
        if head[:n_fixed] != ["c", "s", "u", "j", "e", "z"]:
            raise InvalidConfig(f"unexpected CSV columns {head[:n_fixed]}")
        for row in reader:
            c, s, u, j, e_idx = int(row[0]), int(row[1]), row[2], int(row[3]), int(row[4])
            if u not in (ROW, COLUMN):
                u = _CODE_HALF[int(u)]
            key = (c, s, u)
            if row[5] != "":
                targets[key] = int(row[5])
            values = np.array([float(v) for v in row[n_fixed:]])
            grouped.setdefault(key, {}).setdefault(j, {})[e_idx] = values
    halves = []
    for key in grouped:
        stimuli = grouped[key]
        epochs = []
        for j in range(1, N_STIMULI + 1):
            channels = stimuli[j]
            signals = np.stack([channels[e] for e in sorted(channels)])
            epochs.append(StimulusEpoch(signals=signals, sample_rate=sample_rate))
        halves.append(HalfSequence(key=key, epochs=tuple(epochs), target=targets.get(key)))
    return Dataset(half_sequences=tuple(halves),
                   timing=timing if timing is not None else TimingConfig(),
                   channel_names=channel_names)


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

def write_checkpoint(path, xi: VariationalParams, hyper: Hyperparams, cfg: FitConfig,
                     seed: int, channel_names: Optional[tuple] = None) -> None:
    doc = {
        "format_version": CHECKPOINT_VERSION,
        "tool_version": _tool_version,
        "variational": {
            "beta_mean": xi.beta_mean.tolist(),
            "beta_rawscale": xi.beta_rawscale.tolist(),
            "sigma_mean": xi.sigma_mean,
            "sigma_rawscale": xi.sigma_rawscale,
            "delta_logit": xi.delta_logit.tolist(),
            "alpha_mean": xi.alpha_mean.tolist(),
            "alpha_rawscale": xi.alpha_rawscale.tolist(),
        },
        "hyper": asdict(hyper),
        "fit": {
            "iterations": cfg.iterations,
            "step_size": cfg.step_size,
            "adam_beta1": cfg.adam_beta1,
            "adam_beta2": cfg.adam_beta2,
            "adam_eps": cfg.adam_eps,
            "trace_every": cfg.trace_every,
            "grad": asdict(cfg.grad),
        },
        "seed": seed,
        "channel_names": list(channel_names) if channel_names else None,
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")


def read_checkpoint(path):
    """Returns (VariationalParams, Hyperparams, FitConfig, seed, channel_names)."""
    doc = json.loads(Path(path).read_text())
    version = doc.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise InvalidConfig(f"unsupported checkpoint format_version {version!r}")
    var = doc["variational"]
    xi = VariationalParams(
        beta_mean=np.array(var["beta_mean"]),
        beta_rawscale=np.array(var["beta_rawscale"]),
        sigma_mean=var["sigma_mean"],
        sigma_rawscale=var["sigma_rawscale"],
        delta_logit=np.array(var["delta_logit"]),
        alpha_mean=np.array(var["alpha_mean"]),
        alpha_rawscale=np.array(var["alpha_rawscale"]),
    )
    hyper = Hyperparams(**doc["hyper"])
    fit_doc = dict(doc["fit"])
    grad = GradConfig(**fit_doc.pop("grad"))
    cfg = FitConfig(grad=grad, **fit_doc)
    names = tuple(doc["channel_names"]) if doc.get("channel_names") else None
    return xi, hyper, cfg, doc["seed"], names


# ---------------------------------------------------------------------------
# Ground-truth sidecar
# ---------------------------------------------------------------------------

def write_ground_truth(path, truth: GroundTruth, extra: Optional[dict] = None) -> None:
    doc = {
        "format_version": 1,
        "tool_version": _tool_version,
        "tau_true": truth.tau_true,
        "target_cells": [list(cell) for cell in truth.target_cells],
        "seed": truth.seed,
        "theta_true": None,
    }
    if truth.theta_true is not None:
        doc["theta_true"] = {
            "beta_raw": truth.theta_true.beta_raw.tolist(),
            "sigma": truth.theta_true.sigma,
            "delta": truth.theta_true.delta.tolist(),
            "alpha_raw": truth.theta_true.alpha_raw.tolist(),
        }
    if extra:
        doc["extra"] = extra
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")


def read_ground_truth(path) -> GroundTruth:
    doc = json.loads(Path(path).read_text())
    theta = None
    if doc.get("theta_true") is not None:
        t = doc["theta_true"]
        theta = ModelParams(beta_raw=np.array(t["beta_raw"]), sigma=t["sigma"],
                            delta=np.array(t["delta"]), alpha_raw=np.array(t["alpha_raw"]))
    return GroundTruth(
        theta_true=theta,
        tau_true=doc["tau_true"],
        target_cells=tuple(tuple(cell) for cell in doc["target_cells"]),
        seed=doc["seed"],
    )
