"""Synthetic speller data: generative ERP simulation, label-switch relabeling
of a template dataset under a known model, corruption scenarios, and the
recovery metrics used to score parameter estimation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DimensionMismatch, UnlabeledTemplate, ZeroTrueEffect
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
    project_to_sphere,
    soft_threshold,
    stable_softmax,
)
from .fitting import PosteriorDraws
from .rng import seeded_rng


def gaussian_bump(n_times: int, sample_rate: float, center_ms: float,
                  sd_ms: float, amplitude: float) -> np.ndarray:
    """A Gaussian deflection over the epoch time axis, in microvolts."""
    t_ms = np.arange(n_times) / sample_rate * 1000.0
    return amplitude * np.exp(-0.5 * ((t_ms - center_ms) / sd_ms) ** 2)


def default_erp_templates(n_times: int, sample_rate: float):
    """Parametric target/non-target waveforms.

    Target: a positive deflection at 300 ms (sd 60 ms, amplitude 5) plus an
    early 100 ms component (sd 25 ms, amplitude 2).  Non-target: flat zero.
    """
    target = (gaussian_bump(n_times, sample_rate, 300.0, 60.0, 5.0)
              + gaussian_bump(n_times, sample_rate, 100.0, 25.0, 2.0))
    return target, np.zeros(n_times)


@dataclass(frozen=True)
class GenerativeConfig:
    """Settings of the generative ERP simulator."""

    n_channels: int
    n_times: int
    sample_rate: float
    n_characters: int
    n_sequences: int
    erp_target: np.ndarray  # (M,)
    erp_nontarget: np.ndarray  # (M,)
    ar_coef: float = 0.5  # temporal AR(1) coefficient of background noise
    noise_var: float = 20.0  # stationary (marginal) variance of background noise
    spatial_corr: float = 0.5  # compound-symmetry off-diagonal correlation
    channel_gains: Optional[np.ndarray] = None  # per-channel ERP scaling, default all ones
    seed: int = 0
    timing: TimingConfig = field(default_factory=TimingConfig)
    channel_names: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "erp_target", np.asarray(self.erp_target, dtype=np.float64))
        object.__setattr__(self, "erp_nontarget", np.asarray(self.erp_nontarget, dtype=np.float64))
        if self.erp_target.shape != (self.n_times,) or self.erp_nontarget.shape != (self.n_times,):
            raise DimensionMismatch("ERP templates must have length n_times")
        if not np.isfinite(self.erp_target).all() or not np.isfinite(self.erp_nontarget).all():
            raise ValueError("ERP templates must be finite")
        if self.channel_gains is not None:
            gains = np.asarray(self.channel_gains, dtype=np.float64)
            if gains.shape != (self.n_channels,):
                raise DimensionMismatch("channel_gains must have length n_channels")
            object.__setattr__(self, "channel_gains", gains)
        if not self.noise_var > 0:
            raise ValueError("noise_var must be > 0")
        if not abs(self.ar_coef) < 1:
            raise ValueError("|ar_coef| must be < 1")
        if not 0 <= self.spatial_corr < 1:
            raise ValueError("spatial_corr must be in [0, 1)")


@dataclass(frozen=True)
class CorruptionConfig:
    """Misspecification scenarios applied to a dataset."""

    drift_prob: float = 0.10  # chance of swapping the target epoch with a non-target
    noisy_ar_coef: float = 0.5
    noisy_var: float = 1.0  # innovation variance of the added AR(1) noise
    apply_drift: bool = False
    apply_noise: bool = False

    def __post_init__(self):
        if not 0 <= self.drift_prob <= 1:
            raise ValueError("drift_prob must be in [0, 1]")


@dataclass(frozen=True)
class GroundTruth:
    """Sidecar record tying a simulated dataset to its generator."""

    theta_true: Optional[ModelParams]
    tau_true: float
    target_cells: tuple  # per character: (row_j, col_j)
    seed: int


# ---------------------------------------------------------------------------
# Generative simulator
# ---------------------------------------------------------------------------

def _ar1_noise(rng: np.random.Generator, n_epochs: int, n_channels: int, n_times: int,
               ar_coef: float, marginal_var: float, spatial_chol: Optional[np.ndarray]) -> np.ndarray:
    """Stationary AR(1)-in-time noise for a batch of epochs, optionally
    spatially correlated.  Returns (n_epochs, E, M)."""
    white = rng.standard_normal((n_epochs, n_channels, n_times))
    if spatial_chol is not None:
        white = np.einsum("fe,nem->nfm", spatial_chol, white)
    out = np.empty_like(white)
    out[:, :, 0] = white[:, :, 0]
    scale = math.sqrt(1.0 - ar_coef ** 2)
    for m in range(1, n_times):
        out[:, :, m] = ar_coef * out[:, :, m - 1] + scale * white[:, :, m]
    return math.sqrt(marginal_var) * out


def _compound_symmetry_chol(n_channels: int, corr: float) -> Optional[np.ndarray]:
    if corr == 0.0 or n_channels == 1:
        return None
    cov = np.full((n_channels, n_channels), corr)
    np.fill_diagonal(cov, 1.0)
    return np.linalg.cholesky(cov)


def simulate_generative(cfg: GenerativeConfig):
    """Generate a labeled dataset of ERP epochs over random target characters.

    Background noise is AR(1) in time with compound-symmetry correlation
    across channels; the target or non-target template (scaled by the
    per-channel gains) is added on top.  Every sequence presents each row
    and each column exactly once, in a random flash order.

    Returns (Dataset, GroundTruth) where the ground truth records the target
    grid cell of every character.
    """
    rng = seeded_rng(cfg.seed)
    chol = _compound_symmetry_chol(cfg.n_channels, cfg.spatial_corr)
    gains = cfg.channel_gains if cfg.channel_gains is not None else np.ones(cfg.n_channels)
    erp = {True: np.outer(gains, cfg.erp_target), False: np.outer(gains, cfg.erp_nontarget)}

    halves = []
    cells = []
    for c in range(1, cfg.n_characters + 1):
        row_target = int(rng.integers(1, N_STIMULI + 1))
        col_target = int(rng.integers(1, N_STIMULI + 1))
        cells.append((row_target, col_target))
        for s in range(1, cfg.n_sequences + 1):
            # one sequence = 12 stimuli: all rows and all columns, shuffled
            schedule = [(ROW, int(j)) for j in rng.permutation(N_STIMULI) + 1]
            schedule += [(COLUMN, int(j)) for j in rng.permutation(N_STIMULI) + 1]
            noise = _ar1_noise(rng, len(schedule), cfg.n_channels, cfg.n_times,
                               cfg.ar_coef, cfg.noise_var, chol)
            epochs = {ROW: {}, COLUMN: {}}
            for idx, (u, j) in enumerate(schedule):
                target_j = row_target if u == ROW else col_target
                signals = noise[idx] + erp[j == target_j]
                epochs[u][j] = StimulusEpoch(signals=signals, sample_rate=cfg.sample_rate)
            for u, target_j in ((ROW, row_target), (COLUMN, col_target)):
                halves.append(HalfSequence(
                    key=(c, s, u),
                    epochs=tuple(epochs[u][j] for j in range(1, N_STIMULI + 1)),
                    target=target_j,
                ))
    data = Dataset(half_sequences=tuple(halves), timing=cfg.timing,
                   channel_names=cfg.channel_names)
    truth = GroundTruth(theta_true=None, tau_true=0.0, target_cells=tuple(cells), seed=cfg.seed)
    return data, truth


# ---------------------------------------------------------------------------
# Label-switch simulator
# ---------------------------------------------------------------------------

def simulate_from_model(theta_true: ModelParams, hyper: Hyperparams,
                        template: Dataset, seed: int = 0) -> Dataset:
    """Relabel a template dataset with targets drawn under a known model.

    For each character and orientation one target number is drawn from the
    model probabilities of the first sequence's half-sequence; when it
    differs from the template target, the two epochs exchange stimulus
    numbers in every sequence so all half-sequences of the character share
    the drawn target.  Non-target stimulus numbers are then randomly
    permuted within each half-sequence.  Epoch contents are never modified.
    """
    if not template.is_labeled:
        raise UnlabeledTemplate("the template dataset must be fully labeled")
    rng = seeded_rng(seed)
    beta_tilde = theta_true.beta_tilde(hyper.tau)
    weights = theta_true.latent_weights()

    # one drawn target per (character, orientation), from the first sequence seen
    drawn: dict = {}
    for half in template.half_sequences:
        key = (half.character, half.half_type)
        if key in drawn:
            continue
        eta = np.einsum("jem,e->jm", half.signal_stack(), weights) @ beta_tilde
        probs = stable_softmax(eta)
        drawn[key] = int(rng.choice(N_STIMULI, p=probs)) + 1

    halves = []
    for half in template.half_sequences:
        z_new = drawn[(half.character, half.half_type)]
        z_old = half.target
        epochs = list(half.epochs)
        if z_new != z_old:
            epochs[z_new - 1], epochs[z_old - 1] = epochs[z_old - 1], epochs[z_new - 1]
        non_targets = [j for j in range(N_STIMULI) if j != z_new - 1]
        shuffled = [non_targets[k] for k in rng.permutation(N_STIMULI - 1)]
        reordered = list(epochs)
        for slot, src in zip(non_targets, shuffled):
            reordered[slot] = epochs[src]
        halves.append(HalfSequence(key=half.key, epochs=tuple(reordered), target=z_new))
    return Dataset(half_sequences=tuple(halves), timing=template.timing,
                   channel_names=template.channel_names)


# ---------------------------------------------------------------------------
# Corruption scenarios
# ---------------------------------------------------------------------------

def apply_corruptions(data: Dataset, cfg: CorruptionConfig, seed: int) -> Dataset:
    """Attention drift (target/non-target epoch swaps with the label kept)
    and/or added AR(1) noise on every channel of every epoch."""
    rng = seeded_rng(seed)
    halves = []
    for half in data.half_sequences:
        epochs = list(half.epochs)
        if cfg.apply_drift:
            if half.target is None:
                raise UnlabeledTemplate("attention drift needs labeled data")
            if rng.random() < cfg.drift_prob:
                other = int(rng.integers(N_STIMULI - 1))
                non_targets = [j for j in range(N_STIMULI) if j != half.target - 1]
                k = non_targets[other]
                epochs[half.target - 1], epochs[k] = epochs[k], epochs[half.target - 1]
        if cfg.apply_noise:
            marginal = cfg.noisy_var / (1.0 - cfg.noisy_ar_coef ** 2)
            noise = _ar1_noise(rng, N_STIMULI, half.n_channels, half.n_times,
                               cfg.noisy_ar_coef, marginal, None)
            epochs = [
                StimulusEpoch(signals=ep.signals + noise[j], sample_rate=ep.sample_rate)
                for j, ep in enumerate(epochs)
            ]
        halves.append(HalfSequence(key=half.key, epochs=tuple(epochs), target=half.target))
    return Dataset(half_sequences=tuple(halves), timing=data.timing,
                   channel_names=data.channel_names)


# ---------------------------------------------------------------------------
# Recovery metrics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RecoveryMetrics:
    rmse: float  # ||beta_tilde_true - beta_tilde_est||^2 / ||beta_tilde_true||^2
    error_angle_deg: float  # angle between true and estimated unit weights
    mean_delta_signal: float  # mean selection probability over true signal channels
    mean_delta_noise: float  # mean selection probability over true noise channels


def recovery_metrics(theta_true: ModelParams, draws: PosteriorDraws,
                     hyper: Hyperparams, tau_true: Optional[float] = None) -> RecoveryMetrics:
    """Score posterior draws against the generating parameters.

    The estimate of the effects is the per-time posterior median of the
    thresholded draws (at the fitted tau); the weight estimate is the
    L2-normalized per-coordinate median of the projected weights.  The angle
    uses the absolute inner product, respecting the joint sign symmetry of
    weights and effects.
    """
    if (draws.n_times, draws.n_channels) != (theta_true.n_times, theta_true.n_channels):
        raise DimensionMismatch("draws and theta_true dimensions differ")
    if tau_true is None:
        tau_true = hyper.tau
    bt_true = theta_true.beta_tilde(tau_true)
    denom = float(bt_true @ bt_true)
    if denom == 0.0:
        raise ZeroTrueEffect("true thresholded effects are identically zero")
    bt_est = np.median(soft_threshold(draws.beta_raw, hyper.tau), axis=0)

    alpha_true = project_to_sphere(theta_true.alpha_raw)
    norms = np.maximum(np.linalg.norm(draws.alpha_raw, axis=1), 1e-300)
    med = np.median(draws.alpha_raw / norms[:, None], axis=0)
    alpha_est = project_to_sphere(med)
    # the model is invariant to jointly flipping weights and effects; align
    # the estimated pair with the truth before elementwise comparison
    if float(alpha_true @ alpha_est) < 0:
        alpha_est = -alpha_est
        bt_est = -bt_est
    rmse = float((bt_true - bt_est) @ (bt_true - bt_est)) / denom
    cosine = min(1.0, abs(float(alpha_true @ alpha_est)))
    angle = math.degrees(math.acos(cosine))

    selection = draws.delta.mean(axis=0)
    signal = theta_true.delta > 0.5
    mean_signal = float(selection[signal].mean()) if signal.any() else float("nan")
    mean_noise = float(selection[~signal].mean()) if (~signal).any() else float("nan")
    return RecoveryMetrics(rmse=rmse, error_angle_deg=angle,
                           mean_delta_signal=mean_signal, mean_delta_noise=mean_noise)
