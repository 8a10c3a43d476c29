"""Reproducible desk-scale studies: parameter recovery under label-switched
simulation, prediction accuracy on the generative simulator, and the
shrinkage-ratio sensitivity grid.

The recovery ground truth is constructed to be the exact Bayes discriminant
of the template distribution: with independent channels, the optimal
coefficient matrix for locating an additive pattern g b^T in AR(1) noise is
rank one with weights proportional to g and effects proportional to the
AR-whitened waveform.  This makes the generating parameters the estimand of
the fit, mirroring a study where the truth is itself a model fitted to the
template data.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.ndimage import gaussian_filter1d

from .evaluate import accuracy_by_sequences
from .fitting import (FitConfig, fit, fit_with_calibration, initialize_variational,
                      posterior_draws, tau_from_baseline_medians)
from .gradients import GradConfig, elbo_estimate
from .model import COLUMN, ROW, Dataset, Hyperparams, ModelParams
from .prediction import (
    Keyboard,
    attach_training_log_joints,
    decode_character,
    fuse_halfsequences,
    predictive_distribution,
)
from .rng import STREAM_BASELINE, derived_seed
from .simulate import (
    CorruptionConfig,
    GenerativeConfig,
    GroundTruth,
    apply_corruptions,
    default_erp_templates,
    recovery_metrics,
    simulate_from_model,
    simulate_generative,
)
from .summaries import summarize_channels, summarize_effects

# channel layout of a 16-electrode cap; the four parietal/occipital channels
# carry the simulated signal
CHANNEL_NAMES_16 = ("F3", "Fz", "F4", "T7", "C3", "Cz", "C4", "T8",
                    "CP3", "CP4", "P3", "Pz", "P4", "PO7", "Oz", "PO8")
SIGNAL_CHANNELS_16 = (11, 13, 14, 15)  # Pz, PO7, Oz, PO8
# gains sized so the per-half-sequence Bayes log-odds gap is ~4.5 at the
# default noise level: errors stay frequent enough to identify the scale,
# and the added-noise corruption (marginal variance 4/3) stays a fraction
# of the template noise
SIGNAL_GAINS = (0.1016, 0.0978, 0.0941, 0.0903)
TRUTH_SMOOTHING_SD = 3.0  # samples; removes the defining fit's own MC wiggle

# stream tags for per-replicate seed derivation
_TAG_TEMPLATE = 10
_TAG_RELABEL = 11
_TAG_CORRUPT = 12
_TAG_FIT = 13
_TAG_DRAWS = 14
_TAG_ELBO_PROBE = 15
_TAG_TRAIN = 20
_TAG_TEST = 21

RECOVERY_SCENARIOS = ("standard", "less", "drift", "noisy")


# ---------------------------------------------------------------------------
# Recovery study (label-switch protocol)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RecoveryProtocol:
    """Frozen configuration of the parameter-recovery study."""

    n_channels: int = 16
    n_times: int = 205
    sample_rate: float = 256.0
    n_characters: int = 19
    n_sequences: int = 15
    ar_coef: float = 0.5
    noise_var: float = 2.0
    n_draws: int = 2000
    less_training_sequences: int = 3


_TRUTH_SEED = 0x5EED_CAB  # pins the preliminary fit that defines the ground truth


@lru_cache(maxsize=4)
def recovery_ground_truth(protocol: RecoveryProtocol = RecoveryProtocol()):
    """Ground truth for the recovery study, defined by a preliminary fit.

    A pinned template dataset is fitted once; the truth designates the four
    gain-bearing channels as signal, takes their support-renormalized median
    weights, and takes the per-time effect medians as raw effects (with
    tau_true = 0, the thresholded truth coincides with them).  Defining the
    truth through a fit keeps its scale split between weights and effects
    consistent with what refits on relabeled data can reproduce; a mild
    smoothing of the median curve removes the defining fit's own Monte Carlo
    wiggle so the truth is the underlying effect waveform, not one run's
    optimizer noise.

    Returns (theta_true, tau_true, gains); cached per protocol.
    """
    gains = np.zeros(protocol.n_channels)
    gains[list(SIGNAL_CHANNELS_16)] = SIGNAL_GAINS
    template_cfg = recovery_template_config(protocol, gains, derived_seed(_TRUTH_SEED, 0))
    template, _ = simulate_generative(template_cfg)
    fit_cfg = FitConfig(grad=GradConfig(seed=derived_seed(_TRUTH_SEED, 1)))
    result, hyper_used = fit_with_calibration(template, Hyperparams(), fit_cfg,
                                              n_draws=protocol.n_draws)
    draws = posterior_draws(result.xi, protocol.n_draws, derived_seed(_TRUTH_SEED, 2))
    effects = summarize_effects(draws, hyper_used)
    channels = summarize_channels(draws)

    beta_true = gaussian_filter1d(effects.median, TRUTH_SMOOTHING_SD)
    beta_true[np.abs(beta_true) < 1e-3 * np.abs(beta_true).max()] = 0.0
    alpha_true = np.zeros(protocol.n_channels)
    alpha_true[list(SIGNAL_CHANNELS_16)] = channels.weight[list(SIGNAL_CHANNELS_16)]
    alpha_true /= np.linalg.norm(alpha_true)
    if alpha_true.sum() < 0:  # fix the joint sign convention to positive weights
        alpha_true = -alpha_true
        beta_true = -beta_true
    diffs = np.diff(beta_true, prepend=0.0)
    theta_true = ModelParams(
        beta_raw=beta_true,
        sigma=float(np.sqrt(np.mean(diffs ** 2))),
        delta=(gains > 0).astype(np.float64),
        alpha_raw=alpha_true,
    )
    return theta_true, 0.0, gains


def recovery_template_config(protocol: RecoveryProtocol, gains: np.ndarray,
                             seed: int) -> GenerativeConfig:
    target_wave, nontarget_wave = default_erp_templates(protocol.n_times, protocol.sample_rate)
    return GenerativeConfig(
        n_channels=protocol.n_channels,
        n_times=protocol.n_times,
        sample_rate=protocol.sample_rate,
        n_characters=protocol.n_characters,
        n_sequences=protocol.n_sequences,
        erp_target=target_wave,
        erp_nontarget=nontarget_wave,
        ar_coef=protocol.ar_coef,
        noise_var=protocol.noise_var,
        spatial_corr=0.0,  # independent channels keep the Bayes weights on the gain support
        channel_gains=gains,
        seed=seed,
        channel_names=CHANNEL_NAMES_16,
    )


def keep_first_sequences(data: Dataset, n_keep: int) -> Dataset:
    """Restrict to the first n_keep sequences of every character."""
    halves = tuple(h for h in data.half_sequences if h.sequence <= n_keep)
    return Dataset(half_sequences=halves, timing=data.timing, channel_names=data.channel_names)


def run_recovery_replicate(seed: int, scenario: str = "standard",
                           protocol: RecoveryProtocol = RecoveryProtocol(),
                           fit_cfg: Optional[FitConfig] = None,
                           ratio: float = 0.5):
    """One replicate: simulate, relabel, optionally corrupt, fit, score.

    Returns (RecoveryMetrics, tau_used, elbo_gain) where elbo_gain is the
    64-sample objective improvement of the final fit over its initialization.
    """
    if scenario not in RECOVERY_SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}")
    theta_true, tau_true, gains = recovery_ground_truth(protocol)
    template_cfg = recovery_template_config(protocol, gains, derived_seed(seed, _TAG_TEMPLATE))
    template, _ = simulate_generative(template_cfg)
    data = simulate_from_model(theta_true, Hyperparams(tau=tau_true), template,
                               seed=derived_seed(seed, _TAG_RELABEL))
    if scenario == "less":
        data = keep_first_sequences(data, protocol.less_training_sequences)
    elif scenario == "drift":
        data = apply_corruptions(data, CorruptionConfig(apply_drift=True),
                                 seed=derived_seed(seed, _TAG_CORRUPT))
    elif scenario == "noisy":
        data = apply_corruptions(data, CorruptionConfig(apply_noise=True),
                                 seed=derived_seed(seed, _TAG_CORRUPT))
    if fit_cfg is None:
        fit_cfg = FitConfig()
    fit_cfg = replace(fit_cfg, grad=replace(fit_cfg.grad, seed=derived_seed(seed, _TAG_FIT)))
    result, hyper_used = fit_with_calibration(data, Hyperparams(), fit_cfg,
                                              ratio=ratio, n_draws=protocol.n_draws)
    probe = GradConfig(mc_samples=64, seed=derived_seed(seed, _TAG_ELBO_PROBE))
    xi0 = initialize_variational(data.n_times, data.n_channels, fit_cfg.grad.seed)
    elbo_gain = (elbo_estimate(result.xi, data, hyper_used, probe)
                 - elbo_estimate(xi0, data, hyper_used, probe))
    draws = posterior_draws(result.xi, protocol.n_draws, derived_seed(seed, _TAG_DRAWS))
    metrics = recovery_metrics(theta_true, draws, hyper_used, tau_true=tau_true)
    return metrics, hyper_used.tau, elbo_gain


def run_recovery_study(scenarios: Sequence[str], n_replicates: int, base_seed: int = 0,
                       protocol: RecoveryProtocol = RecoveryProtocol(),
                       fit_cfg: Optional[FitConfig] = None,
                       progress=None) -> List[dict]:
    """Replicated recovery metrics per scenario; one summary row each."""
    rows = []
    for scenario in scenarios:
        metrics = []
        gains = []
        for rep in range(n_replicates):
            m, tau_used, elbo_gain = run_recovery_replicate(derived_seed(base_seed, rep),
                                                            scenario, protocol, fit_cfg)
            metrics.append(m)
            gains.append(elbo_gain)
            if progress is not None:
                progress(scenario, rep, m)
        rows.append({
            "scenario": scenario,
            "n_replicates": n_replicates,
            "rmse_median": float(np.median([m.rmse for m in metrics])),
            "rmse_mean": float(np.mean([m.rmse for m in metrics])),
            "rmse_sd": float(np.std([m.rmse for m in metrics], ddof=1)) if n_replicates > 1 else 0.0,
            "angle_median_deg": float(np.median([m.error_angle_deg for m in metrics])),
            "delta_signal_mean": float(np.mean([m.mean_delta_signal for m in metrics])),
            "delta_noise_mean": float(np.mean([m.mean_delta_noise for m in metrics])),
            "elbo_gain_min": float(np.min(gains)),
        })
    return rows


# ---------------------------------------------------------------------------
# Prediction study (generative protocol)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PredictionProtocol:
    """Frozen configuration of the accuracy-by-sequences study."""

    n_channels: int = 3
    n_times: int = 26
    sample_rate: float = 32.0
    n_characters: int = 19
    n_sequences: int = 5
    ar_coef: float = 0.5
    spatial_corr: float = 0.5
    n_draws: int = 2000

    def generative(self, noise_var: float, seed: int) -> GenerativeConfig:
        target_wave, nontarget_wave = default_erp_templates(self.n_times, self.sample_rate)
        return GenerativeConfig(
            n_channels=self.n_channels,
            n_times=self.n_times,
            sample_rate=self.sample_rate,
            n_characters=self.n_characters,
            n_sequences=self.n_sequences,
            erp_target=target_wave,
            erp_nontarget=nontarget_wave,
            ar_coef=self.ar_coef,
            noise_var=noise_var,
            spatial_corr=self.spatial_corr,
            seed=seed,
        )

MODERATE_NOISE_VAR = 20.0
HIGH_NOISE_VAR = 40.0


def predict_characters(draws, train_data: Dataset, test_data: Dataset,
                       hyper: Hyperparams, kb: Keyboard = Keyboard(),
                       n_seq_values: Optional[Sequence[int]] = None,
                       unweighted: bool = False):
    """Fused predictions for every character of a test set.

    Returns {n_seq: [decoded symbol per character]} in the character order of
    `test_data.characters()`.  `draws` must already carry the training
    log-joints (see attach_training_log_joints) unless unweighted.
    """
    if draws.train_log_joint is None and not unweighted:
        if train_data is None:
            raise ValueError("importance weighting needs the training data "
                             "(or pass unweighted=True)")
        draws = attach_training_log_joints(draws, train_data, hyper)
    by_char: dict = {}
    for half in test_data.half_sequences:
        by_char.setdefault(half.character, {ROW: [], COLUMN: []})[half.half_type].append(half)
    max_seq = max(len(v[ROW]) for v in by_char.values())
    if n_seq_values is None:
        n_seq_values = range(1, max_seq + 1)
    dists: dict = {}
    for c, sides in by_char.items():
        dists[c] = {
            u: [predictive_distribution(draws, draws.train_log_joint, h, hyper,
                                        unweighted=unweighted)
                for h in sorted(sides[u], key=lambda h: h.sequence)]
            for u in (ROW, COLUMN)
        }
    decoded: Dict[int, list] = {}
    for n in n_seq_values:
        symbols = []
        for c in test_data.characters():
            row_fused = fuse_halfsequences(dists[c][ROW][:n])
            col_fused = fuse_halfsequences(dists[c][COLUMN][:n])
            symbol, _, _ = decode_character(row_fused, col_fused, kb)
            symbols.append(symbol)
        decoded[int(n)] = symbols
    return decoded


def truth_symbols(truth: GroundTruth, kb: Keyboard = Keyboard()) -> List[str]:
    return [kb.symbol(r, c) for r, c in truth.target_cells]


def run_prediction_replicate(noise_var: float, seed: int,
                             protocol: PredictionProtocol = PredictionProtocol(),
                             fit_cfg: Optional[FitConfig] = None,
                             ratio: float = 0.5) -> Dict[int, float]:
    """Accuracy per fused-sequence count for one simulated train/test pair."""
    train, _ = simulate_generative(protocol.generative(noise_var, derived_seed(seed, _TAG_TRAIN)))
    test, truth = simulate_generative(protocol.generative(noise_var, derived_seed(seed, _TAG_TEST)))
    if fit_cfg is None:
        fit_cfg = FitConfig()
    fit_cfg = replace(fit_cfg, grad=replace(fit_cfg.grad, seed=derived_seed(seed, _TAG_FIT)))
    result, hyper_used = fit_with_calibration(train, Hyperparams(), fit_cfg,
                                              ratio=ratio, n_draws=protocol.n_draws)
    draws = posterior_draws(result.xi, protocol.n_draws, derived_seed(seed, _TAG_DRAWS))
    draws = attach_training_log_joints(draws, train, hyper_used)
    kb = Keyboard()
    decoded = predict_characters(draws, train, test, hyper_used, kb)
    truths = truth_symbols(truth, kb)
    curve = accuracy_by_sequences(decoded, truths)
    return {int(n): float(acc) for n, acc in zip(curve.n_seq, curve.mean)}


def run_prediction_study(noise_vars: Sequence[float], n_replicates: int, base_seed: int = 0,
                         protocol: PredictionProtocol = PredictionProtocol(),
                         fit_cfg: Optional[FitConfig] = None,
                         progress=None) -> Dict[float, Dict[int, np.ndarray]]:
    """Per-noise-level accuracy arrays: {noise_var: {n_seq: (n_replicates,)}}."""
    out: Dict[float, Dict[int, list]] = {}
    for noise_var in noise_vars:
        acc: Dict[int, list] = {}
        for rep in range(n_replicates):
            result = run_prediction_replicate(noise_var, derived_seed(base_seed, rep),
                                              protocol, fit_cfg)
            for n, a in result.items():
                acc.setdefault(n, []).append(a)
            if progress is not None:
                progress(noise_var, rep, result)
        out[noise_var] = {n: np.array(v) for n, v in acc.items()}
    return out


# ---------------------------------------------------------------------------
# Shrinkage-ratio sensitivity grid
# ---------------------------------------------------------------------------

def run_sensitivity_grid(train: Dataset, test: Optional[Dataset], truths: Optional[Sequence[str]],
                         ratios: Sequence[float], fit_cfg: FitConfig,
                         hyper: Hyperparams = Hyperparams(),
                         n_draws: int = 2000) -> List[dict]:
    """Fit one baseline, derive tau per ratio, refit, and (optionally) score.

    Returns one row per ratio with the tau used and, when a labeled test set
    is provided, the character accuracy at the largest sequence count.
    """
    baseline_seed = derived_seed(fit_cfg.grad.seed, STREAM_BASELINE)  # calibrate_tau's stream
    baseline_cfg = replace(fit_cfg, grad=replace(fit_cfg.grad, seed=baseline_seed))
    baseline = fit(train, replace(hyper, tau=0.0), baseline_cfg)
    baseline_draws = posterior_draws(baseline.xi, n_draws, baseline_seed)
    medians = np.median(baseline_draws.beta_raw, axis=0)

    rows = []
    for ratio in ratios:
        tau = tau_from_baseline_medians(medians, ratio)
        hyper_used = replace(hyper, tau=tau)
        result = fit(train, hyper_used, fit_cfg)
        row = {"ratio": float(ratio), "tau": float(tau)}
        if test is not None and truths is not None:
            draws = posterior_draws(result.xi, n_draws, derived_seed(fit_cfg.grad.seed, _TAG_DRAWS))
            draws = attach_training_log_joints(draws, train, hyper_used)
            decoded = predict_characters(draws, train, test, hyper_used)
            curve = accuracy_by_sequences(decoded, list(truths))
            row["accuracy"] = float(curve.mean[-1])
            row["n_seq"] = int(curve.n_seq[-1])
        rows.append(row)
    return rows
