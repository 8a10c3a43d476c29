"""Variational fitting: Adam on the stochastic ELBO gradient.

Also houses variational-parameter initialization, the data-driven calibration
of the soft-threshold level, and exact posterior sampling from a fitted
surrogate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

import numpy as np

from .design import pack_design
from .errors import EmptyDataset, NonFiniteGradient
from .gradients import (
    GradConfig,
    VariationalParams,
    _draw_noise,
    _elbo_value_and_grad,
    _transform,
    softplus_inv,
)
from .model import Dataset, Hyperparams
from .rng import STREAM_BASELINE, STREAM_DRAWS, STREAM_INIT, STREAM_ITERATION, derived_seed, seeded_rng


@dataclass(frozen=True)
class FitConfig:
    """Optimizer settings.  Defaults follow the training protocol used
    throughout: 2000 Adam iterations at step size 0.05."""

    iterations: int = 2000
    step_size: float = 0.05
    grad: GradConfig = field(default_factory=GradConfig)
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    trace_every: int = 50

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.step_size <= 0:
            raise ValueError("step_size must be > 0")
        if self.trace_every < 1:
            raise ValueError("trace_every must be >= 1")


@dataclass(frozen=True)
class FitResult:
    xi: VariationalParams
    trace: Tuple[Tuple[int, float], ...]  # (iteration, elbo estimate) at that iterate
    tau_used: float
    seed: int


@dataclass(frozen=True)
class PosteriorDraws:
    """Exact surrogate draws with their log-densities.

    `train_log_joint` caches log pi(theta_g, z | X) on the training set once
    attached; importance weights for prediction reuse it for every new
    half-sequence.
    """

    beta_raw: np.ndarray  # (G, M)
    sigma: np.ndarray  # (G,)
    delta: np.ndarray  # (G, E) in {0, 1}
    alpha_raw: np.ndarray  # (G, E)
    log_q: np.ndarray  # (G,)
    train_log_joint: Optional[np.ndarray] = None  # (G,)

    @property
    def n_draws(self) -> int:
        return self.beta_raw.shape[0]

    @property
    def n_times(self) -> int:
        return self.beta_raw.shape[1]

    @property
    def n_channels(self) -> int:
        return self.delta.shape[1]


# ---------------------------------------------------------------------------
# Initialization
# ---------------------------------------------------------------------------

INIT_MEAN_SCALE = 0.01
INIT_SCALE = 0.1
INIT_SIGMA_MEAN = math.log(0.1)


def initialize_variational(n_times: int, n_channels: int, seed: int) -> VariationalParams:
    """Fixed initialization: effect and weight means from N(0, 0.01^2),
    all softplus scales at 0.1, selector logits at 0, sigma median 0.1.

    Draw order from the init stream: beta means then alpha means.
    """
    rng = seeded_rng(seed, STREAM_INIT)
    rawscale = softplus_inv(INIT_SCALE)
    return VariationalParams(
        beta_mean=INIT_MEAN_SCALE * rng.standard_normal(n_times),
        beta_rawscale=np.full(n_times, rawscale),
        sigma_mean=INIT_SIGMA_MEAN,
        sigma_rawscale=rawscale,
        delta_logit=np.zeros(n_channels),
        alpha_mean=INIT_MEAN_SCALE * rng.standard_normal(n_channels),
        alpha_rawscale=np.full(n_channels, rawscale),
    )


# ---------------------------------------------------------------------------
# Fitting
# ---------------------------------------------------------------------------

def fit(data: Dataset, hyper: Hyperparams, cfg: FitConfig,
        xi0: Optional[VariationalParams] = None) -> FitResult:
    """Run Adam on the negative ELBO gradient for exactly cfg.iterations steps.

    Each iteration draws its Monte Carlo noise from an independent stream
    derived from (seed, iteration), so the whole trajectory is reproducible
    bit-for-bit.
    """
    design = pack_design(data, require_labels=True)
    if design.n_half == 0:
        raise EmptyDataset("cannot fit on an empty dataset")
    seed = cfg.grad.seed
    xi = xi0 if xi0 is not None else initialize_variational(design.n_times, design.n_channels, seed)

    flat = xi.to_flat()
    m1 = np.zeros_like(flat)
    m2 = np.zeros_like(flat)
    b1, b2, eps = cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps
    trace = []
    n_times, n_channels = xi.n_times, xi.n_channels

    for it in range(cfg.iterations):
        rng = seeded_rng(seed, STREAM_ITERATION, it)
        xi_it = VariationalParams.from_flat(flat, n_times, n_channels)
        try:
            value, grad = _elbo_value_and_grad(xi_it, design, hyper, cfg.grad, rng)
        except Exception as exc:
            raise NonFiniteGradient(f"iteration {it}: {exc}") from exc
        if it % cfg.trace_every == 0:
            trace.append((it, value))
        g = -grad  # ascend the ELBO
        m1 = b1 * m1 + (1.0 - b1) * g
        m2 = b2 * m2 + (1.0 - b2) * g * g
        t = it + 1
        m1_hat = m1 / (1.0 - b1 ** t)
        m2_hat = m2 / (1.0 - b2 ** t)
        flat = flat - cfg.step_size * m1_hat / (np.sqrt(m2_hat) + eps)

    return FitResult(
        xi=VariationalParams.from_flat(flat, n_times, n_channels),
        trace=tuple(trace),
        tau_used=hyper.tau,
        seed=seed,
    )


def posterior_draws(xi: VariationalParams, n_draws: int, seed: int) -> PosteriorDraws:
    """G exact draws from the surrogate with per-draw log q."""
    if n_draws < 1:
        raise ValueError("n_draws must be >= 1")
    rng = seeded_rng(seed, STREAM_DRAWS)
    noise = _draw_noise(rng, n_draws, xi.n_times, xi.n_channels)
    batch = _transform(xi, noise, relaxed=False, temperature=1.0)
    return PosteriorDraws(
        beta_raw=batch.beta,
        sigma=batch.sigma,
        delta=batch.delta,
        alpha_raw=batch.alpha_raw,
        log_q=batch.log_q,
    )


# ---------------------------------------------------------------------------
# Soft-threshold calibration
# ---------------------------------------------------------------------------

def tau_from_baseline_medians(medians: np.ndarray, ratio: float) -> float:
    """ratio times the median absolute value of the per-time effect medians."""
    return float(ratio * np.median(np.abs(np.asarray(medians, dtype=np.float64))))


def calibrate_tau(data: Dataset, hyper0: Hyperparams, cfg: FitConfig,
                  ratio: float = 0.5, n_draws: int = 2000) -> float:
    """Data-driven soft-threshold level.

    Fits a baseline with tau = 0 on an independent stream derived from the
    main seed, takes per-time posterior medians of the (unthresholded)
    effects, and returns ratio times their median absolute value.
    """
    baseline_hyper = replace(hyper0, tau=0.0)
    baseline_seed = derived_seed(cfg.grad.seed, STREAM_BASELINE)
    baseline_cfg = replace(cfg, grad=replace(cfg.grad, seed=baseline_seed))
    result = fit(data, baseline_hyper, baseline_cfg)
    draws = posterior_draws(result.xi, n_draws, baseline_seed)
    medians = np.median(draws.beta_raw, axis=0)  # tau = 0: beta_tilde == beta_raw
    return tau_from_baseline_medians(medians, ratio)


def fit_with_calibration(data: Dataset, hyper: Hyperparams, cfg: FitConfig,
                         ratio: float = 0.5, tau: Optional[float] = None,
                         n_draws: int = 2000):
    """Calibrate tau (unless given) and run the final fit.

    Returns (FitResult, Hyperparams actually used).
    """
    if tau is None:
        tau = calibrate_tau(data, hyper, cfg, ratio=ratio, n_draws=n_draws)
    hyper_used = replace(hyper, tau=float(tau))
    result = fit(data, hyper_used, cfg)
    return result, hyper_used
