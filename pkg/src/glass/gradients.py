"""Monte Carlo evidence-lower-bound estimation and its pathwise gradient.

The surrogate family is a product of independent distributions: normals for
the raw effects and raw weights, a log-normal for the random-walk scale, and
Bernoullis for the channel selectors.  Scales live on the whole real line and
map to positive values through the softplus.  All continuous coordinates are
sampled by reparameterization; the discrete selectors use a binary-concrete
relaxation at a fixed temperature during gradient evaluation and exact
Bernoulli draws everywhere else.

The gradient is the exact derivative of the fixed-seed estimator: every
sampled quantity is written as a deterministic function of the variational
parameters and frozen noise, and the adjoints of that computation graph are
accumulated by hand.  A central-finite-difference checker provides the
independent oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import expit as sigmoid

from .design import Design, batched_log_odds, batched_log_softmax_pick, log_odds_adjoint, pack_design
from .errors import DimensionMismatch, NonFinite
from .model import LOG_2PI, Dataset, Hyperparams, ModelParams
from .rng import seeded_rng


def softplus(x):
    """log(1 + exp(x)), overflow-safe."""
    return np.logaddexp(0.0, x)


def softplus_inv(y: float) -> float:
    """Inverse of softplus on y > 0."""
    return math.log(math.expm1(y))


# ---------------------------------------------------------------------------
# Variational parameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VariationalParams:
    """Surrogate-family parameters for every model coordinate.

    The flat layout (used by the optimizer and the gradient) is
    [beta_mean, beta_rawscale, sigma_mean, sigma_rawscale, delta_logit,
    alpha_mean, alpha_rawscale], of total length 2M + 2 + 3E.
    """

    beta_mean: np.ndarray  # (M,)
    beta_rawscale: np.ndarray  # (M,)
    sigma_mean: float
    sigma_rawscale: float
    delta_logit: np.ndarray  # (E,)
    alpha_mean: np.ndarray  # (E,)
    alpha_rawscale: np.ndarray  # (E,)

    def __post_init__(self):
        for name in ("beta_mean", "beta_rawscale", "delta_logit", "alpha_mean", "alpha_rawscale"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        if self.beta_mean.shape != self.beta_rawscale.shape:
            raise DimensionMismatch("beta_mean and beta_rawscale lengths differ")
        if not (self.delta_logit.shape == self.alpha_mean.shape == self.alpha_rawscale.shape):
            raise DimensionMismatch("delta_logit, alpha_mean, alpha_rawscale lengths differ")

    @property
    def n_times(self) -> int:
        return self.beta_mean.shape[0]

    @property
    def n_channels(self) -> int:
        return self.delta_logit.shape[0]

    @property
    def n_flat(self) -> int:
        return 2 * self.n_times + 2 + 3 * self.n_channels

    def to_flat(self) -> np.ndarray:
        return np.concatenate([
            self.beta_mean, self.beta_rawscale,
            [self.sigma_mean, self.sigma_rawscale],
            self.delta_logit, self.alpha_mean, self.alpha_rawscale,
        ])

    @classmethod
    def from_flat(cls, flat: np.ndarray, n_times: int, n_channels: int) -> "VariationalParams":
        flat = np.asarray(flat, dtype=np.float64)
        m, e = n_times, n_channels
        if flat.shape != (2 * m + 2 + 3 * e,):
            raise DimensionMismatch(f"flat vector must have length {2 * m + 2 + 3 * e}, got {flat.shape}")
        return cls(
            beta_mean=flat[:m].copy(),
            beta_rawscale=flat[m:2 * m].copy(),
            sigma_mean=float(flat[2 * m]),
            sigma_rawscale=float(flat[2 * m + 1]),
            delta_logit=flat[2 * m + 2:2 * m + 2 + e].copy(),
            alpha_mean=flat[2 * m + 2 + e:2 * m + 2 + 2 * e].copy(),
            alpha_rawscale=flat[2 * m + 2 + 2 * e:].copy(),
        )


@dataclass(frozen=True)
class GradConfig:
    """Settings for stochastic objective and gradient evaluation."""

    mc_samples: int = 10
    relax_temperature: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.mc_samples < 1:
            raise ValueError("mc_samples must be >= 1")
        if self.relax_temperature <= 0:
            raise ValueError("relax_temperature must be > 0")


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Noise:
    """Frozen driving noise for a batch of draws, in documented draw order:
    normal for beta, normal for sigma, uniform for delta, normal for alpha."""

    eps_beta: np.ndarray  # (L, M)
    eps_sigma: np.ndarray  # (L,)
    u_delta: np.ndarray  # (L, E)
    eps_alpha: np.ndarray  # (L, E)


def _draw_noise(rng: np.random.Generator, n_draws: int, n_times: int, n_channels: int) -> _Noise:
    return _Noise(
        eps_beta=rng.standard_normal((n_draws, n_times)),
        eps_sigma=rng.standard_normal(n_draws),
        u_delta=rng.random((n_draws, n_channels)),
        eps_alpha=rng.standard_normal((n_draws, n_channels)),
    )


@dataclass(frozen=True)
class _Batch:
    """Sampled coordinates plus cached intermediates for the adjoint pass."""

    beta: np.ndarray  # (L, M)
    log_sigma: np.ndarray  # (L,)
    sigma: np.ndarray  # (L,)
    delta: np.ndarray  # (L, E); fractional when relaxed
    presigmoid: Optional[np.ndarray]  # (L, E) y with delta = sigmoid(y); None when exact
    logistic: Optional[np.ndarray]  # (L, E) logistic noise; None when exact
    alpha_raw: np.ndarray  # (L, E)
    norm: np.ndarray  # (L,)
    alpha: np.ndarray  # (L, E)
    log_q: np.ndarray  # (L,)


def _transform(xi: VariationalParams, noise: _Noise, relaxed: bool, temperature: float) -> _Batch:
    s_beta = softplus(xi.beta_rawscale)
    s_sigma = softplus(xi.sigma_rawscale)
    s_alpha = softplus(xi.alpha_rawscale)

    beta = xi.beta_mean + s_beta * noise.eps_beta
    log_sigma = xi.sigma_mean + s_sigma * noise.eps_sigma
    sigma = np.exp(log_sigma)
    alpha_raw = xi.alpha_mean + s_alpha * noise.eps_alpha
    norm = np.maximum(np.linalg.norm(alpha_raw, axis=1), 1e-300)
    alpha = alpha_raw / norm[:, None]

    n_draws = beta.shape[0]
    log_q = np.empty(n_draws)
    log_q[:] = (
        -0.5 * (xi.n_times + 1 + xi.n_channels) * LOG_2PI
        - np.log(s_beta).sum() - math.log(s_sigma) - np.log(s_alpha).sum()
    )
    log_q -= 0.5 * (noise.eps_beta ** 2).sum(axis=1)
    log_q -= 0.5 * noise.eps_sigma ** 2 + log_sigma
    log_q -= 0.5 * (noise.eps_alpha ** 2).sum(axis=1)

    if relaxed:
        logistic = np.log(noise.u_delta) - np.log1p(-noise.u_delta)
        y = (xi.delta_logit + logistic) / temperature
        delta = sigmoid(y)
        # binary-concrete density: the logistic noise is the pre-sigmoid
        # residual z = t*y - logit, so the noise-only part is constant in xi
        log_q += (
            math.log(temperature) * xi.n_channels
            - logistic.sum(axis=1) - 2.0 * softplus(-logistic).sum(axis=1)
            + softplus(y).sum(axis=1) + softplus(-y).sum(axis=1)
        )
        return _Batch(beta, log_sigma, sigma, delta, y, logistic, alpha_raw, norm, alpha, log_q)

    delta = (noise.u_delta < sigmoid(xi.delta_logit)).astype(np.float64)
    log_q += -(delta * softplus(-xi.delta_logit) + (1.0 - delta) * softplus(xi.delta_logit)).sum(axis=1)
    return _Batch(beta, log_sigma, sigma, delta, None, None, alpha_raw, norm, alpha, log_q)


def sample_surrogate(xi: VariationalParams, rng: np.random.Generator,
                     relaxed: bool = False, temperature: float = 0.5):
    """Draw one parameter sample from the surrogate.

    Returns (ModelParams, log_q).  With relaxed=True the selectors are
    binary-concrete samples in (0, 1) and log_q is the relaxed density.
    """
    noise = _draw_noise(rng, 1, xi.n_times, xi.n_channels)
    batch = _transform(xi, noise, relaxed, temperature)
    theta = ModelParams(
        beta_raw=batch.beta[0],
        sigma=float(batch.sigma[0]),
        delta=batch.delta[0],
        alpha_raw=batch.alpha_raw[0],
    )
    return theta, float(batch.log_q[0])


# ---------------------------------------------------------------------------
# Joint density of a batch
# ---------------------------------------------------------------------------

def _batch_log_prior_continuous(batch: _Batch, hyper: Hyperparams):
    """Random-walk, half-Cauchy and raw-weight prior terms, per draw."""
    n_times = batch.beta.shape[1]
    n_channels = batch.alpha_raw.shape[1]
    diffs = np.diff(batch.beta, axis=1, prepend=0.0)
    sig2 = batch.sigma ** 2
    rw = -0.5 * n_times * LOG_2PI - n_times * batch.log_sigma - (diffs ** 2).sum(axis=1) / (2.0 * sig2)
    a = hyper.cauchy_scale
    hc = math.log(2.0) - math.log(math.pi * a) - np.log1p((batch.sigma / a) ** 2)
    aprior = -0.5 * n_channels * LOG_2PI - 0.5 * (batch.alpha_raw ** 2).sum(axis=1)
    return rw, hc, aprior, diffs


def _batch_beta_tilde(batch: _Batch, tau: float):
    mask = (np.abs(batch.beta) > tau).astype(np.float64)
    bt = np.sign(batch.beta) * (np.abs(batch.beta) - tau) * mask
    return bt, mask


def _delta_residual(presigmoid: np.ndarray, temperature: float, prior_logit: float) -> np.ndarray:
    """Pre-sigmoid residual z = t*y - logit of a binary-concrete density."""
    return temperature * presigmoid - prior_logit


def _batch_joint_terms(design: Design, hyper: Hyperparams, batch: _Batch,
                       relaxed: bool, temperature: float):
    """Per-draw joint log-density terms and the likelihood adjoint inputs."""
    beta_tilde, mask = _batch_beta_tilde(batch, hyper.tau)
    weights = batch.delta * batch.alpha
    if design.n_half > 0:
        eta = batched_log_odds(design, beta_tilde, weights)
        loglik, resid = batched_log_softmax_pick(eta, design.targets)
    else:
        loglik = np.zeros(batch.beta.shape[0])
        resid = None
    rw, hc, aprior, diffs = _batch_log_prior_continuous(batch, hyper)
    prior_logit = math.log(hyper.delta_prior) - math.log1p(-hyper.delta_prior)
    if relaxed:
        z0 = _delta_residual(batch.presigmoid, temperature, prior_logit)
        dprior = (
            math.log(temperature) * batch.presigmoid.shape[1]
            - z0.sum(axis=1) - 2.0 * softplus(-z0).sum(axis=1)
            + softplus(batch.presigmoid).sum(axis=1) + softplus(-batch.presigmoid).sum(axis=1)
        )
    else:
        z0 = None
        dprior = -(batch.delta * softplus(-prior_logit)
                   + (1.0 - batch.delta) * softplus(prior_logit)).sum(axis=1)
    joint = loglik + rw + hc + dprior + aprior
    return {
        "joint": joint, "loglik": loglik, "rw": rw, "hc": hc,
        "dprior": dprior, "aprior": aprior,
        "beta_tilde": beta_tilde, "mask": mask, "weights": weights,
        "resid": resid, "diffs": diffs, "z0": z0,
    }


# ---------------------------------------------------------------------------
# Estimate and gradient
# ---------------------------------------------------------------------------

def _per_draw_elbo(xi: VariationalParams, design: Design, hyper: Hyperparams,
                   cfg: GradConfig, rng: np.random.Generator, relaxed: bool):
    noise = _draw_noise(rng, cfg.mc_samples, xi.n_times, xi.n_channels)
    batch = _transform(xi, noise, relaxed, cfg.relax_temperature)
    terms = _batch_joint_terms(design, hyper, batch, relaxed, cfg.relax_temperature)
    values = terms["joint"] - batch.log_q
    return values, noise, batch, terms


def _check_design(xi: VariationalParams, design: Design):
    if design.n_half and (design.n_channels, design.n_times) != (xi.n_channels, xi.n_times):
        raise DimensionMismatch(
            f"variational parameters are E={xi.n_channels}, M={xi.n_times} but data is "
            f"E={design.n_channels}, M={design.n_times}"
        )


def elbo_estimate(xi: VariationalParams, data: Dataset, hyper: Hyperparams,
                  cfg: GradConfig, relaxed: bool = True) -> float:
    """Monte Carlo estimate of the evidence lower bound, deterministic per seed."""
    design = data if isinstance(data, Design) else pack_design(data, require_labels=True)
    _check_design(xi, design)
    rng = seeded_rng(cfg.seed)
    values, _, _, _ = _per_draw_elbo(xi, design, hyper, cfg, rng, relaxed)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise NonFinite(f"non-finite objective at draw {bad[0]}")
    return float(values.mean())


def elbo_gradient(xi: VariationalParams, data: Dataset, hyper: Hyperparams,
                  cfg: GradConfig) -> np.ndarray:
    """Pathwise gradient of `elbo_estimate` at fixed seed, in flat layout."""
    design = data if isinstance(data, Design) else pack_design(data, require_labels=True)
    _check_design(xi, design)
    rng = seeded_rng(cfg.seed)
    _, grad = _elbo_value_and_grad(xi, design, hyper, cfg, rng)
    return grad


def _elbo_value_and_grad(xi: VariationalParams, design: Design, hyper: Hyperparams,
                         cfg: GradConfig, rng: np.random.Generator):
    """Shared forward+adjoint pass: returns (mean per-draw elbo, flat gradient)."""
    temperature = cfg.relax_temperature
    values, noise, batch, terms = _per_draw_elbo(xi, design, hyper, cfg, rng, relaxed=True)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise NonFinite(f"non-finite objective at draw {bad[0]}")

    beta_tilde, mask, weights = terms["beta_tilde"], terms["mask"], terms["weights"]

    # --- likelihood adjoints ---
    if terms["resid"] is not None:
        grad_bt, grad_w = log_odds_adjoint(design, terms["resid"], beta_tilde, weights)
    else:
        grad_bt = np.zeros_like(beta_tilde)
        grad_w = np.zeros_like(weights)
    dll_dbeta = grad_bt * mask
    dll_ddelta = grad_w * batch.alpha
    dll_dalpha = grad_w * batch.delta
    inner = (dll_dalpha * batch.alpha).sum(axis=1, keepdims=True)
    dll_daraw = (dll_dalpha - batch.alpha * inner) / batch.norm[:, None]

    # --- prior adjoints ---
    sig2 = batch.sigma ** 2
    v = terms["diffs"] / sig2[:, None]
    drw_dbeta = np.diff(v, axis=1, append=0.0)
    drw_dlogsig = -xi.n_times + (terms["diffs"] ** 2).sum(axis=1) / sig2
    a = hyper.cauchy_scale
    dhc_dlogsig = -2.0 * sig2 / (a * a + sig2)

    y = batch.presigmoid
    z0 = terms["z0"]
    ddp_dlogit = -1.0 + 2.0 * sigmoid(-z0) + (sigmoid(y) - sigmoid(-y)) / temperature

    da_dbeta = dll_dbeta + drw_dbeta
    da_dlogsig = drw_dlogsig + dhc_dlogsig
    da_daraw = dll_daraw - batch.alpha_raw

    # --- entropy (log q) adjoints, subtracted ---
    s_beta = softplus(xi.beta_rawscale)
    s_sigma = softplus(xi.sigma_rawscale)
    s_alpha = softplus(xi.alpha_rawscale)
    sig_rb = sigmoid(xi.beta_rawscale)
    sig_rs = sigmoid(xi.sigma_rawscale)
    sig_ra = sigmoid(xi.alpha_rawscale)
    dqd_dlogit = (sigmoid(y) - sigmoid(-y)) / temperature

    g_beta_mean = da_dbeta.mean(axis=0)
    g_beta_rawscale = (da_dbeta * noise.eps_beta).mean(axis=0) * sig_rb + sig_rb / s_beta
    g_sigma_mean = float(da_dlogsig.mean() + 1.0)
    g_sigma_rawscale = float(sig_rs * ((da_dlogsig * noise.eps_sigma).mean()
                                       + 1.0 / s_sigma + noise.eps_sigma.mean()))
    g_delta_logit = (dll_ddelta * batch.delta * (1.0 - batch.delta) / temperature
                     + ddp_dlogit - dqd_dlogit).mean(axis=0)
    g_alpha_mean = da_daraw.mean(axis=0)
    g_alpha_rawscale = (da_daraw * noise.eps_alpha).mean(axis=0) * sig_ra + sig_ra / s_alpha

    grad = np.concatenate([
        g_beta_mean, g_beta_rawscale,
        [g_sigma_mean, g_sigma_rawscale],
        g_delta_logit, g_alpha_mean, g_alpha_rawscale,
    ])
    if not np.isfinite(grad).all():
        raise NonFinite("non-finite gradient")
    return float(values.mean()), grad


# ---------------------------------------------------------------------------
# Finite-difference oracle
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GradientCheck:
    """Comparison of the analytic gradient against central finite differences."""

    max_rel_error: float  # over coordinates away from soft-threshold kinks
    rel_errors: np.ndarray  # per flat coordinate; NaN where excluded
    excluded: np.ndarray  # bool mask of coordinates near a kink
    analytic: np.ndarray
    numeric: np.ndarray


def check_gradient(xi: VariationalParams, data: Dataset, hyper: Hyperparams,
                   cfg: GradConfig, eps: float = 1e-5) -> GradientCheck:
    """Central finite differences of the fixed-seed estimate vs the analytic gradient.

    Coordinates whose perturbation can cross a soft-threshold kink in any
    draw are excluded from the max and reported separately.
    """
    if not 1e-6 <= eps <= 1e-3:
        raise ValueError("eps must be in [1e-6, 1e-3]")
    design = data if isinstance(data, Design) else pack_design(data, require_labels=True)
    analytic = elbo_gradient(xi, design, hyper, cfg)

    flat = xi.to_flat()
    numeric = np.empty_like(flat)
    m, e = xi.n_times, xi.n_channels
    for k in range(flat.size):
        bump = np.zeros_like(flat)
        bump[k] = eps
        hi = elbo_estimate(VariationalParams.from_flat(flat + bump, m, e), design, hyper, cfg)
        lo = elbo_estimate(VariationalParams.from_flat(flat - bump, m, e), design, hyper, cfg)
        numeric[k] = (hi - lo) / (2.0 * eps)

    # kink filter: a perturbation of size eps moves beta_lm by at most
    # eps * max(1, |eps_beta_lm|); flag coordinates within a safety factor
    rng = seeded_rng(cfg.seed)
    noise = _draw_noise(rng, cfg.mc_samples, m, e)
    batch = _transform(xi, noise, relaxed=True, temperature=cfg.relax_temperature)
    margin = 10.0 * eps * np.maximum(1.0, np.abs(noise.eps_beta))
    near_kink = (np.abs(np.abs(batch.beta) - hyper.tau) <= margin).any(axis=0)  # (M,)
    excluded = np.zeros(flat.size, dtype=bool)
    excluded[:m] = near_kink
    excluded[m:2 * m] = near_kink

    rel = np.abs(analytic - numeric) / np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
    rel_masked = np.where(excluded, np.nan, rel)
    ok = rel_masked[~excluded]
    max_rel = float(ok.max()) if ok.size else 0.0
    return GradientCheck(max_rel_error=max_rel, rel_errors=rel_masked,
                         excluded=excluded, analytic=analytic, numeric=numeric)
