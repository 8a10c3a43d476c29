"""Importance-sampled posterior prediction and character decoding.

Surrogate draws are reweighted by the ratio of the training joint density to
the surrogate density; the weighted average of per-draw softmax probabilities
approximates the posterior predictive over the six stimuli.  Repeated
half-sequences for the same character are fused by multiplying their
predictive simplices.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .design import batched_log_odds, batched_log_softmax_pick, pack_design
from .errors import DegenerateWeights, DimensionMismatch, EmptyList, MixedOrientation
from .fitting import PosteriorDraws
from .gradients import softplus
from .model import (
    LOG_2PI,
    N_STIMULI,
    Dataset,
    HalfSequence,
    Hyperparams,
    stable_softmax,
)

DEGENERATE_WEIGHT_FRACTION = 0.999
FUSION_FLOOR = 1e-300


@dataclass(frozen=True)
class PredictiveDist:
    """Posterior predictive over the six stimuli of one half-sequence."""

    probs: np.ndarray  # 6-simplex
    ess: float  # effective sample size of the importance weights
    orientation: Optional[str] = None  # "row" / "column" metadata for fusion checks

    def __post_init__(self):
        object.__setattr__(self, "probs", np.asarray(self.probs, dtype=np.float64))
        if self.probs.shape != (N_STIMULI,):
            raise DimensionMismatch(f"probs must have shape ({N_STIMULI},)")


@dataclass(frozen=True)
class Keyboard:
    """6x6 grid of distinct symbols; default is A-Z, 1-9 and underscore."""

    rows: tuple = ("ABCDEF", "GHIJKL", "MNOPQR", "STUVWX", "YZ1234", "56789_")

    def __post_init__(self):
        rows = tuple(str(r) for r in self.rows)
        if len(rows) != 6 or any(len(r) != 6 for r in rows):
            raise ValueError("keyboard must be a 6x6 grid")
        if len({ch for r in rows for ch in r}) != 36:
            raise ValueError("keyboard symbols must be 36 distinct characters")
        object.__setattr__(self, "rows", rows)

    def symbol(self, row_j: int, col_j: int) -> str:
        """Symbol at 1-based (row, column)."""
        return self.rows[row_j - 1][col_j - 1]

    def position(self, symbol: str):
        """1-based (row, column) of a symbol."""
        for i, r in enumerate(self.rows):
            j = r.find(symbol)
            if j >= 0:
                return i + 1, j + 1
        raise KeyError(f"symbol {symbol!r} not on the keyboard")


# ---------------------------------------------------------------------------
# Training joint densities per draw
# ---------------------------------------------------------------------------

def _draws_derived(draws: PosteriorDraws):
    norms = np.maximum(np.linalg.norm(draws.alpha_raw, axis=1), 1e-300)
    alpha = draws.alpha_raw / norms[:, None]
    return alpha, draws.delta * alpha


def training_log_joints(draws: PosteriorDraws, data: Dataset, hyper: Hyperparams) -> np.ndarray:
    """log pi(theta_g, z | X_1..X_N) on the labeled training set, per draw."""
    design = pack_design(data, require_labels=True)
    if (design.n_channels, design.n_times) != (draws.n_channels, draws.n_times):
        raise DimensionMismatch(
            f"draws are E={draws.n_channels}, M={draws.n_times} but data is "
            f"E={design.n_channels}, M={design.n_times}"
        )
    g, m, e = draws.n_draws, draws.n_times, draws.n_channels
    beta_tilde = np.sign(draws.beta_raw) * np.maximum(np.abs(draws.beta_raw) - hyper.tau, 0.0)
    _, weights = _draws_derived(draws)
    eta = batched_log_odds(design, beta_tilde, weights)
    loglik, _ = batched_log_softmax_pick(eta, design.targets)

    diffs = np.diff(draws.beta_raw, axis=1, prepend=0.0)
    log_sigma = np.log(draws.sigma)
    sig2 = draws.sigma ** 2
    rw = -0.5 * m * LOG_2PI - m * log_sigma - (diffs ** 2).sum(axis=1) / (2.0 * sig2)
    a = hyper.cauchy_scale
    hc = math.log(2.0) - math.log(math.pi * a) - np.log1p((draws.sigma / a) ** 2)
    prior_logit = math.log(hyper.delta_prior) - math.log1p(-hyper.delta_prior)
    dprior = -(draws.delta * softplus(-prior_logit)
               + (1.0 - draws.delta) * softplus(prior_logit)).sum(axis=1)
    aprior = -0.5 * e * LOG_2PI - 0.5 * (draws.alpha_raw ** 2).sum(axis=1)
    return loglik + rw + hc + dprior + aprior


def attach_training_log_joints(draws: PosteriorDraws, data: Dataset,
                               hyper: Hyperparams) -> PosteriorDraws:
    """Cache the training joint log-densities inside the draws."""
    return replace(draws, train_log_joint=training_log_joints(draws, data, hyper))


# ---------------------------------------------------------------------------
# Posterior predictive
# ---------------------------------------------------------------------------

def normalized_importance_weights(data_loglik_per_draw: np.ndarray,
                                  log_q: np.ndarray) -> np.ndarray:
    """Self-normalized weights exp(log joint - log q), max-subtracted."""
    logw = np.asarray(data_loglik_per_draw, dtype=np.float64) - np.asarray(log_q, dtype=np.float64)
    logw -= logw.max()
    w = np.exp(logw)
    return w / w.sum()


def predictive_distribution(draws: PosteriorDraws, data_loglik_per_draw: np.ndarray,
                            half_new: HalfSequence, hyper: Hyperparams,
                            unweighted: bool = False) -> PredictiveDist:
    """Importance-sampled posterior predictive for a new half-sequence.

    `data_loglik_per_draw` holds the training joint log-densities
    log pi(theta_g, z | X_1..X_N); with unweighted=True the draws are
    averaged plainly instead (for comparison only).
    """
    if draws.n_draws == 0:
        raise ValueError("draws must be nonempty")
    if (half_new.n_channels, half_new.n_times) != (draws.n_channels, draws.n_times):
        raise DimensionMismatch(
            f"draws are E={draws.n_channels}, M={draws.n_times} but half-sequence is "
            f"E={half_new.n_channels}, M={half_new.n_times}"
        )
    g = draws.n_draws
    if unweighted:
        w = np.full(g, 1.0 / g)
    else:
        data_loglik_per_draw = np.asarray(data_loglik_per_draw, dtype=np.float64)
        if data_loglik_per_draw.shape != (g,):
            raise DimensionMismatch("one training log-joint per draw is required")
        w = normalized_importance_weights(data_loglik_per_draw, draws.log_q)
    if w.max() > DEGENERATE_WEIGHT_FRACTION:
        warnings.warn(
            f"a single posterior draw carries {w.max():.4f} of the importance mass",
            DegenerateWeights,
        )
    ess = float(1.0 / (w ** 2).sum())

    beta_tilde = np.sign(draws.beta_raw) * np.maximum(np.abs(draws.beta_raw) - hyper.tau, 0.0)
    _, weights = _draws_derived(draws)
    stack = half_new.signal_stack().reshape(N_STIMULI, -1)  # (6, E*M)
    coef = (weights[:, :, None] * beta_tilde[:, None, :]).reshape(g, -1)
    eta = stack @ coef.T  # (6, G)
    probs_per_draw = stable_softmax(eta.T)  # (G, 6)
    probs = w @ probs_per_draw
    probs /= probs.sum()
    return PredictiveDist(probs=probs, ess=ess, orientation=half_new.half_type)


def fuse_halfsequences(dists: Sequence[PredictiveDist]) -> np.ndarray:
    """Multiply predictive simplices across repeated half-sequences and renormalize.

    Inputs are floored at a tiny positive value so an exact zero in one
    distribution cannot annihilate the product.
    """
    if len(dists) == 0:
        raise EmptyList("need at least one predictive distribution to fuse")
    orientations = {d.orientation for d in dists if d.orientation is not None}
    if len(orientations) > 1:
        raise MixedOrientation(f"cannot fuse {sorted(orientations)} distributions together")
    log_total = np.zeros(N_STIMULI)
    for d in dists:
        log_total += np.log(np.maximum(d.probs, FUSION_FLOOR))
    return stable_softmax(log_total)


def decode_character(row_dist: np.ndarray, col_dist: np.ndarray, kb: Keyboard):
    """Argmax row and column (ties to the smallest index) and their grid symbol.

    Returns (symbol, row_j, col_j) with 1-based stimulus numbers.
    """
    row_probs = row_dist.probs if isinstance(row_dist, PredictiveDist) else np.asarray(row_dist)
    col_probs = col_dist.probs if isinstance(col_dist, PredictiveDist) else np.asarray(col_dist)
    row_j = int(np.argmax(row_probs)) + 1
    col_j = int(np.argmax(col_probs)) + 1
    return kb.symbol(row_j, col_j), row_j, col_j
