"""Packed dense views of a dataset for batched likelihood work.

All half-sequence epochs are stacked into one (N*6, E*M) matrix so that the
log-odds of L parameter draws reduce to a single GEMM against the vectorized
rank-one coefficient matrices.  Everything downstream of the pack is plain
array math, which keeps repeated evaluation (variational fitting, posterior
draws, importance weighting) fast on a single core.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DimensionMismatch, MissingLabel
from .model import N_STIMULI, Dataset


@dataclass(frozen=True)
class Design:
    """Dataset epochs flattened for batched evaluation."""

    x: np.ndarray  # (N*6, E*M): row (i*6+j-1) is vec(X_ij) with e-major layout
    targets: Optional[np.ndarray]  # (N,) int64 in 0..5, or None if unlabeled
    n_half: int
    n_channels: int
    n_times: int

    @property
    def labeled(self) -> bool:
        return self.targets is not None


def pack_design(data: Dataset, require_labels: bool = False) -> Design:
    """Stack all epochs of `data` into a Design."""
    n = len(data)
    if n == 0:
        return Design(x=np.zeros((0, 0)), targets=np.zeros(0, dtype=np.int64),
                      n_half=0, n_channels=0, n_times=0)
    e, m = data.n_channels, data.n_times
    x = np.empty((n * N_STIMULI, e * m))
    targets = np.empty(n, dtype=np.int64)
    labeled = True
    for i, half in enumerate(data.half_sequences):
        x[i * N_STIMULI:(i + 1) * N_STIMULI] = half.signal_stack().reshape(N_STIMULI, e * m)
        if half.target is None:
            labeled = False
            if require_labels:
                raise MissingLabel(f"half-sequence {half.key} has no target label")
            targets[i] = -1
        else:
            targets[i] = half.target - 1
    return Design(x=x, targets=targets if labeled else None,
                  n_half=n, n_channels=e, n_times=m)


def batched_log_odds(design: Design, beta_tilde: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Log-odds eta for a batch of L draws.

    beta_tilde: (L, M) thresholded effects; weights: (L, E) latent-channel
    weights delta*alpha.  Returns (N, 6, L).
    """
    l, m = beta_tilde.shape
    e = weights.shape[1]
    if weights.shape[0] != l:
        raise DimensionMismatch("beta_tilde and weights batch sizes differ")
    if (e, m) != (design.n_channels, design.n_times):
        raise DimensionMismatch(
            f"draws are E={e}, M={m} but design is "
            f"E={design.n_channels}, M={design.n_times}"
        )
    # vec of the rank-one matrix w b^T in the same e-major layout as design.x
    coef = (weights[:, :, None] * beta_tilde[:, None, :]).reshape(l, e * m)
    eta = design.x @ coef.T  # (N*6, L)
    return eta.reshape(design.n_half, N_STIMULI, l)


def log_odds_adjoint(design: Design, grad_eta: np.ndarray,
                     beta_tilde: np.ndarray, weights: np.ndarray):
    """Backpropagate d(objective)/d(eta) to beta_tilde and weights.

    grad_eta: (N, 6, L).  Returns (grad_beta_tilde (L, M), grad_weights (L, E)).
    """
    l, m = beta_tilde.shape
    e = weights.shape[1]
    flat = grad_eta.reshape(design.n_half * N_STIMULI, l)
    grad_coef = (flat.T @ design.x).reshape(l, e, m)
    grad_bt = np.einsum("lem,le->lm", grad_coef, weights)
    grad_w = np.einsum("lem,lm->le", grad_coef, beta_tilde)
    return grad_bt, grad_w


def batched_log_softmax_pick(eta: np.ndarray, targets: np.ndarray):
    """Per-half-sequence log-probability of the target and the softmax residual.

    eta: (N, 6, L); targets: (N,) in 0..5.  Returns (loglik (L,), resid (N, 6, L))
    where resid = onehot(target) - softmax(eta), the likelihood adjoint.
    """
    n = eta.shape[0]
    shift = eta.max(axis=1, keepdims=True)
    expd = np.exp(eta - shift)
    denom = expd.sum(axis=1, keepdims=True)
    softmax = expd / denom
    idx = np.arange(n)
    log_p = (eta[idx, targets] - shift[:, 0] - np.log(denom[:, 0]))  # (N, L)
    resid = -softmax
    resid[idx, targets] += 1.0
    return log_p.sum(axis=0), resid
