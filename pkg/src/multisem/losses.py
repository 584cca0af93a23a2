"""Loss kernels for the two classifier heads, with hand-derived gradients.

Kernels take logits for one sample (shape ``(K,)``) or a batch (``(N, K)``)
and return a :class:`LossValueGrad` holding the loss summed over samples and
its gradient with respect to every logit. Logarithms
are natural. Log-probabilities are clamped to ``[log(EPS), log(1 - EPS)]`` so
saturated logits give large but finite losses; gradients use the unclamped
closed forms.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from multisem.errors import DimensionMismatch

EPS = 1e-12
_LOG_LO = np.log(EPS)
_LOG_HI = np.log1p(-EPS)


@dataclass(frozen=True)
class LossValueGrad:
    value: float
    grad: np.ndarray


@dataclass(frozen=True)
class FocalConfig:
    alpha: np.ndarray | float = 1.0
    gamma: float = 2.0

    def weights(self, t):
        a = np.asarray(self.alpha, dtype=float)
        if a.ndim == 0:
            a = np.full(t, float(a))
        if a.shape != (t,):
            raise DimensionMismatch(f"focal alpha has length {a.shape[0]}, expected {t}")
        return a


def inverse_frequency_alpha(targets):
    """Per-class focal weights proportional to inverse label frequency, mean 1.

    ``targets`` is an (N, T) 0/1 matrix. Classes never seen get weight 0.
    """
    counts = np.asarray(targets, dtype=float).sum(axis=0)
    inv = np.divide(1.0, counts, out=np.zeros_like(counts), where=counts > 0)
    seen = counts > 0
    if seen.any():
        inv[seen] *= seen.sum() / inv[seen].sum()
    return inv


def softmax(z):
    z = np.asarray(z, dtype=float)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(z):
    z = np.asarray(z, dtype=float)
    shifted = z - z.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def sigmoid_vec(z):
    z = np.asarray(z, dtype=float)
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def _clamp_log(logp):
    return np.clip(logp, _LOG_LO, _LOG_HI)


def _check_same_length(z, y):
    if z.shape != y.shape:
        raise DimensionMismatch(f"logits have shape {z.shape}, target has shape {y.shape}")


def focal_fine_loss(z, y, cfg: FocalConfig = FocalConfig()) -> LossValueGrad:
    """Focal loss over a softmax fine head with a multi-hot target.

    value = -sum_t alpha_t * y_t * (1 - p_t)**gamma * log p_t,  p = softmax(z)
    """
    z = np.asarray(z, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_same_length(z, y)
    w = cfg.weights(z.shape[-1]) * y
    gamma = float(cfg.gamma)
    p = softmax(z)
    logp = log_softmax(z)
    q = 1.0 - p
    mod = q**gamma
    value = -np.sum(w * mod * _clamp_log(logp))

    # h_t = p_t * dL/dp_t ; dL/dz_j = h_j - p_j * sum_t h_t
    h = -w * mod
    if gamma != 0.0:
        # q**(gamma-1) diverges at q=0 for gamma<1, but the product with log p -> 0 there
        dmod = np.zeros_like(q)
        np.power(q, gamma - 1.0, out=dmod, where=q > 0)
        h = h + w * gamma * dmod * p * logp
    grad = h - p * h.sum(axis=-1, keepdims=True)
    return LossValueGrad(float(value), grad)


def bce_fine_loss(z, y) -> LossValueGrad:
    """Binary cross-entropy over a sigmoid fine head."""
    z = np.asarray(z, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_same_length(z, y)
    log_p = _clamp_log(-np.logaddexp(0.0, -z))
    log_1mp = _clamp_log(-np.logaddexp(0.0, z))
    value = -np.sum(y * log_p + (1.0 - y) * log_1mp)
    return LossValueGrad(float(value), sigmoid_vec(z) - y)


def coarse_ce_loss(z, index) -> LossValueGrad:
    """Softmax cross-entropy against the true coarse class ``index`` (int or int array)."""
    z = np.asarray(z, dtype=float)
    index = np.asarray(index, dtype=int)
    if index.shape != z.shape[:-1]:
        raise DimensionMismatch(f"{index.size} coarse targets for logits of shape {z.shape}")
    if np.any(index < 0) or np.any(index >= z.shape[-1]):
        raise IndexError(f"coarse index out of range for {z.shape[-1]} classes")
    onehot = np.zeros_like(z)
    np.put_along_axis(onehot, index[..., None], 1.0, axis=-1)
    value = -np.sum(onehot * _clamp_log(log_softmax(z)))
    return LossValueGrad(float(value), softmax(z) - onehot)


@dataclass(frozen=True)
class TotalLoss:
    value: float
    fine_grad: np.ndarray | None
    coarse_grad: np.ndarray | None


def total_loss(fine: LossValueGrad | None, coarse: LossValueGrad | None) -> TotalLoss:
    """Sum of the two head losses; a missing head contributes zero."""
    value = (fine.value if fine is not None else 0.0) + (coarse.value if coarse is not None else 0.0)
    return TotalLoss(
        value,
        fine.grad if fine is not None else None,
        coarse.grad if coarse is not None else None,
    )


def finite_diff_check(fn: Callable[..., LossValueGrad], z, *args, h=1e-6) -> float:
    """Max relative error between ``fn``'s analytic gradient and central differences."""
    if h <= 0:
        raise ValueError("step must be positive")
    z = np.array(z, dtype=float)
    analytic = np.asarray(fn(z, *args).grad, dtype=float)
    numeric = np.empty_like(z)
    for i in range(z.size):
        step = np.zeros_like(z)
        step.flat[i] = h
        numeric.flat[i] = (fn(z + step, *args).value - fn(z - step, *args).value) / (2 * h)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / denom))
