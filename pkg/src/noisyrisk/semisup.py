"""Semi-supervised pieces for the co-divide methods.

Soft labels are ``(n, 2)`` arrays whose rows sum to one. Everything here is a
pure function of its inputs and an explicit ``numpy.random.Generator``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nnet import PLAIN, PROB_FLOOR, CostWeights

EPS = 1e-12


@dataclass(frozen=True)
class SemiConfig:
    temperature: float = 0.5
    alpha: float = 4.0
    n_aug: int = 2
    aug_scale: float = 0.1  # multiplied by the per-dimension train feature std
    lambda_u: float = 25.0
    rampup_epochs: int = 16
    prior_weight: float = 5.0  # KL(class prior || mean prediction) regularizer; 0 disables

    def validate(self) -> None:
        if not self.temperature > 0:
            raise ValueError("temperature must be > 0")
        if not self.alpha > 0:
            raise ValueError("alpha must be > 0")
        if int(self.n_aug) != self.n_aug or self.n_aug < 1:
            raise ValueError("n_aug must be an integer >= 1")
        if self.aug_scale < 0 or self.lambda_u < 0 or self.prior_weight < 0:
            raise ValueError("aug_scale, lambda_u and prior_weight must be >= 0")
        if self.rampup_epochs < 0:
            raise ValueError("rampup_epochs must be >= 0")


def augment(features: np.ndarray, sigma, rng: np.random.Generator) -> np.ndarray:
    """Add zero-mean Gaussian noise with per-dimension scale ``sigma`` (scalar or vector)."""
    x = np.asarray(features, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    if (sigma < 0).any():
        raise ValueError("sigma must be >= 0")
    if not sigma.any():
        return x.copy()
    return x + rng.standard_normal(x.shape) * sigma


def co_refine(observed_labels: np.ndarray, clean_posterior: np.ndarray, avg_pred: np.ndarray) -> np.ndarray:
    """Blend the one-hot observed label with the model's prediction: ``w*onehot(y) + (1-w)*p``."""
    y = np.atleast_1d(np.asarray(observed_labels, dtype=np.int64))
    w = np.atleast_1d(np.asarray(clean_posterior, dtype=np.float64))[:, None]
    p = np.atleast_2d(np.asarray(avg_pred, dtype=np.float64))
    if ((w < 0) | (w > 1)).any():
        raise ValueError("clean posterior must lie in [0, 1]")
    return w * np.eye(2)[y] + (1.0 - w) * p


def co_guess(predictions) -> np.ndarray:
    """Average a list of soft-label arrays (both networks, all augmentations) and renormalize."""
    preds = [np.atleast_2d(np.asarray(p, dtype=np.float64)) for p in predictions]
    if not preds:
        raise ValueError("co_guess needs at least one prediction")
    mean = np.mean(preds, axis=0)
    return mean / mean.sum(axis=1, keepdims=True)


def sharpen(p: np.ndarray, temperature: float) -> np.ndarray:
    """Temperature sharpening ``p^(1/T) / sum p^(1/T)``, computed in log space."""
    if not temperature > 0:
        raise ValueError("temperature must be > 0")
    p = np.atleast_2d(np.asarray(p, dtype=np.float64))
    logp = np.log(np.maximum(p, EPS)) / temperature
    logp -= logp.max(axis=1, keepdims=True)
    q = np.exp(logp)
    return q / q.sum(axis=1, keepdims=True)


def mixup_coefficient(alpha: float, rng: np.random.Generator) -> float:
    if not alpha > 0:
        raise ValueError("alpha must be > 0")
    lam = rng.beta(alpha, alpha)
    return max(lam, 1.0 - lam)


def mixup(xa, qa, xb, qb, alpha: float, rng: np.random.Generator, lam: float | None = None):
    """Convex mix of two (features, soft label) pairs.

    ``lam`` defaults to a Beta(alpha, alpha) draw; either way it is folded to
    ``max(lam, 1 - lam)`` so the result stays closer to the first argument.
    Returns ``(x, q, lam_used)``.
    """
    if lam is None:
        lam = mixup_coefficient(alpha, rng)
    else:
        lam = max(lam, 1.0 - lam)
    x = lam * np.asarray(xa, dtype=np.float64) + (1 - lam) * np.asarray(xb, dtype=np.float64)
    q = lam * np.asarray(qa, dtype=np.float64) + (1 - lam) * np.asarray(qb, dtype=np.float64)
    return x, q, lam


def linear_rampup(epochs_since_warmup: float, rampup_epochs: int, lambda_u: float) -> float:
    if rampup_epochs <= 0:
        return lambda_u
    return lambda_u * float(np.clip(epochs_since_warmup / rampup_epochs, 0.0, 1.0))


def semi_loss(
    probs_x: np.ndarray,
    targets_x: np.ndarray,
    probs_u: np.ndarray,
    targets_u: np.ndarray,
    lambda_u: float,
    weights: CostWeights = PLAIN,
) -> float:
    """Soft-target CE on the labeled part plus ``lambda_u`` times the squared error on the unlabeled part.

    The CE term of each sample is scaled by its expected class weight
    ``q0*w0 + q1*w1``; with one-hot targets this is the usual cost-sensitive CE.
    """
    if len(probs_x) == 0:
        raise ValueError("semi_loss needs a nonempty labeled batch")
    wq = targets_x @ weights.as_array()
    lx = float(np.mean(-wq * (targets_x * np.log(np.maximum(probs_x, PROB_FLOOR))).sum(axis=1)))
    lu = float(np.mean((probs_u - targets_u) ** 2)) if len(probs_u) else 0.0
    return lx + lambda_u * lu


def semi_loss_logit_grads(
    probs_x: np.ndarray,
    targets_x: np.ndarray,
    probs_u: np.ndarray,
    targets_u: np.ndarray,
    lambda_u: float,
    weights: CostWeights = PLAIN,
) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of :func:`semi_loss` w.r.t. the labeled and unlabeled logits."""
    wq = targets_x @ weights.as_array()
    # rows of targets_x sum to one, so d(CE)/dz = p - q
    gx = wq[:, None] * (probs_x - targets_x) / len(probs_x)
    if len(probs_u) == 0:
        return gx, np.zeros_like(probs_u)
    g = lambda_u * (probs_u - targets_u) * (2.0 / probs_u.size)
    gu = probs_u * (g - (g * probs_u).sum(axis=1, keepdims=True))
    return gx, gu


def prior_penalty(probs: np.ndarray, prior: np.ndarray) -> float:
    """KL(prior || batch-mean prediction); keeps the mixed batch from drifting onto one class."""
    m = np.maximum(probs.mean(axis=0), PROB_FLOOR)
    prior = np.asarray(prior, dtype=np.float64)
    return float(np.sum(prior * np.log(np.maximum(prior, PROB_FLOOR) / m)))


def prior_penalty_logit_grad(probs: np.ndarray, prior: np.ndarray) -> np.ndarray:
    m = np.maximum(probs.mean(axis=0), PROB_FLOOR)
    g = -np.asarray(prior, dtype=np.float64) / m / len(probs)
    return probs * (g - (probs * g).sum(axis=1, keepdims=True))
