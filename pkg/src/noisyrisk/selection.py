"""Clean-sample selection from per-sample training losses.

Three selectors are provided: a two-component 1-D Gaussian mixture fitted by
EM whose low-loss component is read as "clean", the small-loss ranking used by
co-teaching, and a class-uniform variant that spends an equal budget on each
observed class.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

VAR_FLOOR = 1e-6
_LOG_2PI = math.log(2.0 * math.pi)


class DegenerateLossError(ValueError):
    """All losses identical; callers should fall back to selecting every sample."""


@dataclass(frozen=True)
class Gmm1d:
    means: tuple[float, float]  # (clean, noisy)
    variances: tuple[float, float]
    weights: tuple[float, float]
    log_likelihoods: tuple[float, ...] = field(default=(), compare=False)
    converged: bool = field(default=True, compare=False)

    @property
    def clean_weight(self) -> float:
        return self.weights[0]


@dataclass(frozen=True)
class SelectionMask:
    mask: np.ndarray
    clean_posterior: np.ndarray
    threshold: float | None = None
    capped_classes: tuple[int, ...] = ()

    @property
    def fraction(self) -> float:
        return float(self.mask.mean()) if len(self.mask) else 0.0


def _component_logpdf(x: np.ndarray, means, variances) -> np.ndarray:
    mu = np.asarray(means, dtype=np.float64)
    var = np.asarray(variances, dtype=np.float64)
    return -0.5 * (_LOG_2PI + np.log(var) + (x[:, None] - mu) ** 2 / var)


def _log_joint(x, means, variances, weights) -> np.ndarray:
    with np.errstate(divide="ignore"):
        logw = np.log(np.asarray(weights, dtype=np.float64))
    return _component_logpdf(x, means, variances) + logw


def _logsumexp_rows(a: np.ndarray) -> np.ndarray:
    m = a.max(axis=1, keepdims=True)
    return (m + np.log(np.exp(a - m).sum(axis=1, keepdims=True)))[:, 0]


def fit_gmm_em(
    losses: np.ndarray, tol: float = 1e-6, max_iter: int = 100, var_floor: float = VAR_FLOOR
) -> Gmm1d:
    """Fit a two-component Gaussian mixture to 1-D losses by EM.

    Initialization splits the data at the median and takes each half's
    moments. Iteration stops once the mean log-likelihood improves by less
    than ``tol``. The returned components are ordered so the first (clean) one
    has the smaller mean; ``log_likelihoods`` holds the total log-likelihood
    before each M-step plus the final value.
    """
    x = np.asarray(losses, dtype=np.float64).ravel()
    if tol <= 0:
        raise ValueError("tol must be positive")
    if x.size < 2 or not np.isfinite(x).all():
        raise ValueError("need at least two finite loss values")
    if np.ptp(x) == 0:
        raise DegenerateLossError("all losses identical; fall back to selecting every sample")

    med = np.median(x)
    low = x <= med
    if low.all():
        low = x < med
    halves = (x[low], x[~low])
    means = np.array([h.mean() for h in halves])
    variances = np.maximum([h.var() for h in halves], var_floor)
    weights = np.array([h.size / x.size for h in halves])

    history = []
    converged = False
    for _ in range(max_iter):
        lj = _log_joint(x, means, variances, weights)
        norm = _logsumexp_rows(lj)
        ll = float(norm.sum())
        if history and (ll - history[-1]) / x.size < tol:
            history.append(ll)
            converged = True
            break
        history.append(ll)
        resp = np.exp(lj - norm[:, None])
        nk = resp.sum(axis=0)
        if (nk <= 0).any():
            break
        means = (resp * x[:, None]).sum(axis=0) / nk
        variances = np.maximum((resp * (x[:, None] - means) ** 2).sum(axis=0) / nk, var_floor)
        weights = nk / x.size
    else:
        lj = _log_joint(x, means, variances, weights)
        history.append(float(_logsumexp_rows(lj).sum()))

    order = np.argsort(means, kind="stable")
    return Gmm1d(
        means=tuple(float(v) for v in means[order]),
        variances=tuple(float(v) for v in variances[order]),
        weights=tuple(float(v) for v in weights[order]),
        log_likelihoods=tuple(history),
        converged=converged,
    )


def posteriors(losses: np.ndarray, gmm: Gmm1d) -> np.ndarray:
    """(n, 2) responsibilities of the (clean, noisy) components."""
    x = np.atleast_1d(np.asarray(losses, dtype=np.float64))
    variances = np.maximum(gmm.variances, np.finfo(float).tiny)
    lj = _log_joint(x, gmm.means, variances, gmm.weights)
    return np.exp(lj - _logsumexp_rows(lj)[:, None])


def clean_posterior(losses, gmm: Gmm1d):
    """Probability that each loss belongs to the low-loss component."""
    w = posteriors(losses, gmm)[:, 0]
    return float(w[0]) if np.ndim(losses) == 0 else w


def gmm_select(
    losses: np.ndarray,
    gmm: Gmm1d,
    tau: float = 0.5,
    labels: np.ndarray | None = None,
    class_thresholds: tuple[float, float] | None = None,
) -> SelectionMask:
    """Keep samples whose clean posterior is at least ``tau``.

    With ``class_thresholds`` (and ``labels``) each observed class gets its own
    threshold instead of the shared ``tau``.
    """
    if not 0.0 < tau < 1.0:
        raise ValueError("tau must lie in (0, 1)")
    w = posteriors(losses, gmm)[:, 0]
    if class_thresholds is None:
        return SelectionMask(w >= tau, w, tau)
    if labels is None:
        raise ValueError("class_thresholds require labels")
    thr = np.asarray(class_thresholds, dtype=np.float64)[np.asarray(labels, dtype=np.int64)]
    return SelectionMask(w >= thr, w, None)


def normalize_losses(losses: np.ndarray) -> np.ndarray:
    """Min-max scale to [0, 1]; constant input maps to zeros."""
    x = np.asarray(losses, dtype=np.float64)
    span = np.ptp(x)
    return np.zeros_like(x) if span == 0 else (x - x.min()) / span


@dataclass(frozen=True)
class GmmDivision:
    """Outcome of the per-epoch GMM step; ``gmm`` is None when EM fell back to select-all."""

    selection: SelectionMask
    gmm: Gmm1d | None


def divide_by_gmm(
    losses: np.ndarray,
    tau: float = 0.5,
    tol: float = 1e-6,
    max_iter: int = 100,
    labels: np.ndarray | None = None,
    class_thresholds: tuple[float, float] | None = None,
) -> GmmDivision:
    """Normalize losses, fit the mixture and threshold the clean posterior.

    Flat losses (EM cannot separate anything) select every sample.
    """
    x = normalize_losses(losses)
    try:
        gmm = fit_gmm_em(x, tol=tol, max_iter=max_iter)
    except DegenerateLossError:
        n = len(x)
        return GmmDivision(SelectionMask(np.ones(n, bool), np.ones(n), tau), None)
    return GmmDivision(gmm_select(x, gmm, tau, labels, class_thresholds), gmm)


def small_loss_select(losses: np.ndarray, keep_fraction: float) -> np.ndarray:
    """Sorted indices of the ceil(keep_fraction * n) smallest losses; ties favour lower indices."""
    x = np.asarray(losses, dtype=np.float64)
    if x.size == 0:
        raise ValueError("empty loss vector")
    if not 0.0 < keep_fraction <= 1.0:
        raise ValueError("keep_fraction must lie in (0, 1]")
    # guard against 0.6 * 5 == 3.0000000000000004
    k = min(x.size, max(1, math.ceil(round(keep_fraction * x.size, 9))))
    return np.sort(np.argsort(x, kind="stable")[:k])


def forget_rate(epoch: int, eta: float, ramp_epochs: int) -> float:
    """Co-teaching keep fraction: 1 - eta * min(epoch / ramp_epochs, 1)."""
    if not 0.0 <= eta < 1.0:
        raise ValueError("eta must lie in [0, 1)")
    if ramp_epochs < 1:
        raise ValueError("ramp_epochs must be >= 1")
    return 1.0 - eta * min(epoch / ramp_epochs, 1.0)


def uniform_class_select(
    clean_posterior: np.ndarray, observed_labels: np.ndarray, overall_budget: float
) -> SelectionMask:
    """Pick the floor(budget * n / 2) highest-posterior samples from each observed class.

    A class smaller than its share is taken whole and listed in
    ``capped_classes``. Ties go to lower indices.
    """
    w = np.asarray(clean_posterior, dtype=np.float64)
    y = np.asarray(observed_labels, dtype=np.int64)
    if w.shape != y.shape:
        raise ValueError("posterior and label vectors differ in length")
    if not 0.0 < overall_budget <= 1.0:
        raise ValueError("overall_budget must lie in (0, 1]")
    per_class = int(math.floor(overall_budget * len(y) / 2 + 1e-9))
    mask = np.zeros(len(y), dtype=bool)
    capped = []
    for c in (0, 1):
        idx = np.flatnonzero(y == c)
        if idx.size == 0:
            raise ValueError(f"class {c} absent from observed labels")
        if per_class > idx.size:
            capped.append(c)
        # stable sort on -w keeps lower indices first among ties
        order = idx[np.argsort(-w[idx], kind="stable")]
        mask[order[:per_class]] = True
    return SelectionMask(mask, w, None, tuple(capped))


def selection_quality(selected: np.ndarray, flip_mask: np.ndarray | None) -> dict | None:
    """Precision/recall of "selected" as a detector of truly clean samples, plus agreement."""
    if flip_mask is None:
        return None
    sel = np.asarray(selected, dtype=bool)
    clean = ~np.asarray(flip_mask, dtype=bool)
    hit = int((sel & clean).sum())
    return {
        "precision": hit / int(sel.sum()) if sel.any() else None,
        "recall": hit / int(clean.sum()) if clean.any() else None,
        "agreement": float((sel == clean).mean()),
    }
