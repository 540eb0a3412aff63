"""Confusion-matrix statistics, rank AUC and cost-weighted Global Risk.

Rates whose denominator is zero come back as ``None`` (rendered "n/a" in
reports) rather than a silent 0. Risk is computed exactly as a
:class:`fractions.Fraction` from integer counts and only converted to float at
the edge.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        for name in ("tp", "fp", "tn", "fn"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise ValueError(f"{name} must be a non-negative integer, got {v}")
            object.__setattr__(self, name, int(v))

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def positives(self) -> int:
        return self.tp + self.fn

    @property
    def negatives(self) -> int:
        return self.tn + self.fp


@dataclass(frozen=True)
class RiskScenario:
    name: str
    c_fn: float
    c_fp: float

    def __post_init__(self):
        if self.c_fn < 0 or self.c_fp < 0:
            raise ValueError("costs must be non-negative")
        if self.c_fn == 0 and self.c_fp == 0:
            raise ValueError("at least one cost must be positive")

    @property
    def ratio(self) -> float | None:
        return self.c_fn / self.c_fp if self.c_fp > 0 else None


RISK_I = RiskScenario("I", 1.0, 1.0)
RISK_II = RiskScenario("II", 20.0, 1.0)
DEFAULT_SCENARIOS = (RISK_I, RISK_II)


def _binary(a, name: str) -> np.ndarray:
    a = np.asarray(a)
    if a.ndim != 1:
        raise ValueError(f"{name} must be a vector")
    if not np.isin(a, (0, 1)).all():
        raise ValueError(f"{name} must contain only 0/1 values")
    return a.astype(np.int64)


def confusion(predictions, labels) -> ConfusionCounts:
    """2x2 tally with class 1 as the positive (malignant) class."""
    p = _binary(predictions, "predictions")
    y = _binary(labels, "labels")
    if p.shape != y.shape:
        raise ValueError(f"length mismatch: {len(p)} predictions vs {len(y)} labels")
    tp = int(((p == 1) & (y == 1)).sum())
    fp = int(((p == 1) & (y == 0)).sum())
    fn = int(((p == 0) & (y == 1)).sum())
    return ConfusionCounts(tp=tp, fp=fp, tn=len(y) - tp - fp - fn, fn=fn)


def sensitivity(c: ConfusionCounts) -> float | None:
    d = c.tp + c.fn
    return c.tp / d if d else None


def specificity(c: ConfusionCounts) -> float | None:
    d = c.tn + c.fp
    return c.tn / d if d else None


def bac_from_rates(sens: float | None, spec: float | None) -> float | None:
    if sens is None or spec is None:
        return None
    return (sens + spec) / 2.0


def bac(c: ConfusionCounts) -> float | None:
    """Balanced accuracy, the mean of sensitivity and specificity."""
    return bac_from_rates(sensitivity(c), specificity(c))


def f1(c: ConfusionCounts) -> float | None:
    d = 2 * c.tp + c.fp + c.fn
    return 2 * c.tp / d if d else None


def auc(scores, labels) -> float:
    """Mann-Whitney AUC: P(s_pos > s_neg) + 0.5 P(tie), exact over all pairs.

    Computed from mid-ranks in integer arithmetic (twice the U statistic), so
    the result is bit-identical to the pairwise count.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = _binary(labels, "labels")
    if s.shape != y.shape:
        raise ValueError("scores and labels differ in length")
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both classes present")
    order = np.argsort(s, kind="mergesort")
    sorted_s = s[order]
    # doubled mid-ranks (1-based) are integers: first + last of each tie block
    starts = np.r_[0, np.flatnonzero(np.diff(sorted_s)) + 1]
    ends = np.r_[starts[1:], len(s)]
    twice_rank = np.empty(len(s), dtype=np.int64)
    for a, b in zip(starts, ends):
        twice_rank[order[a:b]] = (a + 1) + b
    twice_u = int(twice_rank[y == 1].sum()) - n_pos * (n_pos + 1)
    return twice_u / (2 * n_pos * n_neg)


def auc_bruteforce(scores, labels) -> float:
    """O(n^2) pairwise reference for :func:`auc`."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    pos, neg = s[y == 1], s[y == 0]
    if len(pos) == 0 or len(neg) == 0:
        raise ValueError("AUC needs both classes present")
    greater = int((pos[:, None] > neg[None, :]).sum())
    ties = int((pos[:, None] == neg[None, :]).sum())
    return (2 * greater + ties) / (2 * len(pos) * len(neg))


def risk_exact(c: ConfusionCounts, s: RiskScenario) -> Fraction:
    if c.n == 0:
        raise ValueError("risk undefined for an empty test set")
    return (Fraction(s.c_fn) * c.fn + Fraction(s.c_fp) * c.fp) / c.n


def risk(c: ConfusionCounts, s: RiskScenario) -> float:
    """Expected misclassification cost per sample, ``(C_FN*FN + C_FP*FP) / N``."""
    return float(risk_exact(c, s))


def risk_sweep(c: ConfusionCounts, ratios: Iterable[float], c_fp: float = 1.0) -> list[tuple[float, float]]:
    out = []
    for lam in ratios:
        if lam < 0:
            raise ValueError("cost ratios must be >= 0")
        out.append((lam, risk(c, RiskScenario(f"lambda={lam}", lam * c_fp, c_fp))))
    return out


def positive_prediction_rate(predictions) -> float:
    p = np.asarray(predictions)
    if p.size == 0:
        raise ValueError("empty predictions")
    return float((p == 1).mean())


def collapse_flag(predictions, rate_threshold: float = 0.9) -> tuple[bool, float]:
    """Flag a predictor that outputs one class for at least ``rate_threshold`` of the inputs."""
    ppr = positive_prediction_rate(predictions)
    return (ppr >= rate_threshold or (1.0 - ppr) >= rate_threshold), ppr


@dataclass(frozen=True)
class MetricsRecord:
    counts: ConfusionCounts
    sensitivity: float | None
    specificity: float | None
    bac: float | None
    f1: float | None
    auc: float | None
    ppr: float
    risks: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        """Flat JSON-ready mapping with fixed key names; risk keys are ``risk_<scenario>``."""
        d = {
            "sensitivity": self.sensitivity,
            "specificity": self.specificity,
            "bac": self.bac,
            "f1": self.f1,
            "auc": self.auc,
        }
        for name, v in self.risks.items():
            d[f"risk_{name}"] = v
        d.update(ppr=self.ppr, tp=self.counts.tp, fp=self.counts.fp, tn=self.counts.tn, fn=self.counts.fn, n=self.counts.n)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> MetricsRecord:
        counts = ConfusionCounts(d["tp"], d["fp"], d["tn"], d["fn"])
        risks = {k[len("risk_"):]: v for k, v in d.items() if k.startswith("risk_")}
        return cls(counts, d["sensitivity"], d["specificity"], d["bac"], d["f1"], d["auc"], d["ppr"], risks)

    def risk(self, scenario: str) -> float | None:
        return self.risks.get(scenario)


def evaluate(
    scores: np.ndarray,
    labels: np.ndarray,
    threshold: float = 0.5,
    scenarios: Sequence[RiskScenario] = DEFAULT_SCENARIOS,
) -> MetricsRecord:
    """Full metric record from positive-class scores on a clean split."""
    s = np.asarray(scores, dtype=np.float64)
    preds = (s >= threshold).astype(np.int64)
    c = confusion(preds, labels)
    sens, spec = sensitivity(c), specificity(c)
    y = np.asarray(labels)
    a = auc(s, y) if 0 < int(y.sum()) < len(y) else None
    return MetricsRecord(
        counts=c,
        sensitivity=sens,
        specificity=spec,
        bac=bac_from_rates(sens, spec),
        f1=f1(c),
        auc=a,
        ppr=positive_prediction_rate(preds),
        risks={sc.name: risk(c, sc) for sc in scenarios},
    )


def record_from_counts(c: ConfusionCounts, scenarios: Sequence[RiskScenario] = DEFAULT_SCENARIOS, auc_value=None):
    """Metric record when only the confusion counts are known (no scores)."""
    sens, spec = sensitivity(c), specificity(c)
    return MetricsRecord(
        counts=c,
        sensitivity=sens,
        specificity=spec,
        bac=bac_from_rates(sens, spec),
        f1=f1(c),
        auc=auc_value,
        ppr=(c.tp + c.fp) / c.n if c.n else 0.0,
        risks={sc.name: risk(c, sc) for sc in scenarios},
    )
