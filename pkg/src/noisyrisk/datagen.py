"""Imbalanced binary datasets: synthetic generation, CSV ingestion and symmetric label noise."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping

import numpy as np

SPLITS = ("train", "val", "test")
OVERLAP_MODES = ("gaussian-blobs", "annular")
PREVALENCE_TOLERANCE = 0.02


class DataError(ValueError):
    """Raised for malformed dataset inputs."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """Feature matrix with observed labels and, when known, the hidden true labels.

    ``flip_mask[i]`` is True exactly when the observed label differs from the
    true one. Arrays are copied and made read-only on construction.
    """

    features: np.ndarray
    observed_labels: np.ndarray
    true_labels: np.ndarray | None = None
    flip_mask: np.ndarray | None = None
    split_tag: str = "train"
    feature_names: tuple[str, ...] | None = None

    def __post_init__(self):
        x = np.asarray(self.features, dtype=np.float64)
        if x.ndim != 2:
            raise DataError(f"features must be 2-D, got shape {x.shape}")
        y = np.asarray(self.observed_labels)
        if y.ndim != 1 or len(y) != len(x):
            raise DataError("observed_labels length must equal feature row count")
        if not np.isin(y, (0, 1)).all():
            raise DataError("observed_labels must be binary {0,1}")
        if self.split_tag not in SPLITS:
            raise DataError(f"split_tag must be one of {SPLITS}, got {self.split_tag!r}")
        object.__setattr__(self, "features", _frozen(x))
        object.__setattr__(self, "observed_labels", _frozen(y.astype(np.int64)))

        t = self.true_labels
        m = self.flip_mask
        if t is not None:
            t = np.asarray(t)
            if t.shape != y.shape or not np.isin(t, (0, 1)).all():
                raise DataError("true_labels must be a binary vector matching observed_labels")
            t = t.astype(np.int64)
            computed = y != t
            if m is None:
                m = computed
            else:
                m = np.asarray(m, dtype=bool)
                if m.shape != y.shape:
                    raise DataError("flip_mask length must equal label length")
                if not np.array_equal(m, computed):
                    raise DataError("flip_mask disagrees with observed != true labels")
            object.__setattr__(self, "true_labels", _frozen(t))
            object.__setattr__(self, "flip_mask", _frozen(m))
        elif m is not None:
            raise DataError("flip_mask requires true_labels")
        if self.split_tag != "train" and self.flip_mask is not None and self.flip_mask.any():
            raise DataError(f"{self.split_tag} split must be clean (no flipped labels)")
        if self.feature_names is not None and len(self.feature_names) != x.shape[1]:
            raise DataError("feature_names length must equal feature column count")

    def __len__(self) -> int:
        return len(self.observed_labels)

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def prevalence(self) -> float:
        return float(self.observed_labels.mean()) if len(self) else float("nan")

    def class_counts(self) -> tuple[int, int]:
        n1 = int(self.observed_labels.sum())
        return len(self) - n1, n1

    def equals(self, other: LabeledDataset) -> bool:
        def same(a, b):
            if a is None or b is None:
                return a is None and b is None
            return a.dtype == b.dtype and a.shape == b.shape and a.tobytes() == b.tobytes()

        return (
            same(self.features, other.features)
            and same(self.observed_labels, other.observed_labels)
            and same(self.true_labels, other.true_labels)
            and same(self.flip_mask, other.flip_mask)
            and self.split_tag == other.split_tag
        )


@dataclass(frozen=True)
class NoiseSpec:
    rate: float
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.rate <= 1.0:
            raise DataError(f"noise rate must lie in [0, 1], got {self.rate}")
        if not 0 <= int(self.seed) < 2**64:
            raise DataError("noise seed must be an unsigned 64-bit integer")


@dataclass(frozen=True)
class BinarizationMap:
    """Maps source class identifiers onto {0, 1}; keys are compared as strings."""

    mapping: Mapping[str | int, int]

    def __post_init__(self):
        norm = {str(k): int(v) for k, v in dict(self.mapping).items()}
        if not set(norm.values()) <= {0, 1}:
            raise DataError("binarization targets must be 0 or 1")
        if set(norm.values()) != {0, 1}:
            raise DataError("binarization map must send at least one class to each of 0 and 1")
        object.__setattr__(self, "mapping", norm)

    def __call__(self, value: str) -> int:
        return self.mapping[str(value)]

    def __contains__(self, value) -> bool:
        return str(value) in self.mapping


@dataclass(frozen=True)
class SyntheticSpec:
    n_train: int = 2000
    n_val: int = 500
    n_test: int = 1000
    positive_fraction: float = 0.195
    feature_dim: int = 16
    class_separation: float = 2.5
    within_class_spread: float = 1.0
    overlap_mode: str = "gaussian-blobs"
    seed: int = 0

    def validate(self) -> None:
        for name in ("n_train", "n_val", "n_test"):
            if int(getattr(self, name)) <= 0:
                raise DataError(f"{name} must be positive")
        if not 0.0 < self.positive_fraction < 1.0:
            raise DataError("positive_fraction must lie strictly between 0 and 1")
        if self.feature_dim <= 0:
            raise DataError("feature_dim must be positive")
        if not self.class_separation > 0:
            raise DataError("class_separation must be > 0")
        if not self.within_class_spread > 0:
            raise DataError("within_class_spread must be > 0")
        if self.overlap_mode not in OVERLAP_MODES:
            raise DataError(f"overlap_mode must be one of {OVERLAP_MODES}")
        if not 0 <= int(self.seed) < 2**64:
            raise DataError("seed must be an unsigned 64-bit integer")


# Table 1 prevalences (train split) of the binarized datasets.
DERMA_LIKE = SyntheticSpec(positive_fraction=0.195)
PATH_LIKE = SyntheticSpec(positive_fraction=0.248)
PRESETS = {"derma": DERMA_LIKE, "path": PATH_LIKE}


def _sample_split(spec: SyntheticSpec, n: int, direction: np.ndarray, rng: np.random.Generator):
    n_pos = int(round(spec.positive_fraction * n))
    n_pos = min(max(n_pos, 1), n - 1) if n > 1 else n_pos
    labels = np.zeros(n, dtype=np.int64)
    labels[:n_pos] = 1
    labels = labels[rng.permutation(n)]

    d = spec.feature_dim
    x = rng.standard_normal((n, d)) * spec.within_class_spread
    pos = labels == 1
    if spec.overlap_mode == "gaussian-blobs":
        x[pos] += spec.class_separation * direction
    else:
        k = int(pos.sum())
        u = rng.standard_normal((k, d))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        radius = spec.class_separation + spec.within_class_spread * rng.standard_normal(k)
        x[pos] = u * radius[:, None]
    return x, labels


def generate_synthetic(spec: SyntheticSpec) -> tuple[LabeledDataset, LabeledDataset, LabeledDataset]:
    """Draw clean train/val/test splits from two class clusters.

    Positive counts per split are fixed to ``round(positive_fraction * n)`` so
    prevalence matches positive_fraction up to rounding.
    """
    spec.validate()
    ss = np.random.SeedSequence(int(spec.seed))
    geom, *split_seeds = ss.spawn(4)
    direction = np.random.default_rng(geom).standard_normal(spec.feature_dim)
    direction /= np.linalg.norm(direction)

    out = []
    for tag, n, child in zip(SPLITS, (spec.n_train, spec.n_val, spec.n_test), split_seeds):
        x, y = _sample_split(spec, int(n), direction, np.random.default_rng(child))
        names = tuple(f"x{j}" for j in range(spec.feature_dim))
        out.append(LabeledDataset(x, y, true_labels=y, split_tag=tag, feature_names=names))
    return tuple(out)


def _parse_label(raw: str, binarization: BinarizationMap | None, row: int, column: str) -> int:
    raw = raw.strip()
    if binarization is not None:
        if raw not in binarization:
            raise DataError(f"row {row}: class value {raw!r} in column {column!r} is not in the binarization map")
        return binarization(raw)
    try:
        val = float(raw)
    except ValueError:
        raise DataError(f"row {row}: label {raw!r} is not numeric and no binarization map was given") from None
    if val not in (0.0, 1.0):
        raise DataError(f"row {row}: label {raw!r} is not binary; supply a binarization map")
    return int(val)


def ingest_csv(
    path: str | Path,
    label_column: str = "label",
    binarization: BinarizationMap | None = None,
    split_tag: str = "train",
) -> LabeledDataset:
    """Load a header-first CSV; every column other than the label (and optional
    ``true_label``/``flip`` columns) is a numeric feature, in header order."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such CSV file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file, header row required") from None
        if label_column not in header:
            raise DataError(f"{path}: label column {label_column!r} not in header {header}")
        label_idx = header.index(label_column)
        true_idx = header.index("true_label") if "true_label" in header else None
        skip = {label_idx, true_idx, header.index("flip") if "flip" in header else None}
        feat_idx = [j for j in range(len(header)) if j not in skip]

        feats, labels, truths = [], [], []
        for rownum, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}: row {rownum} has {len(row)} cells, header has {len(header)}")
            vals = []
            for j in feat_idx:
                try:
                    v = float(row[j])
                except ValueError:
                    raise DataError(f"{path}: row {rownum}, column {header[j]!r}: non-numeric cell {row[j]!r}") from None
                if not math.isfinite(v):
                    raise DataError(f"{path}: row {rownum}, column {header[j]!r}: non-finite value")
                vals.append(v)
            feats.append(vals)
            labels.append(_parse_label(row[label_idx], binarization, rownum, label_column))
            if true_idx is not None:
                truths.append(_parse_label(row[true_idx], binarization, rownum, "true_label"))

    x = np.asarray(feats, dtype=np.float64).reshape(len(feats), len(feat_idx))
    y = np.asarray(labels, dtype=np.int64)
    t = np.asarray(truths, dtype=np.int64) if true_idx is not None else None
    return LabeledDataset(
        x, y, true_labels=t, split_tag=split_tag, feature_names=tuple(header[j] for j in feat_idx)
    )


def write_csv(dataset: LabeledDataset, path: str | Path, label_column: str = "label") -> None:
    """Dump a dataset in the ingestion schema, plus ``true_label`` and ``flip`` when known."""
    names = dataset.feature_names or tuple(f"x{j}" for j in range(dataset.n_features))
    header = list(names) + [label_column]
    if dataset.true_labels is not None:
        header += ["true_label", "flip"]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(len(dataset)):
            row = [repr(float(v)) for v in dataset.features[i]] + [int(dataset.observed_labels[i])]
            if dataset.true_labels is not None:
                row += [int(dataset.true_labels[i]), int(dataset.flip_mask[i])]
            w.writerow(row)


def inject_symmetric_noise(dataset: LabeledDataset, spec: NoiseSpec) -> LabeledDataset:
    """Flip each training label independently with probability ``spec.rate``.

    One uniform variate per sample is drawn in storage order from a Philox
    (counter-based) stream keyed by the seed, so the realization depends only
    on (rate, seed, dataset order).
    """
    if dataset.split_tag != "train":
        raise DataError(f"refusing to corrupt the {dataset.split_tag} split; evaluation splits stay clean")
    if not 0.0 <= spec.rate <= 1.0:
        raise DataError(f"noise rate must lie in [0, 1], got {spec.rate}")
    u = np.random.Generator(np.random.Philox(key=int(spec.seed))).random(len(dataset))
    flips = u < spec.rate
    truth = dataset.true_labels if dataset.true_labels is not None else dataset.observed_labels
    observed = np.where(flips, 1 - dataset.observed_labels, dataset.observed_labels)
    return replace(dataset, observed_labels=observed, true_labels=truth, flip_mask=None)

