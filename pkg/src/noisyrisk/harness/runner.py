"""Single runs, matrix execution and JSONL persistence of run results."""

from __future__ import annotations

import dataclasses
import itertools
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .. import metrics
from ..datagen import BinarizationMap, LabeledDataset, NoiseSpec, generate_synthetic, ingest_csv, inject_symmetric_noise
from .config import ConfigError, CsvSource, ExperimentConfig, fingerprint_dict, parse_method_label
from .methods import TRAINERS, Streams, TrainData, TrainingFailure, ensemble_probs

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1


class ResultsFileError(ValueError):
    pass


@dataclass
class RunResult:
    fingerprint: str
    dataset_fingerprint: str
    config: dict
    status: str = "ok"  # "ok" or "failed"
    error: str | None = None
    trace: list[dict] = field(default_factory=list)
    metrics: dict | None = None
    collapse: bool | None = None
    selection_quality: dict | None = None
    n_flipped: int | None = None
    wall_clock_seconds: float | None = None
    schema_version: int = SCHEMA_VERSION

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @property
    def method(self) -> str:
        return self.config.get("method", "?")

    @property
    def cost_sensitive(self) -> bool:
        return bool(self.config.get("cost_sensitive", False))

    @property
    def noise_rate(self) -> float:
        return self.config.get("noise_rate", float("nan"))

    @property
    def seed(self) -> int:
        return self.config.get("seed", -1)

    @property
    def label(self) -> str:
        return self.method + ("+cs" if self.cost_sensitive else "")

    def record(self) -> metrics.MetricsRecord | None:
        return metrics.MetricsRecord.from_dict(self.metrics) if self.metrics else None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> RunResult:
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ResultsFileError(f"unknown result fields {sorted(unknown)}")
        return cls(**d)

    def to_json(self, timing: bool = True) -> str:
        d = self.to_dict()
        if not timing:
            d["wall_clock_seconds"] = None
        return json.dumps(d, sort_keys=True, separators=(",", ":"), allow_nan=False)


# -- data preparation ---------------------------------------------------------


def derive_seed(seed: int, purpose: int) -> int:
    return int(np.random.SeedSequence([int(seed), purpose]).generate_state(1, np.uint64)[0])


def load_splits(cfg: ExperimentConfig) -> tuple[LabeledDataset, LabeledDataset, LabeledDataset]:
    if isinstance(cfg.data, CsvSource):
        src = cfg.data
        bmap = BinarizationMap(src.binarization) if src.binarization else None
        return tuple(
            ingest_csv(getattr(src, tag), src.label_column, bmap, split_tag=tag) for tag in ("train", "val", "test")
        )
    return generate_synthetic(cfg.data)


def _two_class_check(ds: LabeledDataset) -> None:
    n0, n1 = ds.class_counts()
    if n0 == 0 or n1 == 0:
        raise ConfigError(f"{ds.split_tag} split has a single class present ({n0} negatives, {n1} positives)")


def prepare_data(cfg: ExperimentConfig) -> tuple[TrainData, LabeledDataset]:
    train, val, test = load_splits(cfg)
    for ds in (train, val, test):
        _two_class_check(ds)
    noisy = inject_symmetric_noise(train, NoiseSpec(cfg.noise_rate, derive_seed(cfg.seed, 1)))
    _two_class_check(noisy)
    return TrainData(noisy, val), test


# -- single run ---------------------------------------------------------------


def _summary_quality(trace: list[dict], warmup: int) -> dict | None:
    rows = [r for r in trace if r["sel_agreement"] is not None]
    if not rows:
        return None
    first = next((r for r in rows if r["epoch"] >= warmup), rows[0])
    last = rows[-1]

    def pick(r):
        return {"epoch": r["epoch"], "agreement": r["sel_agreement"], "precision": r["sel_precision"], "recall": r["sel_recall"]}

    return {"first": pick(first), "last": pick(last), "mean_agreement": float(np.mean([r["sel_agreement"] for r in rows]))}


def run_single(cfg: ExperimentConfig) -> RunResult:
    """Train one configuration and evaluate it on the clean test split.

    Invalid configurations raise :class:`ConfigError`. A non-finite loss aborts
    training and comes back as a failed result rather than an exception.
    """
    cfg.validate()
    t0 = time.perf_counter()
    data, test = prepare_data(cfg)
    result = RunResult(
        fingerprint=cfg.fingerprint(),
        dataset_fingerprint=cfg.dataset_fingerprint(),
        config=cfg.to_dict(),
        n_flipped=int(data.train.flip_mask.sum()),
    )
    streams = Streams.from_seed(cfg.seed)
    with np.errstate(over="ignore", invalid="ignore"):
        try:
            nets, trace = TRAINERS[cfg.method](data, cfg, streams)
        except TrainingFailure as exc:
            log.warning("run %s failed: %s", result.fingerprint, exc)
            result.status, result.error = "failed", str(exc)
            result.wall_clock_seconds = time.perf_counter() - t0
            return result
    scores = ensemble_probs(nets, test.features)[:, 1]
    rec = metrics.evaluate(scores, test.observed_labels, cfg.threshold, cfg.scenarios)
    preds = (scores >= cfg.threshold).astype(int)
    result.trace = trace.epochs
    result.metrics = rec.to_dict()
    result.collapse = metrics.collapse_flag(preds, cfg.collapse_threshold)[0]
    result.selection_quality = _summary_quality(trace.epochs, cfg.train.warmup_epochs)
    result.wall_clock_seconds = time.perf_counter() - t0
    return result


def failed_result(cfg_dict: dict, error: str) -> RunResult:
    try:
        data_fp = fingerprint_dict(cfg_dict.get("data", {}))
    except TypeError:
        data_fp = ""
    return RunResult(
        fingerprint=fingerprint_dict(cfg_dict), dataset_fingerprint=data_fp, config=cfg_dict, status="failed", error=error
    )


def _run_cell(cfg: ExperimentConfig) -> RunResult:
    try:
        return run_single(cfg)
    except Exception as exc:  # a broken cell must not take the matrix down
        return failed_result(cfg.to_dict(), f"{type(exc).__name__}: {exc}")


# -- matrix -------------------------------------------------------------------


def matrix_configs(
    base: ExperimentConfig, methods: Sequence[str], noise_rates: Sequence[float], seeds: Sequence[int]
) -> list[ExperimentConfig]:
    """Cartesian product of method labels (``name`` or ``name+cs``), noise rates and seeds."""
    if not methods or not noise_rates or not seeds:
        raise ConfigError("matrix axes must be nonempty")
    cells = []
    for label, eta, seed in itertools.product(methods, noise_rates, seeds):
        name, cs = parse_method_label(label)
        cells.append(dataclasses.replace(base, method=name, cost_sensitive=cs, noise_rate=float(eta), seed=int(seed)))
    return cells


def run_matrix(
    base: ExperimentConfig,
    methods: Sequence[str],
    noise_rates: Sequence[float],
    seeds: Sequence[int],
    parallelism: int = 1,
) -> list[RunResult]:
    """Run every cell and return results sorted by config fingerprint.

    Each cell derives its random streams from its own config, so the output
    does not depend on execution order or worker count.
    """
    cells = matrix_configs(base, methods, noise_rates, seeds)
    if parallelism <= 1:
        results = [_run_cell(c) for c in cells]
    else:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            results = list(pool.map(_run_cell, cells))
    failed = sum(not r.ok for r in results)
    if failed:
        log.warning("%d of %d matrix cells failed", failed, len(results))
    return sort_results(results)


def sort_results(results: Iterable[RunResult]) -> list[RunResult]:
    return sorted(results, key=lambda r: (r.fingerprint, r.to_json(timing=False)))


# -- persistence --------------------------------------------------------------


def persist(results: Iterable[RunResult], path: str | Path, timing: bool = True) -> None:
    """Write one JSON object per line. ``timing=False`` blanks wall-clock fields."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for r in results:
            fh.write(r.to_json(timing) + "\n")


def load(path: str | Path) -> list[RunResult]:
    out = []
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ResultsFileError(f"{path}: line {lineno}: malformed JSON ({exc.msg})") from None
            if not isinstance(d, dict):
                raise ResultsFileError(f"{path}: line {lineno}: expected a JSON object")
            version = d.get("schema_version")
            if version != SCHEMA_VERSION:
                raise ResultsFileError(f"{path}: line {lineno}: schema version {version!r}, expected {SCHEMA_VERSION}")
            try:
                out.append(RunResult.from_dict(d))
            except (TypeError, ResultsFileError) as exc:
                raise ResultsFileError(f"{path}: line {lineno}: {exc}") from None
    return out
