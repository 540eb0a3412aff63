"""Declarative experiment configuration.

A config is a TOML document; every section maps onto one frozen dataclass and
unknown keys are rejected. Example::

    method = "unicon"
    cost_sensitive = true
    noise_rate = 0.2
    seed = 3

    [train]
    epochs = 60
    warmup_epochs = 10

    [cost]
    w0 = 1.0
    w1 = 20.0

    [data]
    source = "synthetic"
    positive_fraction = 0.195

    [[scenarios]]
    name = "II"
    c_fn = 20.0
    c_fp = 1.0

Sections: ``train``, ``cost``, ``coteaching``, ``gmm``, ``semi``, ``data``,
``scenarios`` (array of tables). See README for every key and its default.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ..datagen import SyntheticSpec
from ..metrics import DEFAULT_SCENARIOS, RiskScenario
from ..nnet import CostWeights
from ..semisup import SemiConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

METHODS = ("baseline", "gmm_filter", "co_teaching", "dividemix", "unicon")
WARMUP_METHODS = ("gmm_filter", "dividemix", "unicon")
DUAL_NET_METHODS = ("co_teaching", "dividemix", "unicon")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 60
    warmup_epochs: int = 10
    base_lr: float = 0.01
    momentum: float = 0.9
    batch_size: int = 64
    hidden: tuple[int, ...] = (64, 64)
    cs_during_warmup: bool = False


@dataclass(frozen=True)
class CoteachConfig:
    ramp_epochs: int = 10
    forget_rate: float | None = None  # None: use the configured noise rate
    granularity: str = "batch"


@dataclass(frozen=True)
class GmmConfig:
    tol: float = 1e-6
    max_iter: int = 100
    tau: float = 0.5
    class_thresholds: tuple[float, float] | None = None


@dataclass(frozen=True)
class CsvSource:
    train: str
    val: str
    test: str
    label_column: str = "label"
    binarization: dict[str, int] | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    method: str = "baseline"
    cost_sensitive: bool = False
    noise_rate: float = 0.0
    seed: int = 0
    threshold: float = 0.5
    collapse_threshold: float = 0.9
    cost: CostWeights = CostWeights(1.0, 20.0)
    train: TrainConfig = TrainConfig()
    coteaching: CoteachConfig = CoteachConfig()
    gmm: GmmConfig = GmmConfig()
    semi: SemiConfig = SemiConfig()
    data: SyntheticSpec | CsvSource = SyntheticSpec()
    scenarios: tuple[RiskScenario, ...] = field(default=DEFAULT_SCENARIOS)

    @property
    def label(self) -> str:
        return self.method + ("+cs" if self.cost_sensitive else "")

    def validate(self) -> None:
        """Raise :class:`ConfigError` on the first invalid field."""
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if not 0.0 <= self.noise_rate <= 1.0:
            raise ConfigError(f"noise_rate must lie in [0, 1], got {self.noise_rate}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if not 0.0 < self.threshold < 1.0:
            raise ConfigError("threshold must lie in (0, 1)")
        t = self.train
        if t.epochs < 1 or t.batch_size < 1:
            raise ConfigError("epochs and batch_size must be >= 1")
        if not 0 <= t.warmup_epochs <= t.epochs:
            raise ConfigError("warmup_epochs must lie in [0, epochs]")
        if self.method in WARMUP_METHODS and t.warmup_epochs < 1:
            raise ConfigError(f"{self.method} needs warmup_epochs >= 1")
        if not (t.base_lr > 0 and 0 <= t.momentum < 1):
            raise ConfigError("base_lr must be > 0 and momentum in [0, 1)")
        if not t.hidden or any(h < 1 for h in t.hidden):
            raise ConfigError("hidden layer widths must be positive")
        c = self.coteaching
        if c.granularity not in ("batch", "epoch"):
            raise ConfigError("coteaching.granularity must be 'batch' or 'epoch'")
        if c.ramp_epochs < 1:
            raise ConfigError("coteaching.ramp_epochs must be >= 1")
        fr = self.noise_rate if c.forget_rate is None else c.forget_rate
        if self.method == "co_teaching" and not 0 <= fr < 1:
            raise ConfigError(f"co-teaching forget rate must lie in [0, 1), got {fr}")
        g = self.gmm
        if not 0 < g.tau < 1 or g.tol <= 0 or g.max_iter < 1:
            raise ConfigError("gmm: tau in (0, 1), tol > 0, max_iter >= 1 required")
        if g.class_thresholds is not None and (
            len(g.class_thresholds) != 2 or not all(0 < v < 1 for v in g.class_thresholds)
        ):
            raise ConfigError("gmm.class_thresholds must be two values in (0, 1)")
        try:
            self.semi.validate()
            if isinstance(self.data, SyntheticSpec):
                self.data.validate()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if not self.scenarios:
            raise ConfigError("at least one risk scenario is required")
        names = [s.name for s in self.scenarios]
        if len(set(names)) != len(names):
            raise ConfigError("risk scenario names must be unique")

    # -- serialization -------------------------------------------------

    def to_dict(self) -> dict:
        d = {
            "method": self.method,
            "cost_sensitive": self.cost_sensitive,
            "noise_rate": self.noise_rate,
            "seed": self.seed,
            "threshold": self.threshold,
            "collapse_threshold": self.collapse_threshold,
            "cost": {"w0": self.cost.w0, "w1": self.cost.w1},
            "train": _plain(self.train),
            "coteaching": _plain(self.coteaching),
            "gmm": _plain(self.gmm),
            "semi": _plain(self.semi),
            "scenarios": [{"name": s.name, "c_fn": s.c_fn, "c_fp": s.c_fp} for s in self.scenarios],
        }
        if isinstance(self.data, SyntheticSpec):
            d["data"] = {"source": "synthetic", **_plain(self.data)}
        else:
            d["data"] = {"source": "csv", **_plain(self.data)}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentConfig:
        d = dict(d)
        kwargs: dict[str, Any] = {}
        top = {"method", "cost_sensitive", "noise_rate", "seed", "threshold", "collapse_threshold"}
        sections = {"cost", "train", "coteaching", "gmm", "semi", "data", "scenarios"}
        unknown = set(d) - top - sections
        if unknown:
            raise ConfigError(f"unknown config key(s): {sorted(unknown)}")
        for k in top & set(d):
            kwargs[k] = d[k]
        if "cost" in d:
            _check_keys(d["cost"], {"w0", "w1"}, "cost")
            try:
                kwargs["cost"] = CostWeights(**{k: float(v) for k, v in d["cost"].items()})
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        for name, klass in (("train", TrainConfig), ("coteaching", CoteachConfig), ("gmm", GmmConfig), ("semi", SemiConfig)):
            if name in d:
                kwargs[name] = _build(klass, d[name], name)
        if "data" in d:
            data = dict(d["data"])
            source = data.pop("source", "synthetic")
            if source == "synthetic":
                kwargs["data"] = _build(SyntheticSpec, data, "data")
            elif source == "csv":
                kwargs["data"] = _build(CsvSource, data, "data")
            else:
                raise ConfigError(f"data.source must be 'synthetic' or 'csv', got {source!r}")
        if "scenarios" in d:
            scen = []
            for i, s in enumerate(d["scenarios"]):
                _check_keys(s, {"name", "c_fn", "c_fp"}, f"scenarios[{i}]")
                try:
                    scen.append(RiskScenario(str(s["name"]), float(s["c_fn"]), float(s["c_fp"])))
                except (KeyError, ValueError) as exc:
                    raise ConfigError(f"scenarios[{i}]: {exc}") from None
            kwargs["scenarios"] = tuple(scen)
        return cls(**kwargs)

    def fingerprint(self) -> str:
        return fingerprint_dict(self.to_dict())

    def dataset_fingerprint(self) -> str:
        data = self.to_dict()["data"]
        if isinstance(self.data, CsvSource):
            data = dict(data)
            for split in ("train", "val", "test"):
                p = Path(getattr(self.data, split))
                data[f"{split}_sha256"] = hashlib.sha256(p.read_bytes()).hexdigest() if p.is_file() else None
        return fingerprint_dict(data)


def fingerprint_dict(d: dict) -> str:
    blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _plain(obj) -> dict:
    out = {}
    for f in dataclasses.fields(obj):
        v = getattr(obj, f.name)
        out[f.name] = list(v) if isinstance(v, tuple) else v
    return out


def _check_keys(d, allowed: set[str], where: str) -> None:
    if not isinstance(d, dict):
        raise ConfigError(f"{where} must be a table")
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in [{where}]: {sorted(unknown)}")


def _build(klass, d: dict, where: str):
    fields = {f.name: f for f in dataclasses.fields(klass)}
    _check_keys(d, set(fields), where)
    kwargs = {}
    for k, v in d.items():
        kwargs[k] = tuple(v) if isinstance(v, list) else v
    try:
        return klass(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{where}]: {exc}") from None


def load_config(path: str | Path) -> tuple[ExperimentConfig, dict]:
    """Parse a TOML config. Returns the experiment config and the optional ``[matrix]`` table."""
    path = Path(path)
    try:
        doc = tomllib.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: invalid TOML: {exc}") from None
    matrix = doc.pop("matrix", {})
    _check_keys(matrix, {"methods", "noise_rates", "seeds"}, "matrix")
    cfg = ExperimentConfig.from_dict(doc)
    if isinstance(cfg.data, CsvSource):
        # relative CSV paths resolve against the config file's directory
        base = path.parent
        fix = {k: str((base / getattr(cfg.data, k)).resolve()) for k in ("train", "val", "test")}
        cfg = dataclasses.replace(cfg, data=dataclasses.replace(cfg.data, **fix))
    return cfg, matrix


def parse_method_label(label: str) -> tuple[str, bool]:
    """``"unicon+cs"`` -> ``("unicon", True)``."""
    name = label.strip().lower()
    cs = name.endswith("+cs")
    if cs:
        name = name[: -len("+cs")]
    name = name.replace("-", "_")
    if name not in METHODS:
        raise ConfigError(f"unknown method {label!r}; expected one of {METHODS} with optional '+cs'")
    return name, cs
