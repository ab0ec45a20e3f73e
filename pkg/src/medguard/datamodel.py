"""Core domain types shared across the package.

Records are immutable dataclasses whose numeric fields use ``None`` for a
missing value.  Labels never live inside a :class:`FeatureMatrix`; they travel
next to it as a separate array.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace, asdict
from enum import Enum
from typing import Any, Iterable, Optional, Sequence

import numpy as np


class SchemaError(ValueError):
    """A CSV file or record does not match the expected schema."""


class RecordError(ValueError):
    """A single record violates a field invariant."""


def _check_binary(name: str, value, allow_missing=True):
    if value is None and allow_missing:
        return
    if value not in (0, 1):
        raise RecordError(f"{name} must be 0 or 1, got {value!r}")


@dataclass(frozen=True)
class DeviceRecord:
    """One timestamped vital-signs reading from a patient-monitoring sensor."""

    patient_id: str
    timestamp: Optional[float]
    sensor_id: str
    sensor_type: str
    temperature: Optional[float]
    systolic_bp: Optional[float]
    diastolic_bp: Optional[float]
    heart_rate: Optional[float]
    battery_level: Optional[float]
    target_blood_pressure: Optional[float]
    target_heart_rate: Optional[float]
    target_health_status: str
    label: int = 0

    def __post_init__(self):
        if self.battery_level is not None and not 0.0 <= self.battery_level <= 100.0:
            raise RecordError(f"battery_level must lie in [0, 100], got {self.battery_level}")
        _check_binary("label", self.label, allow_missing=False)


@dataclass(frozen=True)
class NetRecord:
    """One network packet observation with TCP and MQTT fields.

    ``extra`` holds numeric columns outside the core schema (``ip.ttl``,
    ``tcp.hdr_len``, ...) keyed by their CSV spelling.
    """

    frame_time_delta: Optional[float]
    frame_time_relative: Optional[float]
    frame_len: Optional[float]
    ip_src: str
    ip_dst: str
    tcp_srcport: Optional[int]
    tcp_dstport: Optional[int]
    tcp_flags_ack: Optional[int]
    tcp_flags_fin: Optional[int]
    tcp_flags_push: Optional[int]
    tcp_flags_reset: Optional[int]
    tcp_flags_syn: Optional[int]
    mqtt_msgtype: Optional[int]
    mqtt_qos: Optional[int]
    mqtt_retain: Optional[int]
    mqtt_topic: str
    mqtt_clientid: str
    label: int = 0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("tcp_flags_ack", "tcp_flags_fin", "tcp_flags_push",
                     "tcp_flags_reset", "tcp_flags_syn", "mqtt_retain"):
            _check_binary(name, getattr(self, name))
        if self.mqtt_qos is not None and self.mqtt_qos not in (0, 1, 2):
            raise RecordError(f"mqtt_qos must be 0, 1 or 2, got {self.mqtt_qos!r}")
        if self.frame_len is not None and self.frame_len < 0:
            raise RecordError(f"frame_len must be >= 0, got {self.frame_len}")
        if self.frame_time_delta is not None and self.frame_time_delta < 0:
            raise RecordError(f"frame_time_delta must be >= 0, got {self.frame_time_delta}")
        _check_binary("label", self.label, allow_missing=False)

    @property
    def mqtt_topic_len(self) -> int:
        return len(self.mqtt_topic)

    @property
    def mqtt_clientid_len(self) -> int:
        return len(self.mqtt_clientid)


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """Named-column numeric matrix with an explicit missing-cell mask."""

    column_names: tuple
    values: np.ndarray
    missing_mask: np.ndarray = None

    def __post_init__(self):
        names = tuple(self.column_names)
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.ndim != 2:
            raise ValueError("values must be a 2-D array")
        if len(names) != values.shape[1]:
            raise ValueError(f"{len(names)} column names for {values.shape[1]} columns")
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise ValueError(f"duplicate column names: {dupes}")
        # a NaN cell is always missing, whether or not the mask says so
        mask = np.isnan(values)
        if self.missing_mask is not None:
            given = np.asarray(self.missing_mask, dtype=bool)
            if given.shape != values.shape:
                raise ValueError("missing_mask shape differs from values shape")
            mask |= given
        values[mask] = np.nan
        values.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "column_names", names)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "missing_mask", mask)

    @classmethod
    def from_columns(cls, columns: dict) -> "FeatureMatrix":
        """Build from ``{name: 1-D array}``; NaN cells become missing."""
        names = list(columns)
        if not names:
            raise ValueError("at least one column is required")
        values = np.column_stack([np.asarray(columns[n], dtype=np.float64) for n in names])
        return cls(tuple(names), values, np.isnan(values))

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]

    def index(self, name: str) -> int:
        try:
            return self.column_names.index(name)
        except ValueError:
            raise KeyError(f"no column named {name!r}") from None

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.index(name)]

    def select(self, names: Sequence[str]) -> "FeatureMatrix":
        idx = [self.index(n) for n in names]
        return FeatureMatrix(tuple(names), self.values[:, idx], self.missing_mask[:, idx])

    def take(self, rows) -> "FeatureMatrix":
        return FeatureMatrix(self.column_names, self.values[rows], self.missing_mask[rows])

    def hstack(self, other: "FeatureMatrix") -> "FeatureMatrix":
        return FeatureMatrix(
            self.column_names + other.column_names,
            np.hstack([self.values, other.values]),
            np.hstack([self.missing_mask, other.missing_mask]),
        )

    def with_values(self, values: np.ndarray) -> "FeatureMatrix":
        """Same columns, new fully-observed values."""
        return FeatureMatrix(self.column_names, values)

    @property
    def has_missing(self) -> bool:
        return bool(self.missing_mask.any())

    def __eq__(self, other):
        if not isinstance(other, FeatureMatrix):
            return NotImplemented
        return (self.column_names == other.column_names
                and np.array_equal(self.missing_mask, other.missing_mask)
                and np.array_equal(self.values, other.values, equal_nan=True))


class Family(str, Enum):
    GBDT = "GBDT"
    KNN = "KNN"
    ISOFOREST = "ISOFOREST"
    OCSVM = "OCSVM"
    AUTOENCODER = "AUTOENCODER"
    VAE = "VAE"


# Reserved model names without an implementation; reports carry a placeholder row for each.
RESERVED_MODELS = ("GAN", "GNN", "LSTM_AUTOENCODER")


@dataclass(frozen=True)
class DetectorSpec:
    """Hyperparameters for one detector.  Only fields used by ``family`` are read.

    ``gamma=None`` means ``1 / (n_features * X.var())`` at fit time.
    """

    family: Family
    learning_rate: float = 0.1
    max_depth: int = 6
    n_rounds: int = 100
    reg_lambda: float = 1.0
    k: int = 5
    distance: str = "euclidean"
    contamination: float = 0.1
    n_trees: int = 100
    subsample: int = 256
    nu: float = 0.1
    gamma: Optional[float] = None
    ocsvm_max_train: int = 2000
    ocsvm_tol: float = 1e-6
    ocsvm_max_iter: int = 200_000
    latent_dim: int = 2
    hidden_dim: int = 16
    epochs: int = 100
    batch_size: int = 32
    nn_learning_rate: float = 0.01
    threshold_percentile: float = 80.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if not 0.0 < self.contamination <= 0.5:
            raise ValueError(f"contamination must lie in (0, 0.5], got {self.contamination}")
        if not 0.0 < self.nu <= 1.0:
            raise ValueError(f"nu must lie in (0, 1], got {self.nu}")
        if not 0.0 < self.threshold_percentile < 100.0:
            raise ValueError("threshold_percentile must lie in (0, 100)")
        if self.distance != "euclidean":
            raise ValueError(f"unsupported distance {self.distance!r}")
        if self.k < 1:
            raise ValueError("k must be >= 1")

    def with_overrides(self, **overrides) -> "DetectorSpec":
        return replace(self, **overrides)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["family"] = self.family.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DetectorSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown DetectorSpec fields: {sorted(unknown)}")
        return cls(**d)


_DEVICE = {
    Family.GBDT: dict(learning_rate=0.1, max_depth=6),
    Family.KNN: dict(k=5),
    Family.VAE: dict(latent_dim=2, epochs=100, batch_size=32),
    Family.AUTOENCODER: dict(latent_dim=2, epochs=100, batch_size=32),
    Family.OCSVM: dict(nu=0.2, gamma=None),
    Family.ISOFOREST: dict(contamination=0.2),
}

_CYBER = {
    Family.GBDT: dict(learning_rate=0.1, max_depth=6),
    Family.KNN: dict(k=5),
    Family.VAE: dict(latent_dim=10, epochs=200, batch_size=32),
    Family.AUTOENCODER: dict(latent_dim=10, epochs=200, batch_size=32),
    Family.OCSVM: dict(nu=0.1, gamma=0.1),
    Family.ISOFOREST: dict(contamination=0.1),
}

PRESETS = {"table3": _DEVICE, "table4": _CYBER}
TASK_PRESET = {"device": "table3", "cyber": "table4"}


def preset_spec(preset: str, family, seed: int = 0, **overrides) -> DetectorSpec:
    """Spec for ``family`` from the ``table3`` (device) or ``table4`` (cyber) preset."""
    family = Family(family)
    try:
        params = PRESETS[preset][family]
    except KeyError:
        raise ValueError(f"unknown preset {preset!r}") from None
    return DetectorSpec(family=family, seed=seed, **{**params, **overrides})


def device_preset(family, seed: int = 0, **overrides) -> DetectorSpec:
    return preset_spec("table3", family, seed, **overrides)


def cyber_preset(family, seed: int = 0, **overrides) -> DetectorSpec:
    return preset_spec("table4", family, seed, **overrides)


@dataclass
class TrainedModel:
    """A fitted detector plus everything needed to score new rows.

    ``threshold_rule`` decides how scores become flags:

    * ``"ge"`` / ``"gt"``: compare against the stored ``threshold``;
    * ``"quota"``: flag the top ``round(contamination * n)`` rows of the scored batch;
    * ``"percentile"``: nearest-rank percentile rule applied to the scored batch.

    ``threshold`` always holds the cutoff realized on the training rows.
    """

    family: Family
    spec: DetectorSpec
    params: Any
    feature_names: tuple
    scaler: Any
    threshold: float
    threshold_rule: str
    train_flags: np.ndarray = None


@dataclass
class ModelResult:
    model: str
    protocol: str
    accuracy: Optional[float] = None
    precision: Optional[float] = None
    recall: Optional[float] = None
    f1: Optional[float] = None
    roc_auc: Optional[float] = None
    detect_seconds: Optional[float] = None
    status: str = "ok"
    error: Optional[str] = None

    def __post_init__(self):
        if self.roc_auc is not None and not 0.0 <= self.roc_auc <= 1.0:
            raise ValueError(f"roc_auc outside [0, 1]: {self.roc_auc}")
        if None not in (self.precision, self.recall, self.f1):
            p, r = self.precision, self.recall
            hm = 0.0 if p + r == 0 else 2 * p * r / (p + r)
            if not math.isclose(self.f1, hm, rel_tol=0, abs_tol=1e-12):
                raise ValueError("f1 is not the harmonic mean of precision and recall")


@dataclass
class EvalReport:
    task: str
    seed: int
    dataset: dict
    config: dict
    rows: list
    schema_version: int = 1

    def row(self, model: str) -> ModelResult:
        for r in self.rows:
            if r.model == model:
                return r
        raise KeyError(model)

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "task": self.task,
            "seed": self.seed,
            "dataset": self.dataset,
            "config": self.config,
            "rows": [asdict(r) for r in self.rows],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        if d.get("schema_version") != 1:
            raise SchemaError(f"unsupported report schema_version {d.get('schema_version')!r}")
        return cls(
            task=d["task"],
            seed=d["seed"],
            dataset=d["dataset"],
            config=d["config"],
            rows=[ModelResult(**r) for r in d["rows"]],
            schema_version=d["schema_version"],
        )


def labels_of(records: Iterable) -> np.ndarray:
    return np.fromiter((r.label for r in records), dtype=np.int64)
