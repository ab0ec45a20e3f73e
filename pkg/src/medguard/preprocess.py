"""Cleaning, scaling and feature engineering.

All statistics (medians, category vocabularies, scaler moments, flag
moments) are fitted on training rows only and then frozen.  Standard
deviations are population deviations (``ddof=0``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .datamodel import DeviceRecord, FeatureMatrix, NetRecord

EPS = 1e-9
TCP_SCORE_FLAGS = ("tcp.flags.ack", "tcp.flags.push", "tcp.flags.reset", "tcp.flags.syn")


class PreprocessError(ValueError):
    pass


def column_medians(m: FeatureMatrix) -> dict:
    """Median of the observed cells of every column."""
    out = {}
    for j, name in enumerate(m.column_names):
        col = m.values[~m.missing_mask[:, j], j]
        if col.size == 0:
            raise PreprocessError(f"column {name!r} has no observed values")
        out[name] = float(np.median(col))
    return out


def impute_median(m: FeatureMatrix, medians: Optional[dict] = None) -> FeatureMatrix:
    """Replace missing cells with column medians (fitted on ``m`` if not given)."""
    if medians is None:
        medians = column_medians(m)
    values = m.values.copy()
    for j, name in enumerate(m.column_names):
        miss = m.missing_mask[:, j]
        if miss.any():
            if name not in medians:
                raise PreprocessError(f"no fitted median for column {name!r}")
            values[miss, j] = medians[name]
    return FeatureMatrix(m.column_names, values)


def one_hot_encode(columns: dict, vocabulary: Optional[dict] = None):
    """One binary column per (column, category).

    ``columns`` maps a categorical column name to its per-row string values.
    Categories are sorted lexicographically; values missing from a fitted
    ``vocabulary`` encode as all zeros.  Returns ``(FeatureMatrix, vocabulary)``.
    """
    if vocabulary is None:
        vocabulary = {name: sorted(set(vals)) for name, vals in columns.items()}
    blocks = {}
    for name, vals in columns.items():
        vals = np.asarray(list(vals), dtype=object)
        for cat in vocabulary[name]:
            blocks[f"{name}={cat}"] = (vals == cat).astype(np.float64)
    if not blocks:
        n = len(next(iter(columns.values()))) if columns else 0
        return FeatureMatrix((), np.zeros((n, 0))), vocabulary
    return FeatureMatrix.from_columns(blocks), vocabulary


@dataclass(frozen=True)
class ScalerStats:
    column_names: tuple
    mean: np.ndarray
    std: np.ndarray
    min: np.ndarray
    max: np.ndarray
    fitted_on_training: bool = True

    @classmethod
    def fit(cls, m: FeatureMatrix) -> "ScalerStats":
        if m.has_missing:
            raise PreprocessError("scaler fitted on a matrix with missing cells")
        x = m.values
        return cls(m.column_names, x.mean(axis=0), x.std(axis=0), x.min(axis=0), x.max(axis=0))

    def check(self, m: FeatureMatrix):
        if m.column_names != self.column_names:
            raise PreprocessError("column names differ from the fitted scaler")

    def to_dict(self) -> dict:
        return {"column_names": list(self.column_names),
                "mean": self.mean.tolist(), "std": self.std.tolist(),
                "min": self.min.tolist(), "max": self.max.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "ScalerStats":
        return cls(tuple(d["column_names"]), np.array(d["mean"]), np.array(d["std"]),
                   np.array(d["min"]), np.array(d["max"]))


def standard_scale(m: FeatureMatrix, stats: Optional[ScalerStats] = None):
    """``(x - mean) / std``; constant columns map to 0.  Returns ``(matrix, stats)``."""
    if stats is None:
        stats = ScalerStats.fit(m)
    stats.check(m)
    std = stats.std
    safe = np.where(std > 0, std, 1.0)
    out = np.where(std > 0, (m.values - stats.mean) / safe, 0.0)
    return m.with_values(out), stats


def minmax_scale(m: FeatureMatrix, stats: Optional[ScalerStats] = None):
    """``(x - min) / (max - min)`` clipped to [0, 1]; constant columns map to 0."""
    if stats is None:
        stats = ScalerStats.fit(m)
    stats.check(m)
    span = stats.max - stats.min
    safe = np.where(span > 0, span, 1.0)
    out = np.where(span > 0, (m.values - stats.min) / safe, 0.0)
    return m.with_values(np.clip(out, 0.0, 1.0)), stats


def _streams(stream_ids) -> list:
    """Row indices of each stream, in order of first appearance."""
    groups: dict = {}
    for i, sid in enumerate(stream_ids):
        groups.setdefault(sid, []).append(i)
    return [np.asarray(ix, dtype=np.int64) for ix in groups.values()]


def rolling_deviation(values, window: int, stream_ids: Optional[Sequence] = None) -> np.ndarray:
    """``|x_t - mean(x[t-window+1 .. t])|`` computed independently per stream.

    Rows of a stream are taken in the order they appear; the window shrinks
    at the start of each stream.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    x = np.asarray(values, dtype=np.float64)
    out = np.zeros_like(x)
    if x.size == 0:
        return out
    groups = [np.arange(x.size)] if stream_ids is None else _streams(stream_ids)
    for ix in groups:
        # centring on the first value keeps the running sums small
        d = x[ix] - x[ix[0]]
        c = np.concatenate([[0.0], np.cumsum(d)])
        t = np.arange(1, d.size + 1)
        lo = np.maximum(t - window, 0)
        out[ix] = np.abs(d - (c[t] - c[lo]) / (t - lo))
    return out


def time_features(timestamps):
    """UTC hour of day (0-23) and day of week (Monday = 0)."""
    ts = np.floor(np.asarray(timestamps, dtype=np.float64)).astype(np.int64)
    hour = (ts // 3600) % 24
    # 1970-01-01 was a Thursday
    dow = (ts // 86400 + 3) % 7
    return hour, dow


@dataclass(frozen=True)
class FlagStats:
    columns: tuple
    mean: np.ndarray
    std: np.ndarray


def tcp_anomaly_score(m: FeatureMatrix, flag_columns=TCP_SCORE_FLAGS,
                      stats: Optional[FlagStats] = None):
    """Sum of standardized absolute flag deviations, appended as ``tcp_anomaly_score``.

    Returns ``(matrix with the new column, FlagStats)``.
    """
    for c in flag_columns:
        if c not in m.column_names:
            raise PreprocessError(f"flag column {c!r} not present")
    x = m.select(flag_columns).values
    if stats is None:
        stats = FlagStats(tuple(flag_columns), x.mean(axis=0), x.std(axis=0))
    score = (np.abs(x - stats.mean) / np.maximum(stats.std, EPS)).sum(axis=1)
    extra = FeatureMatrix(("tcp_anomaly_score",), score[:, None])
    return m.hstack(extra), stats


# ---------------------------------------------------------------------------
# Task feature builders

DEVICE_NUMERIC = (
    ("Temperature", "temperature"),
    ("Systolic_BP", "systolic_bp"),
    ("Diastolic_BP", "diastolic_bp"),
    ("Heart_Rate", "heart_rate"),
    ("Device_Battery_Level", "battery_level"),
    ("Target_Blood_Pressure", "target_blood_pressure"),
    ("Target_Heart_Rate", "target_heart_rate"),
)
DEVICE_CATEGORICAL = (("Sensor_Type", "sensor_type"), ("Target_Health_Status", "target_health_status"))

NET_NUMERIC = (
    ("frame.time_delta", "frame_time_delta"),
    ("frame.time_relative", "frame_time_relative"),
    ("frame.len", "frame_len"),
    ("tcp.srcport", "tcp_srcport"),
    ("tcp.dstport", "tcp_dstport"),
    ("tcp.flags.ack", "tcp_flags_ack"),
    ("tcp.flags.fin", "tcp_flags_fin"),
    ("tcp.flags.push", "tcp_flags_push"),
    ("tcp.flags.reset", "tcp_flags_reset"),
    ("tcp.flags.syn", "tcp_flags_syn"),
    ("mqtt.msgtype", "mqtt_msgtype"),
    ("mqtt.qos", "mqtt_qos"),
    ("mqtt.retain", "mqtt_retain"),
    ("mqtt.topic_len", "mqtt_topic_len"),
    ("mqtt.clientid_len", "mqtt_clientid_len"),
)
NET_CATEGORICAL = (("ip.src", "ip_src"), ("ip.dst", "ip_dst"))


def _num(v):
    return np.nan if v is None else float(v)


def device_raw_matrix(records: Sequence[DeviceRecord]) -> FeatureMatrix:
    cols = {name: [_num(getattr(r, f)) for r in records] for name, f in DEVICE_NUMERIC}
    cols["Timestamp"] = [_num(r.timestamp) for r in records]
    return FeatureMatrix.from_columns(cols)


def net_raw_matrix(records: Sequence[NetRecord], extra_names: Sequence[str]) -> FeatureMatrix:
    cols = {name: [_num(getattr(r, f)) for r in records] for name, f in NET_NUMERIC}
    for name in extra_names:
        if name in cols:
            continue
        cols[name] = [_num(r.extra.get(name)) for r in records]
    return FeatureMatrix.from_columns(cols)


@dataclass
class FeaturePipeline:
    """Fit-once, transform-many feature construction for one task.

    ``task`` is ``"device"`` or ``"cyber"``.  :meth:`fit` learns medians,
    vocabularies and flag moments from the given training rows; afterwards
    :meth:`transform` turns any record list into a fully observed, unscaled
    :class:`FeatureMatrix`.
    """

    task: str
    window: int = 10
    use_tcp_score: bool = True
    medians: dict = field(default_factory=dict)
    vocabulary: dict = field(default_factory=dict)
    extra_names: tuple = ()
    flag_stats: Optional[FlagStats] = None
    fitted: bool = False

    def __post_init__(self):
        if self.task not in ("device", "cyber"):
            raise ValueError(f"unknown task {self.task!r}")

    def fit(self, records, train_rows=None) -> "FeaturePipeline":
        rows = np.arange(len(records)) if train_rows is None else np.asarray(train_rows)
        if self.task == "device":
            raw = device_raw_matrix(records)
            self.medians = column_medians(raw.take(rows))
            interval = self._intervals(records, impute_median(raw, self.medians))
            observed = interval[rows][~np.isnan(interval[rows])]
            self.medians["Reading_Interval"] = float(np.median(observed)) if observed.size else 0.0
            cats = {name: [getattr(records[i], f) for i in rows] for name, f in DEVICE_CATEGORICAL}
        else:
            train = [records[i] for i in rows]
            self.extra_names = tuple(sorted({k for r in train for k in r.extra}))
            raw = net_raw_matrix(records, self.extra_names)
            self.medians = column_medians(raw.take(rows))
            cats = {name: [getattr(records[i], f) for i in rows] for name, f in NET_CATEGORICAL}
        _, self.vocabulary = one_hot_encode(cats)
        self.fitted = True
        if self.task == "cyber" and self.use_tcp_score:
            base = self._cyber_numeric(records)
            _, self.flag_stats = tcp_anomaly_score(base.take(rows))
        return self

    def transform(self, records) -> FeatureMatrix:
        if not self.fitted:
            raise PreprocessError("pipeline used before fit")
        if self.task == "device":
            return self._device(records)
        return self._cyber(records)

    def fit_transform(self, records, train_rows=None) -> FeatureMatrix:
        return self.fit(records, train_rows).transform(records)

    @staticmethod
    def _intervals(records, imputed: FeatureMatrix) -> np.ndarray:
        ts = imputed.column("Timestamp")
        gap = np.full(len(records), np.nan)
        for ix in _streams([(r.patient_id, r.sensor_id) for r in records]):
            gap[ix[1:]] = np.diff(ts[ix])
        return gap

    def _device(self, records) -> FeatureMatrix:
        raw = impute_median(device_raw_matrix(records), self.medians)
        streams = [(r.patient_id, r.sensor_id) for r in records]
        gap = self._intervals(records, raw)
        gap[np.isnan(gap)] = self.medians["Reading_Interval"]
        hour, dow = time_features(raw.column("Timestamp"))
        cols = {name: raw.column(name) for name, _ in DEVICE_NUMERIC}
        cols["HRD"] = rolling_deviation(raw.column("Heart_Rate"), self.window, streams)
        cols["BPD_Systolic"] = rolling_deviation(raw.column("Systolic_BP"), self.window, streams)
        cols["BPD_Diastolic"] = rolling_deviation(raw.column("Diastolic_BP"), self.window, streams)
        cols["Battery_Deviation"] = rolling_deviation(raw.column("Device_Battery_Level"), self.window, streams)
        cols["Reading_Interval"] = gap
        cols["Hour_Of_Day"] = hour
        cols["Day_Of_Week"] = dow
        num = FeatureMatrix.from_columns(cols)
        cats = {name: [getattr(r, f) for r in records] for name, f in DEVICE_CATEGORICAL}
        onehot, _ = one_hot_encode(cats, self.vocabulary)
        return num.hstack(onehot)

    def _cyber_numeric(self, records) -> FeatureMatrix:
        return impute_median(net_raw_matrix(records, self.extra_names), self.medians)

    def _cyber(self, records) -> FeatureMatrix:
        num = self._cyber_numeric(records)
        if self.use_tcp_score:
            num, _ = tcp_anomaly_score(num, stats=self.flag_stats)
        cats = {name: [getattr(r, f) for r in records] for name, f in NET_CATEGORICAL}
        onehot, _ = one_hot_encode(cats, self.vocabulary)
        return num.hstack(onehot)
