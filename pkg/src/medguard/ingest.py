"""CSV parsing and synthetic data generation for device and network records.

CSV dialect: comma separated, UTF-8, ``.`` decimal point, mandatory header.
Device headers follow the medical-device table (``Temperature``,
``Heart_Rate``, ...; a trailing unit in parentheses such as
``Temperature (°C)`` is accepted).  Network headers keep their dotted
Wireshark spellings (``tcp.flags.syn``).
"""

from __future__ import annotations

import csv
import logging
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import numpy as np

from .datamodel import DeviceRecord, NetRecord, RecordError, SchemaError
from .rng import Rng

log = logging.getLogger(__name__)


class EmptyFileError(SchemaError):
    """The file has no header or no data rows."""


# CSV header -> (DeviceRecord field, kind)
DEVICE_COLUMNS = {
    "Patient_ID": ("patient_id", "str"),
    "Timestamp": ("timestamp", "time"),
    "Sensor_ID": ("sensor_id", "str"),
    "Sensor_Type": ("sensor_type", "str"),
    "Temperature": ("temperature", "float"),
    "Systolic_BP": ("systolic_bp", "float"),
    "Diastolic_BP": ("diastolic_bp", "float"),
    "Heart_Rate": ("heart_rate", "float"),
    "Device_Battery_Level": ("battery_level", "float"),
    "Target_Blood_Pressure": ("target_blood_pressure", "float"),
    "Target_Heart_Rate": ("target_heart_rate", "float"),
    "Target_Health_Status": ("target_health_status", "str"),
}
DEVICE_ALIASES = {"Battery_Level": "Device_Battery_Level"}

ATTACK_COLUMNS = {
    "frame.time_delta": ("frame_time_delta", "float"),
    "frame.time_relative": ("frame_time_relative", "float"),
    "frame.len": ("frame_len", "float"),
    "ip.src": ("ip_src", "str"),
    "ip.dst": ("ip_dst", "str"),
    "tcp.srcport": ("tcp_srcport", "int"),
    "tcp.dstport": ("tcp_dstport", "int"),
    "tcp.flags.ack": ("tcp_flags_ack", "int"),
    "tcp.flags.fin": ("tcp_flags_fin", "int"),
    "tcp.flags.push": ("tcp_flags_push", "int"),
    "tcp.flags.reset": ("tcp_flags_reset", "int"),
    "tcp.flags.syn": ("tcp_flags_syn", "int"),
    "mqtt.msgtype": ("mqtt_msgtype", "int"),
    "mqtt.qos": ("mqtt_qos", "int"),
    "mqtt.retain": ("mqtt_retain", "int"),
    "mqtt.topic": ("mqtt_topic", "str"),
    "mqtt.clientid": ("mqtt_clientid", "str"),
}

DEFAULT_DEVICE_LABEL = "Label"
DEFAULT_ATTACK_LABEL = "label"

_MISSING_TOKENS = {"", "na", "nan", "null", "none", "?"}
_LABEL_WORDS = {
    "0": 0, "1": 1, "false": 0, "true": 1, "normal": 0, "benign": 0,
    "attack": 1, "anomaly": 1, "faulty": 1, "malicious": 1,
}


@dataclass
class ParseReport:
    n_rows: int = 0
    missing_cells: Counter = field(default_factory=Counter)
    unparseable_cells: Counter = field(default_factory=Counter)
    ignored_columns: list = field(default_factory=list)

    @property
    def total_missing(self) -> int:
        return sum(self.missing_cells.values())


def _canonical_device_header(name: str) -> str:
    name = re.sub(r"\s*\([^)]*\)\s*$", "", name.strip())
    name = re.sub(r"\s+", "_", name)
    return DEVICE_ALIASES.get(name, name)


def _parse_number(text: str):
    """float, hex int, or ``None`` for missing.  Raises ValueError if unparseable."""
    t = text.strip()
    if t.lower() in _MISSING_TOKENS:
        return None
    if t.lower().startswith("0x"):
        return float(int(t, 16))
    v = float(t)
    if math.isnan(v):
        return None
    return v


def _parse_time(text: str):
    t = text.strip()
    if t.lower() in _MISSING_TOKENS:
        return None
    try:
        return float(t)
    except ValueError:
        pass
    dt = datetime.fromisoformat(t)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def _parse_label(text: str, line: int) -> int:
    t = text.strip().lower()
    if t in _LABEL_WORDS:
        return _LABEL_WORDS[t]
    try:
        v = float(t)
    except ValueError:
        v = None
    if v in (0.0, 1.0):
        return int(v)
    raise RecordError(f"line {line}: label {text!r} is not binary")


def _read_rows(path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or not any(h.strip() for h in header):
            raise EmptyFileError(f"{path}: file is empty")
        rows = [r for r in reader if any(c.strip() for c in r)]
    if not rows:
        raise EmptyFileError(f"{path}: header present but no data rows")
    return header, rows


def _convert(value: str, kind: str, column: str, report: ParseReport):
    if kind == "str":
        return value.strip()
    try:
        v = _parse_time(value) if kind == "time" else _parse_number(value)
    except ValueError:
        report.unparseable_cells[column] += 1
        report.missing_cells[column] += 1
        return None
    if v is None:
        report.missing_cells[column] += 1
        return None
    if kind == "int":
        if v != int(v):
            report.unparseable_cells[column] += 1
            report.missing_cells[column] += 1
            return None
        return int(v)
    return v


def read_device_csv(path, label_column: str = DEFAULT_DEVICE_LABEL):
    """Parse a device CSV.  Returns ``(records, ParseReport)``."""
    header, rows = _read_rows(path)
    canon = [_canonical_device_header(h) for h in header]
    positions = {name: i for i, name in enumerate(canon)}
    for col in list(DEVICE_COLUMNS) + [label_column]:
        if col not in positions:
            raise SchemaError(f"{path}: missing required column {col!r}")
    report = ParseReport(n_rows=len(rows))
    report.ignored_columns = [h for h, c in zip(header, canon)
                              if c not in DEVICE_COLUMNS and c != label_column]
    records = []
    for line, row in enumerate(rows, start=2):
        row = row + [""] * (len(header) - len(row))
        kw = {}
        for col, (fname, kind) in DEVICE_COLUMNS.items():
            kw[fname] = _convert(row[positions[col]], kind, col, report)
        kw["label"] = _parse_label(row[positions[label_column]], line)
        try:
            records.append(DeviceRecord(**kw))
        except RecordError as exc:
            raise RecordError(f"{path}: line {line}: {exc}") from None
    records.sort(key=_device_sort_key)
    return records, report


def _device_sort_key(r: DeviceRecord):
    ts = math.inf if r.timestamp is None else r.timestamp
    return (r.patient_id, r.sensor_id, ts)


def parse_device_csv(path, label_column: str = DEFAULT_DEVICE_LABEL) -> list:
    records, report = read_device_csv(path, label_column)
    if report.total_missing:
        log.warning("%s: %d missing cells (%d unparseable): %s", path, report.total_missing,
                    sum(report.unparseable_cells.values()), dict(report.missing_cells))
    return records


def read_attack_csv(path, label_column: str = DEFAULT_ATTACK_LABEL):
    """Parse a network-traffic CSV.  Returns ``(records, ParseReport)``.

    Columns outside the core schema whose non-empty cells are all numeric
    (decimal or ``0x`` hex) are kept in ``NetRecord.extra``; others are ignored.
    """
    header, rows = _read_rows(path)
    header = [h.strip() for h in header]
    positions = {name: i for i, name in enumerate(header)}
    for col in list(ATTACK_COLUMNS) + [label_column]:
        if col not in positions:
            raise SchemaError(f"{path}: missing required column {col!r}")
    report = ParseReport(n_rows=len(rows))
    extra_cols = []
    for i, name in enumerate(header):
        if name in ATTACK_COLUMNS or name == label_column:
            continue
        try:
            for r in rows:
                if i < len(r):
                    _parse_number(r[i])
            extra_cols.append((i, name))
        except ValueError:
            report.ignored_columns.append(name)
    records = []
    for line, row in enumerate(rows, start=2):
        row = row + [""] * (len(header) - len(row))
        kw = {}
        for col, (fname, kind) in ATTACK_COLUMNS.items():
            kw[fname] = _convert(row[positions[col]], kind, col, report)
        kw["label"] = _parse_label(row[positions[label_column]], line)
        extra = {}
        for i, name in extra_cols:
            v = _parse_number(row[i])
            if v is None:
                report.missing_cells[name] += 1
            extra[name] = v
        kw["extra"] = extra
        try:
            records.append(NetRecord(**kw))
        except RecordError as exc:
            raise RecordError(f"{path}: line {line}: {exc}") from None
    return records, report


def parse_attack_csv(path, label_column: str = DEFAULT_ATTACK_LABEL) -> list:
    records, report = read_attack_csv(path, label_column)
    if report.total_missing:
        log.warning("%s: %d missing cells (%d unparseable): %s", path, report.total_missing,
                    sum(report.unparseable_cells.values()), dict(report.missing_cells))
    return records


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(float(v))
    return str(v)


def write_device_csv(records, path, label_column: str = DEFAULT_DEVICE_LABEL) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(DEVICE_COLUMNS) + [label_column])
        for r in records:
            w.writerow([_fmt(getattr(r, f)) for f, _ in DEVICE_COLUMNS.values()] + [r.label])


def write_attack_csv(records, path, label_column: str = DEFAULT_ATTACK_LABEL) -> None:
    path = Path(path)
    extra_names = sorted({k for r in records for k in r.extra})
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(ATTACK_COLUMNS) + extra_names + [label_column])
        for r in records:
            core = [_fmt(getattr(r, f)) for f, _ in ATTACK_COLUMNS.values()]
            w.writerow(core + [_fmt(r.extra.get(k)) for k in extra_names] + [r.label])


# ---------------------------------------------------------------------------
# Synthetic generation

DEVICE_FAULTS = ("temperature_spike", "battery_collapse", "frozen_reading", "extreme_value")
ATTACK_KINDS = ("syn_burst", "reset_storm", "mqtt_exploit")

SENSOR_TYPES = ("ECG", "SpO2", "NIBP", "Temp", "Resp", "EtCO2", "IBP", "EEG", "Infusion")
HEALTH_STATUS = ("Critical", "Monitor", "Stable")

# Epoch of the first synthetic reading: 2023-11-14T22:13:20Z.
BASE_EPOCH = 1_700_000_000.0


@dataclass(frozen=True)
class DeviceBaseline:
    """Nominal vital-sign distributions; per-patient offsets use half the spread."""

    temperature: tuple = (36.8, 0.4)
    heart_rate: tuple = (75.0, 8.0)
    systolic_bp: tuple = (120.0, 10.0)
    diastolic_bp: tuple = (80.0, 7.0)
    battery_start: float = 100.0
    battery_end: float = 20.0
    battery_noise: float = 0.5
    interval_seconds: float = 60.0
    interval_jitter: float = 3.0


@dataclass(frozen=True)
class GenConfig:
    n_records: int = 100_000
    anomaly_rate: float = 0.2
    n_patients: int = 10
    n_sensors_per_patient: int = 9
    mix: Optional[dict] = None
    seed: int = 0
    baseline: DeviceBaseline = DeviceBaseline()

    def __post_init__(self):
        if not 0.0 < self.anomaly_rate <= 0.5:
            raise ValueError(f"anomaly_rate must lie in (0, 0.5], got {self.anomaly_rate}")
        if self.n_records < 1 or self.n_patients < 1 or self.n_sensors_per_patient < 1:
            raise ValueError("n_records, n_patients and n_sensors_per_patient must be >= 1")
        if self.mix is not None:
            w = list(self.mix.values())
            if any(v < 0 for v in w) or not any(v > 0 for v in w):
                raise ValueError("mix weights must be non-negative and not all zero")

    @property
    def n_anomalies(self) -> int:
        return int(math.floor(self.anomaly_rate * self.n_records + 0.5))

    def weights(self, kinds) -> np.ndarray:
        if self.mix is None:
            return np.ones(len(kinds))
        unknown = set(self.mix) - set(kinds)
        if unknown:
            raise ValueError(f"unknown scenario kinds {sorted(unknown)}; expected {kinds}")
        w = np.array([float(self.mix.get(k, 0.0)) for k in kinds])
        if not (w > 0).any():
            raise ValueError("mix weights for this generator are all zero")
        return w


def _stream_sizes(n: int, n_streams: int) -> list:
    base, extra = divmod(n, n_streams)
    return [base + (1 if s < extra else 0) for s in range(n_streams)]


def generate_device_data(cfg: GenConfig, return_kinds: bool = False):
    """Synthetic device readings with exactly ``round(rate * n)`` faulty rows.

    Each fault realizes one kind: a temperature spike of +3..6 °C, a battery
    collapse to 0..3 %, a frozen reading (the previous record re-sent with
    its timestamp unchanged) or an erroneous heart rate of 200..300 bpm.
    The first record of every stream is always normal.
    """
    b = cfg.baseline
    rng = Rng(cfg.seed)
    n_streams = cfg.n_patients * cfg.n_sensors_per_patient
    sizes = _stream_sizes(cfg.n_records, n_streams)
    starts = np.cumsum([0] + sizes[:-1])
    first = set(int(s) for s, m in zip(starts, sizes) if m > 0)
    candidates = np.array([i for i in range(cfg.n_records) if i not in first], dtype=np.int64)
    n_anom = cfg.n_anomalies
    if n_anom > len(candidates):
        raise ValueError("anomaly_rate too high for the number of streams")
    fault_rows = candidates[rng.child(1).choice(len(candidates), n_anom)]
    fault_kinds = rng.child(2).categorical(n_anom, cfg.weights(DEVICE_FAULTS))
    kind_of = np.full(cfg.n_records, -1, dtype=np.int64)
    kind_of[fault_rows] = fault_kinds

    prng = rng.child(3)
    half = 0.5
    pat = {
        "temperature": prng.normal(cfg.n_patients, b.temperature[0], half * b.temperature[1]),
        "heart_rate": prng.normal(cfg.n_patients, b.heart_rate[0], half * b.heart_rate[1]),
        "systolic_bp": prng.normal(cfg.n_patients, b.systolic_bp[0], half * b.systolic_bp[1]),
        "diastolic_bp": prng.normal(cfg.n_patients, b.diastolic_bp[0], half * b.diastolic_bp[1]),
    }
    status = prng.categorical(cfg.n_patients, [0.1, 0.3, 0.6])

    records = []
    for s in range(n_streams):
        m = sizes[s]
        if m == 0:
            continue
        p, k = divmod(s, cfg.n_sensors_per_patient)
        srng = rng.child(1000 + s)
        kinds = kind_of[starts[s]:starts[s] + m]
        cols = {}
        for name, (_, sd) in (("temperature", b.temperature), ("heart_rate", b.heart_rate),
                              ("systolic_bp", b.systolic_bp), ("diastolic_bp", b.diastolic_bp)):
            cols[name] = np.round(srng.normal(m, pat[name][p], sd), 2)
        pos = np.arange(m) / max(m - 1, 1)
        battery = b.battery_start + (b.battery_end - b.battery_start) * pos
        battery = battery + srng.normal(m, 0.0, b.battery_noise)
        cols["battery_level"] = np.round(np.clip(battery, 0.0, 100.0), 2)
        inc = b.interval_seconds + srng.uniform(m, -b.interval_jitter, b.interval_jitter)
        inc[0] = srng.uniform(1, 0.0, 600.0)[0]
        fault_u = srng.uniform(m)
        for i in np.flatnonzero(kinds == 2):
            inc[i] = 0.0
        ts = np.round(BASE_EPOCH + np.cumsum(inc), 3)

        for i in np.flatnonzero(kinds >= 0):
            kind = DEVICE_FAULTS[kinds[i]]
            if kind == "temperature_spike":
                cols["temperature"][i] = round(pat["temperature"][p] + 3.0 + 3.0 * fault_u[i], 2)
            elif kind == "battery_collapse":
                cols["battery_level"][i] = round(3.0 * fault_u[i], 2)
            elif kind == "frozen_reading":
                for name in ("temperature", "heart_rate", "systolic_bp", "diastolic_bp",
                             "battery_level"):
                    cols[name][i] = cols[name][i - 1]
            else:
                cols["heart_rate"][i] = round(200.0 + 100.0 * fault_u[i], 2)

        pid = f"P{p + 1:04d}"
        sid = f"{pid}-S{k + 1:02d}"
        stype = SENSOR_TYPES[k % len(SENSOR_TYPES)]
        hs = HEALTH_STATUS[status[p]]
        tbp = float(round(pat["systolic_bp"][p]))
        thr = float(round(pat["heart_rate"][p]))
        for i in range(m):
            records.append(DeviceRecord(
                patient_id=pid, timestamp=float(ts[i]), sensor_id=sid, sensor_type=stype,
                temperature=float(cols["temperature"][i]),
                systolic_bp=float(cols["systolic_bp"][i]),
                diastolic_bp=float(cols["diastolic_bp"][i]),
                heart_rate=float(cols["heart_rate"][i]),
                battery_level=float(cols["battery_level"][i]),
                target_blood_pressure=tbp, target_heart_rate=thr, target_health_status=hs,
                label=int(kinds[i] >= 0),
            ))
    if return_kinds:
        return records, [DEVICE_FAULTS[k] if k >= 0 else "normal" for k in kind_of]
    return records


def patient_baselines(cfg: GenConfig) -> dict:
    """Per-patient baseline temperature used by :func:`generate_device_data`."""
    b = cfg.baseline
    prng = Rng(cfg.seed).child(3)
    temps = prng.normal(cfg.n_patients, b.temperature[0], 0.5 * b.temperature[1])
    return {f"P{p + 1:04d}": float(t) for p, t in enumerate(temps)}


N_DEVICES = 12
BROKER_IP = "10.0.0.5"
DEVICE_IPS = tuple(f"10.0.1.{10 + i}" for i in range(N_DEVICES))
ATTACKER_IPS = tuple(f"203.0.113.{i}" for i in range(1, 9))
VITAL_TOPICS = ("hr", "spo2", "bp", "temp", "resp")

# normal packet kinds and their frequencies
_NORMAL_KINDS = ("publish", "puback", "pingreq", "pingresp", "ack", "connect", "connack",
                 "syn", "fin")
_NORMAL_WEIGHTS = (0.62, 0.10, 0.05, 0.05, 0.10, 0.02, 0.02, 0.02, 0.02)
_EPISODE_LEN = {"syn_burst": (10, 40), "reset_storm": (5, 20), "mqtt_exploit": (1, 3)}
_RARE_MSGTYPES = (5, 6, 7, 15)


def _net(**kw) -> NetRecord:
    base = dict(tcp_flags_ack=0, tcp_flags_fin=0, tcp_flags_push=0, tcp_flags_reset=0,
                tcp_flags_syn=0, mqtt_msgtype=0, mqtt_qos=0, mqtt_retain=0,
                mqtt_topic="", mqtt_clientid="")
    base.update(kw)
    return NetRecord(**base)


def _normal_packet(kind: str, u: np.ndarray) -> dict:
    """Fields of one benign packet; ``u`` holds 6 uniforms."""
    dev = int(u[0] * N_DEVICES)
    dev_ip, port = DEVICE_IPS[dev], 40000 + 113 * dev
    up = dict(ip_src=dev_ip, ip_dst=BROKER_IP, tcp_srcport=port, tcp_dstport=1883)
    down = dict(ip_src=BROKER_IP, ip_dst=dev_ip, tcp_srcport=1883, tcp_dstport=port)
    extra = {"ip.ttl": 64.0, "tcp.hdr_len": 32.0, "mqtt.dupflag": 0.0, "ip.proto": 6.0}
    if kind == "publish":
        topic = f"icu/bed{dev + 1:02d}/{VITAL_TOPICS[int(u[1] * len(VITAL_TOPICS))]}"
        payload = 2 + int(u[2] * 15)
        return dict(**up, tcp_flags_ack=1, tcp_flags_push=1, mqtt_msgtype=3,
                    mqtt_qos=int(u[3] < 0.3), mqtt_retain=int(u[4] < 0.05), mqtt_topic=topic,
                    frame_len=float(66 + 4 + len(topic) + payload), extra=extra)
    if kind == "puback":
        return dict(**down, tcp_flags_ack=1, tcp_flags_push=1, mqtt_msgtype=4,
                    frame_len=70.0, extra=extra)
    if kind == "pingreq":
        return dict(**up, tcp_flags_ack=1, tcp_flags_push=1, mqtt_msgtype=12,
                    frame_len=68.0, extra=extra)
    if kind == "pingresp":
        return dict(**down, tcp_flags_ack=1, tcp_flags_push=1, mqtt_msgtype=13,
                    frame_len=68.0, extra=extra)
    if kind == "ack":
        d = up if u[1] < 0.5 else down
        return dict(**d, tcp_flags_ack=1, frame_len=66.0, extra=extra)
    if kind == "connect":
        cid = f"icu-monitor-{dev + 1:02d}"
        return dict(**up, tcp_flags_ack=1, tcp_flags_push=1, mqtt_msgtype=1,
                    mqtt_clientid=cid, frame_len=float(66 + 14 + len(cid)), extra=extra)
    if kind == "connack":
        return dict(**down, tcp_flags_ack=1, tcp_flags_push=1, mqtt_msgtype=2,
                    frame_len=70.0, extra=extra)
    if kind == "syn":
        return dict(**up, tcp_flags_syn=1, frame_len=74.0,
                    extra={**extra, "tcp.hdr_len": 40.0})
    d = up if u[1] < 0.5 else down
    return dict(**d, tcp_flags_fin=1, tcp_flags_ack=1, frame_len=66.0, extra=extra)


def _attack_packet(kind: str, u: np.ndarray, episode_ip: str) -> dict:
    ttl = float(30 + int(u[0] * 220))
    extra = {"ip.ttl": ttl, "tcp.hdr_len": 20.0, "mqtt.dupflag": 0.0, "ip.proto": 6.0}
    sport = 1024 + int(u[1] * 64511)
    if kind == "syn_burst":
        return dict(ip_src=ATTACKER_IPS[int(u[2] * len(ATTACKER_IPS))], ip_dst=BROKER_IP,
                    tcp_srcport=sport, tcp_dstport=1883, tcp_flags_syn=1,
                    frame_len=float(54 + int(u[3] * 7)), frame_time_delta=1e-6 + 2e-4 * u[4],
                    extra=extra)
    if kind == "reset_storm":
        return dict(ip_src=episode_ip, ip_dst=BROKER_IP, tcp_srcport=sport, tcp_dstport=1883,
                    tcp_flags_reset=1, tcp_flags_ack=1, frame_len=54.0,
                    frame_time_delta=1e-5 + 1e-3 * u[4], extra=extra)
    topic_len = 300 + int(u[2] * 1200)
    topic = "icu/" + "A" * (topic_len - 4)
    cid = "mqtt-" + format(int(u[3] * 2**63), "016x") * 2
    return dict(ip_src=episode_ip, ip_dst=BROKER_IP, tcp_srcport=sport, tcp_dstport=1883,
                tcp_flags_ack=1, tcp_flags_push=1,
                mqtt_msgtype=_RARE_MSGTYPES[int(u[5] * len(_RARE_MSGTYPES))], mqtt_qos=2,
                mqtt_retain=int(u[4] < 0.7), mqtt_topic=topic, mqtt_clientid=cid,
                frame_len=float(70 + topic_len + 100 + int(u[4] * 1900)),
                extra={**extra, "mqtt.dupflag": float(u[5] < 0.5)})


def generate_attack_data(cfg: GenConfig, return_kinds: bool = False):
    """Synthetic MQTT/TCP capture with exactly ``round(rate * n)`` attack packets.

    Benign traffic is periodic MQTT publishing from 12 bedside monitors to
    one broker, with acks, keep-alives and occasional connection setup and
    teardown.  Attacks arrive in episodes: SYN bursts from a spoofed
    address pool, RST storms, and malformed MQTT messages with rare message
    types and oversized topics.
    """
    rng = Rng(cfg.seed)
    n_attack = cfg.n_anomalies
    n_normal = cfg.n_records - n_attack
    weights = cfg.weights(ATTACK_KINDS)

    erng = rng.child(1)
    episodes = []
    total = 0
    while total < n_attack:
        kind = ATTACK_KINDS[int(erng.categorical(1, weights)[0])]
        lo, hi = _EPISODE_LEN[kind]
        length = min(lo + int(erng.integers(1, hi - lo + 1)[0]), n_attack - total)
        ep_u = erng.uniform(2)
        if kind == "mqtt_exploit" and ep_u[0] < 0.5:
            ip = DEVICE_IPS[int(ep_u[1] * N_DEVICES)]
        else:
            ip = ATTACKER_IPS[int(ep_u[1] * len(ATTACKER_IPS))]
        episodes.append((kind, length, ip))
        total += length
    gaps = erng.integers(len(episodes), n_normal + 1)
    order = np.argsort(gaps, kind="stable")

    normal_kinds = rng.child(2).categorical(n_normal, _NORMAL_WEIGHTS)
    normal_u = rng.child(3).uniform(6 * n_normal).reshape(n_normal, 6)
    normal_delta = 0.002 - 0.05 * np.log1p(-rng.child(4).uniform(n_normal))
    attack_u = rng.child(5).uniform(6 * n_attack).reshape(max(n_attack, 0), 6)

    fields_seq = []
    kinds_seq = []
    ni = 0
    ai = 0

    def push_normals(upto):
        nonlocal ni
        while ni < upto:
            f = _normal_packet(_NORMAL_KINDS[normal_kinds[ni]], normal_u[ni])
            f["frame_time_delta"] = float(normal_delta[ni])
            f["label"] = 0
            fields_seq.append(f)
            kinds_seq.append("normal")
            ni += 1

    for e in order:
        push_normals(int(gaps[e]))
        kind, length, ip = episodes[e]
        for _ in range(length):
            f = _attack_packet(kind, attack_u[ai], ip)
            if "frame_time_delta" not in f:
                f["frame_time_delta"] = float(0.002 - 0.05 * math.log1p(-attack_u[ai][0]))
            f["label"] = 1
            fields_seq.append(f)
            kinds_seq.append(kind)
            ai += 1
    push_normals(n_normal)

    records = []
    t = 0.0
    for f in fields_seq:
        f["frame_time_delta"] = round(float(f["frame_time_delta"]), 9)
        t = round(t + f["frame_time_delta"], 9)
        f["frame_time_relative"] = t
        records.append(_net(**f))
    if return_kinds:
        return records, kinds_seq
    return records
