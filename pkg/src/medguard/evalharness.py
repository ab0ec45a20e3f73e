"""Splits, metrics, timed benchmarking and report files."""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.stats import rankdata

from . import detectors as det
from .datamodel import RESERVED_MODELS, DetectorSpec, EvalReport, Family, ModelResult, labels_of
from .featsel import DEFAULT_TOP_K, select_features
from .preprocess import FeaturePipeline
from .rng import Rng

CSV_COLUMNS = ("model", "protocol", "accuracy", "precision", "recall", "f1", "roc_auc",
               "detect_seconds", "status")
METRICS = ("accuracy", "precision", "recall", "f1", "roc_auc")
SPLIT_PROTOCOL = "split-70/30"
FULL_PROTOCOL = "full-train"
NOT_IMPLEMENTED = "not implemented"


class EvalError(ValueError):
    pass


@dataclass(frozen=True)
class SplitIndices:
    train: np.ndarray
    test: np.ndarray
    seed: int


def stratified_split(y, train_frac: float = 0.7, seed: int = 0) -> SplitIndices:
    """Per class, shuffle with a seeded stream and send ``round(train_frac * n_c)`` rows to train.

    Rounding is half-up.  Both index arrays come back sorted.
    """
    y = np.asarray(y)
    if not 0.0 < train_frac < 1.0:
        raise EvalError("train_frac must lie in (0, 1)")
    root = Rng(seed).child(0x5971)
    train, test = [], []
    for c in np.unique(y):
        rows = np.flatnonzero(y == c)
        if rows.size < 2:
            raise EvalError(f"class {c!r} has fewer than 2 rows")
        perm = rows[root.child(int(c)).permutation(rows.size)]
        k = math.floor(train_frac * rows.size + 0.5)
        train.append(perm[:k])
        test.append(perm[k:])
    return SplitIndices(np.sort(np.concatenate(train)), np.sort(np.concatenate(test)), seed)


def confusion_counts(y_true, y_flag) -> dict:
    t = np.asarray(y_true).astype(bool)
    f = np.asarray(y_flag).astype(bool)
    if t.shape != f.shape:
        raise EvalError("labels and flags differ in length")
    return {"tp": int(np.sum(t & f)), "fp": int(np.sum(~t & f)),
            "fn": int(np.sum(t & ~f)), "tn": int(np.sum(~t & ~f))}


def confusion_metrics(y_true, y_flag) -> dict:
    """Accuracy, precision, recall and F1; a zero denominator gives ``None``."""
    c = confusion_counts(y_true, y_flag)
    tp, fp, fn, tn = c["tp"], c["fp"], c["fn"], c["tn"]
    n = tp + fp + fn + tn
    acc = (tp + tn) / n if n else None
    prec = tp / (tp + fp) if tp + fp else None
    rec = tp / (tp + fn) if tp + fn else None
    if prec is None or rec is None:
        f1 = None
    else:
        f1 = 0.0 if prec + rec == 0 else 2 * prec * rec / (prec + rec)
    return {"accuracy": acc, "precision": prec, "recall": rec, "f1": f1, **c}


def roc_auc(y_true, scores) -> float:
    """Mann-Whitney AUC with half credit for ties, via midranks."""
    y = np.asarray(y_true).astype(bool)
    s = np.asarray(scores, dtype=np.float64)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise EvalError("roc_auc needs both classes")
    ranks = rankdata(s)
    u = ranks[y].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


# -- benchmark -----------------------------------------------------------------

Hook = Callable[[str, str], None]


def _noop(event: str, name: str) -> None:
    pass


def _protocol(task: str) -> str:
    return SPLIT_PROTOCOL if task == "device" else FULL_PROTOCOL


def _train_rows(family: Family, task: str, y: np.ndarray, split: Optional[SplitIndices]) -> np.ndarray:
    pool = split.train if task == "device" else np.arange(y.size)
    if family in (Family.GBDT, Family.KNN, Family.ISOFOREST):
        return pool
    if family is Family.OCSVM and task == "device":
        return pool
    return pool[y[pool] == 0]


def time_scoring(model, X, repeats: int = 5, clock=time.perf_counter):
    """Score ``repeats`` times; return ``(scores, median seconds)``."""
    times, scores = [], None
    for _ in range(repeats):
        t0 = clock()
        scores = det.score(model, X)
        times.append(clock() - t0)
    return scores, float(np.median(times))


def evaluate_model(spec: DetectorSpec, task: str, X, y, split, repeats: int = 5,
                   hook: Hook = _noop) -> ModelResult:
    name = Family(spec.family).value
    protocol = _protocol(task)
    try:
        rows = _train_rows(spec.family, task, y, split)
        hook("fit_start", name)
        model = det.fit_detector(spec, X.take(rows), y[rows])
        hook("fit_end", name)
        eval_rows = split.test if task == "device" else np.arange(y.size)
        Xe = X.take(eval_rows)
        ye = y[eval_rows]
        hook("score_start", name)
        scores, seconds = time_scoring(model, Xe, repeats)
        hook("score_end", name)
        flags = det.flag(model, scores)
    except (det.DetectorError, ValueError, FloatingPointError) as exc:
        return ModelResult(name, protocol, status="error", error=f"{type(exc).__name__}: {exc}")
    m = confusion_metrics(ye, flags)
    auc = roc_auc(ye, scores) if 0 < ye.sum() < ye.size else None
    return ModelResult(name, protocol, m["accuracy"], m["precision"], m["recall"], m["f1"], auc, seconds)


def run_benchmark(task: str, records: Sequence, specs: Sequence[DetectorSpec], seed: int = 0, *,
                  top_k=None, select: bool = True, train_frac: float = 0.7, bins: int = 10,
                  repeats: int = 5, dataset: Optional[dict] = None, hook: Hook = _noop) -> EvalReport:
    """Full task protocol: features, selection, fitting, timed scoring, metrics.

    DEVICE: stratified split; features, selection and detectors use training
    rows only and metrics come from the test rows.  CYBER: everything is fitted
    on the whole set and metrics are computed on it.  Rows for the reserved,
    unimplemented models are appended with status ``"not implemented"``.
    """
    if task not in ("device", "cyber"):
        raise EvalError(f"unknown task {task!r}")
    y = labels_of(records)
    split = stratified_split(y, train_frac, seed) if task == "device" else None
    fit_rows = split.train if split is not None else np.arange(y.size)

    hook("preprocess_start", task)
    X = FeaturePipeline(task).fit_transform(records, fit_rows)
    hook("preprocess_end", task)
    k = DEFAULT_TOP_K[task] if top_k is None else top_k
    selected = list(X.column_names)
    if select:
        hook("select_start", task)
        _, selected = select_features(X.take(fit_rows), y[fit_rows], k, bins)
        hook("select_end", task)
        X = X.select(selected)

    rows = [evaluate_model(s, task, X, y, split, repeats, hook) for s in specs]
    rows += [ModelResult(m, _protocol(task), status=NOT_IMPLEMENTED) for m in RESERVED_MODELS]
    info = {"n_rows": int(y.size), "n_anomalies": int(y.sum()), "selected_features": selected}
    if split is not None:
        info["n_train"], info["n_test"] = int(split.train.size), int(split.test.size)
    info.update(dataset or {})
    config = {"specs": [s.to_dict() for s in specs], "top_k": k, "select": select,
              "train_frac": train_frac, "bins": bins, "repeats": repeats, "protocol": _protocol(task)}
    return EvalReport(task, int(seed), info, config, rows)


# -- report files --------------------------------------------------------------

def report_json(report: EvalReport) -> str:
    return json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n"


def load_report(path) -> EvalReport:
    return EvalReport.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _cell(v):
    if v is None:
        return ""
    return repr(float(v)) if isinstance(v, float) else str(v)


def write_csv(report: EvalReport, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in report.rows:
            w.writerow([_cell(getattr(r, c)) for c in CSV_COLUMNS])


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "medguard"
    plt.rcParams["svg.fonttype"] = "none"
    return plt


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})


def _timed_rows(report):
    return [r for r in report.rows if r.status == "ok" and r.detect_seconds is not None]


def log_limits(values) -> tuple:
    """Log-axis limits with at least a decade of span around positive ``values``."""
    v = np.asarray([x for x in values if x is not None and x > 0], dtype=np.float64)
    if v.size == 0:
        return 1e-3, 1.0
    lo = 10 ** math.floor(math.log10(v.min()) - 0.25)
    hi = 10 ** math.ceil(math.log10(v.max()) + 0.25)
    if hi / lo < 10:
        hi = lo * 10
    return lo, hi


def metric_chart(report: EvalReport, metric: str, path) -> None:
    plt = _pyplot()
    rows = [r for r in report.rows if r.status == "ok"]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    vals = [getattr(r, metric) for r in rows]
    ax.bar([r.model for r in rows], [0.0 if v is None else v for v in vals], color="#4c72b0")
    ax.set_ylim(0, 1.05)
    ax.set_ylabel(metric)
    ax.set_title(f"{report.task}: {metric}")
    ax.tick_params(axis="x", labelrotation=30)
    fig.tight_layout()
    _save(fig, path)
    plt.close(fig)


def cost_chart(report: EvalReport, path) -> tuple:
    """Scoring time per model on a log axis.  Returns the axis limits used."""
    plt = _pyplot()
    rows = _timed_rows(report)
    lo, hi = log_limits([r.detect_seconds for r in rows])
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.bar([r.model for r in rows], [r.detect_seconds for r in rows], color="#dd8452")
    ax.set_yscale("log")
    ax.set_ylim(lo, hi)
    ax.set_ylabel("scoring time (s, log scale)")
    ax.set_title(f"{report.task}: computational cost")
    ax.tick_params(axis="x", labelrotation=30)
    fig.tight_layout()
    _save(fig, path)
    plt.close(fig)
    return lo, hi


def f1_cost_chart(report: EvalReport, path) -> None:
    plt = _pyplot()
    rows = [r for r in _timed_rows(report) if r.f1 is not None]
    lo, hi = log_limits([r.detect_seconds for r in rows])
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.scatter([r.detect_seconds for r in rows], [r.f1 for r in rows], color="#55a868")
    for r in rows:
        ax.annotate(r.model, (r.detect_seconds, r.f1), textcoords="offset points", xytext=(4, 4), fontsize=8)
    ax.set_xscale("log")
    ax.set_xlim(lo, hi)
    ax.set_ylim(0, 1.05)
    ax.set_xlabel("scoring time (s, log scale)")
    ax.set_ylabel("F1")
    ax.set_title(f"{report.task}: F1 vs cost")
    fig.tight_layout()
    _save(fig, path)
    plt.close(fig)


def emit_report(report: EvalReport, out_dir, formats=("json", "csv", "svg"), stem: str = "report") -> list:
    """Write the requested formats under ``out_dir``; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if "json" in formats:
        p = out / f"{stem}.json"
        p.write_text(report_json(report), encoding="utf-8")
        written.append(p)
    if "csv" in formats:
        p = out / f"{stem}.csv"
        write_csv(report, p)
        written.append(p)
    if "svg" in formats:
        for metric in METRICS:
            p = out / f"{stem}_{metric}.svg"
            metric_chart(report, metric, p)
            written.append(p)
        p = out / f"{stem}_cost_log.svg"
        cost_chart(report, p)
        written.append(p)
        p = out / f"{stem}_f1_vs_cost.svg"
        f1_cost_chart(report, p)
        written.append(p)
    return written
