"""Command-line entry point: ``medguard {generate,select,bench,report}``.

A run is described by a JSON config (see :class:`RunConfig`); command-line
flags override individual fields.  Exit codes: 0 success, 1 usage error,
2 data error, 3 detector failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DETECTOR = 0, 1, 2, 3
TASKS = ("device", "cyber")

log = logging.getLogger("medguard")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


@dataclass
class RunConfig:
    """One reproducible run.

    Exactly one of ``input`` (a CSV path) and ``generator`` (keyword arguments
    for :class:`~medguard.ingest.GenConfig`) must be set.  ``overrides`` maps a
    family name, or ``"*"`` for all families, to DetectorSpec field values.
    """

    task: str
    seed: int
    input: Optional[str] = None
    generator: Optional[dict] = None
    label_column: Optional[str] = None
    select: bool = True
    top_k: object = None
    bins: int = 10
    preset: Optional[str] = None
    overrides: dict = field(default_factory=dict)
    models: Optional[list] = None
    output_dir: str = "out"
    repeats: int = 5

    def __post_init__(self):
        if self.task not in TASKS:
            raise UsageError(f"task must be one of {TASKS}, got {self.task!r}")
        if self.seed is None:
            raise UsageError("seed is mandatory")
        if (self.input is None) == (self.generator is None):
            raise UsageError("set exactly one of 'input' and 'generator'")

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise UsageError(f"unknown config fields: {sorted(unknown)}")
        missing = {"task", "seed"} - set(d)
        if missing:
            raise UsageError(f"config lacks required fields: {sorted(missing)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


# -- parsing -------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _common(p: argparse.ArgumentParser, with_data: bool = True):
    p.add_argument("--config", help="JSON run config; flags below override its fields")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", dest="output_dir", help="output directory")
    if with_data:
        p.add_argument("--task", choices=TASKS)
        p.add_argument("--input", help="CSV file to read instead of generating data")
        p.add_argument("--n-records", type=int, help="generator: number of rows")
        p.add_argument("--anomaly-rate", type=float, help="generator: fraction of anomalous rows")
        p.add_argument("--label-column")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="medguard", description="Healthcare IoT anomaly-detection benchmark")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write synthetic device and/or attack CSVs")
    _common(g)
    g.add_argument("--both", action="store_true", help="write both tasks' data")

    s = sub.add_parser("select", help="score features and write the union")
    _common(s)
    s.add_argument("--top-k", type=int)

    b = sub.add_parser("bench", help="run the full pipeline and write report files")
    _common(b)
    b.add_argument("--top-k", type=int)
    b.add_argument("--models", help="comma-separated families, e.g. gbdt,knn")
    b.add_argument("--preset", choices=("table3", "table4"))
    b.add_argument("--no-select", action="store_true", help="skip feature selection")
    b.add_argument("--repeats", type=int, help="timing repeats (median is reported)")
    b.add_argument("--save-models", action="store_true", help="also write fitted models as JSON")

    r = sub.add_parser("report", help="re-render CSV/SVG from a saved JSON report")
    r.add_argument("report", help="report.json written by 'bench'")
    r.add_argument("--out", dest="output_dir")
    return p


def resolve_config(args) -> RunConfig:
    """Merge the config file (if any) with command-line flags."""
    d: dict = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.is_file():
            raise DataError(f"config file not found: {path}")
        try:
            d = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise UsageError(f"{path}: invalid JSON ({exc})") from None
    for name in ("task", "seed", "output_dir", "label_column", "top_k", "preset", "repeats"):
        v = getattr(args, name, None)
        if v is not None:
            d[name] = v
    if getattr(args, "input", None):
        d["input"] = args.input
        d.pop("generator", None)
    gen_flags = {k: getattr(args, k, None) for k in ("n_records", "anomaly_rate")}
    if any(v is not None for v in gen_flags.values()):
        d.pop("input", None)
        d["generator"] = {**(d.get("generator") or {}), **{k: v for k, v in gen_flags.items() if v is not None}}
    if getattr(args, "models", None):
        d["models"] = [m.strip() for m in args.models.split(",") if m.strip()]
    if getattr(args, "no_select", False):
        d["select"] = False
    if "input" not in d and "generator" not in d:
        d["generator"] = {}
    return RunConfig.from_dict(d)


# -- data ----------------------------------------------------------------------

def _gen_config(cfg: RunConfig, task: str):
    from .ingest import GenConfig

    kw = dict(cfg.generator or {})
    kw.setdefault("seed", cfg.seed)
    if "anomaly_rate" not in kw and task == "cyber":
        kw["anomaly_rate"] = 0.1
    try:
        return GenConfig(**kw)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad generator config: {exc}") from None


def load_records(cfg: RunConfig):
    """Records for ``cfg.task`` plus a short dataset descriptor."""
    from .datamodel import SchemaError
    from .ingest import (generate_attack_data, generate_device_data, read_attack_csv,
                         read_device_csv)

    if cfg.input is not None:
        path = Path(cfg.input)
        if not path.is_file():
            raise DataError(f"input file not found: {path}")
        reader = read_device_csv if cfg.task == "device" else read_attack_csv
        kw = {"label_column": cfg.label_column} if cfg.label_column else {}
        try:
            records, report = reader(path, **kw)
        except (SchemaError, ValueError, OSError) as exc:
            raise DataError(f"{path}: {exc}") from None
        return records, {"source": str(path), "missing_cells": report.total_missing}
    gc = _gen_config(cfg, cfg.task)
    gen = generate_device_data if cfg.task == "device" else generate_attack_data
    return gen(gc), {"source": "generator", "generator": {"n_records": gc.n_records,
                                                         "anomaly_rate": gc.anomaly_rate,
                                                         "seed": gc.seed}}


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- commands ------------------------------------------------------------------

def cmd_generate(cfg: RunConfig, both: bool = False) -> int:
    from .ingest import (generate_attack_data, generate_device_data, write_attack_csv,
                         write_device_csv)

    out = _out_dir(cfg)
    for task in (TASKS if both else (cfg.task,)):
        gc = _gen_config(cfg, task)
        if task == "device":
            records = generate_device_data(gc)
            path = out / "device.csv"
            write_device_csv(records, path, cfg.label_column or "Label")
        else:
            records = generate_attack_data(gc)
            path = out / "attack.csv"
            write_attack_csv(records, path, cfg.label_column or "label")
        n_anom = sum(r.label for r in records)
        print(f"{path}: {len(records)} rows, {n_anom} labeled 1, {len(records) - n_anom} labeled 0")
    return EXIT_OK


def _selection_rows(task, y, seed):
    import numpy as np

    from .evalharness import stratified_split

    return stratified_split(y, 0.7, seed).train if task == "device" else np.arange(y.size)


def cmd_select(cfg: RunConfig) -> int:
    from .datamodel import labels_of
    from .featsel import DEFAULT_TOP_K, select_features, write_score_csv
    from .preprocess import FeaturePipeline

    records, _ = load_records(cfg)
    y = labels_of(records)
    rows = _selection_rows(cfg.task, y, cfg.seed)
    X = FeaturePipeline(cfg.task).fit_transform(records, rows)
    k = DEFAULT_TOP_K[cfg.task] if cfg.top_k is None else cfg.top_k
    tables, selected = select_features(X.take(rows), y[rows], k, cfg.bins)
    out = _out_dir(cfg)
    write_score_csv(tables, out / "feature_scores.csv")
    (out / "selected_features.txt").write_text("".join(f"{c}\n" for c in selected), encoding="utf-8")
    print(f"{len(selected)} of {X.n_cols} features selected: {', '.join(selected)}")
    return EXIT_OK


def build_specs(cfg: RunConfig) -> list:
    from .datamodel import Family, TASK_PRESET, preset_spec

    preset = cfg.preset or TASK_PRESET[cfg.task]
    names = cfg.models or [f.value for f in Family]
    specs = []
    for name in names:
        try:
            family = Family(name.upper())
        except ValueError:
            raise UsageError(f"unknown model {name!r}; choose from "
                             f"{', '.join(f.value.lower() for f in Family)}") from None
        over = {**cfg.overrides.get("*", {}), **cfg.overrides.get(family.value, {})}
        try:
            specs.append(preset_spec(preset, family, cfg.seed, **over))
        except (TypeError, ValueError) as exc:
            raise UsageError(f"bad overrides for {family.value}: {exc}") from None
    return specs


def cmd_bench(cfg: RunConfig, save_models: bool = False) -> int:
    from .evalharness import emit_report, run_benchmark

    specs = build_specs(cfg)
    records, info = load_records(cfg)
    report = run_benchmark(cfg.task, records, specs, cfg.seed, top_k=cfg.top_k, select=cfg.select,
                           bins=cfg.bins, repeats=cfg.repeats, dataset=info)
    # the output location is not part of the experiment, so it stays out of the report
    report.config["run"] = {k: v for k, v in cfg.to_dict().items() if k != "output_dir"}
    out = _out_dir(cfg)
    for p in emit_report(report, out):
        log.info("wrote %s", p)
    if save_models:
        _save_models(cfg, records, report, out)
    for r in report.rows:
        if r.status == "ok":
            print(f"{r.model:<17} acc={r.accuracy:.4f} f1={_fmt(r.f1)} auc={_fmt(r.roc_auc)} "
                  f"t={r.detect_seconds:.4g}s")
        else:
            print(f"{r.model:<17} {r.status}" + (f": {r.error}" if r.error else ""))
    failed = [r.model for r in report.rows if r.status == "error"]
    if failed:
        print(f"detector failure: {', '.join(failed)}", file=sys.stderr)
        return EXIT_DETECTOR
    return EXIT_OK


def _save_models(cfg, records, report, out: Path):
    """Refit each detector on its protocol's training rows and save it next to the report."""
    import numpy as np

    from . import detectors as det
    from .datamodel import labels_of
    from .evalharness import _train_rows, stratified_split
    from .preprocess import FeaturePipeline

    y = labels_of(records)
    split = stratified_split(y, 0.7, cfg.seed) if cfg.task == "device" else None
    fit_rows = split.train if split is not None else np.arange(y.size)
    X = FeaturePipeline(cfg.task).fit_transform(records, fit_rows).select(report.dataset["selected_features"])
    for spec in build_specs(cfg):
        rows = _train_rows(spec.family, cfg.task, y, split)
        try:
            model = det.fit_detector(spec, X.take(rows), y[rows])
        except det.DetectorError:
            continue
        det.save_model(model, out / f"model_{spec.family.value.lower()}.json")


def _fmt(v):
    return "n/a" if v is None else f"{v:.4f}"


def cmd_report(path: str, output_dir: Optional[str]) -> int:
    from .datamodel import SchemaError
    from .evalharness import emit_report, load_report

    p = Path(path)
    if not p.is_file():
        raise DataError(f"report not found: {p}")
    try:
        report = load_report(p)
    except (SchemaError, ValueError, KeyError, TypeError) as exc:
        raise DataError(f"{p}: not a valid report ({exc})") from None
    out = Path(output_dir) if output_dir else p.parent
    stem = p.stem
    for f in emit_report(report, out, formats=("csv", "svg"), stem=stem):
        print(f)
    return EXIT_OK


def _dispatch(args) -> int:
    if args.command == "report":
        return cmd_report(args.report, args.output_dir)
    if args.command == "generate" and args.both and args.task is None:
        args.task = "device"          # --both covers every task; the field just has to be valid
    cfg = resolve_config(args)
    if args.command == "generate":
        return cmd_generate(cfg, args.both)
    if args.command == "select":
        return cmd_select(cfg)
    return cmd_bench(cfg, args.save_models)


def main(argv=None) -> int:
    from .parallel import worker_count

    try:
        args = build_parser().parse_args(argv)
        threads = worker_count()
    except UsageError as exc:
        print(f"medguard: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"medguard: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    from threadpoolctl import threadpool_limits

    try:
        with threadpool_limits(limits=threads):
            return _dispatch(args)
    except UsageError as exc:
        print(f"medguard: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"medguard: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
