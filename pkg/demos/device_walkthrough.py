"""Device faults, end to end.

Generates a ward of simulated bedside monitors, shows what each fault looks
like in the engineered features, then benchmarks every detector family on a
70/30 split.  Run with ``python demos/device_walkthrough.py``; it takes
around half a minute.
"""

import numpy as np

from medguard.datamodel import Family, device_preset, labels_of
from medguard.evalharness import run_benchmark, stratified_split
from medguard.featsel import select_features
from medguard.ingest import GenConfig, generate_device_data
from medguard.preprocess import FeaturePipeline

SEED = 0

cfg = GenConfig(n_records=20_000, anomaly_rate=0.2, seed=SEED)
records, kinds = generate_device_data(cfg, return_kinds=True)
kinds = np.array(kinds)
y = labels_of(records)
print(f"{len(records)} readings from {cfg.n_patients} patients, {y.sum()} faulty")

# Fit feature statistics on the training rows only, then look at the faults.
split = stratified_split(y, 0.7, SEED)
X = FeaturePipeline("device").fit_transform(records, split.train)
print("\nmedian feature value by fault kind:")
cols = ["Temperature", "Heart_Rate", "Device_Battery_Level", "Battery_Deviation", "Reading_Interval"]
print(f"{'':18}" + "".join(f"{c[:14]:>16}" for c in cols))
for kind in ["normal", "temperature_spike", "battery_collapse", "frozen_reading", "extreme_value"]:
    rows = kinds == kind
    print(f"{kind:18}" + "".join(f"{np.median(X.column(c)[rows]):16.2f}" for c in cols))

# Three scorers vote; the union of their top picks is what detectors see.
tables, selected = select_features(X.take(split.train), y[split.train], 3)
for t in tables:
    print(f"\n{t.method:12} top 3: {', '.join(t.top(3))}")
print(f"union: {', '.join(selected)}")

report = run_benchmark("device", records, [device_preset(f, seed=SEED) for f in Family], SEED)
print(f"\n{'model':18}{'accuracy':>9}{'recall':>9}{'f1':>9}{'seconds':>10}")
for r in report.rows:
    if r.status == "ok":
        print(f"{r.model:18}{r.accuracy:9.4f}{r.recall:9.4f}{r.f1:9.4f}{r.detect_seconds:10.4f}")
