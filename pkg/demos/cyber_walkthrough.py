"""Network attacks against an MQTT broker.

Builds a capture with SYN bursts, reset storms and malformed MQTT
publishes, then compares the supervised detectors with the ones that only
ever see normal traffic.  The full-train protocol scores the same rows it
trained on, so supervised numbers here are an upper bound.
"""

import numpy as np

from medguard.datamodel import Family, cyber_preset
from medguard.evalharness import emit_report, run_benchmark
from medguard.ingest import GenConfig, generate_attack_data

SEED = 0
records, kinds = generate_attack_data(GenConfig(n_records=20_000, anomaly_rate=0.1, seed=SEED),
                                      return_kinds=True)
kinds = np.array(kinds)
for kind in ("normal", "syn_burst", "reset_storm", "mqtt_exploit"):
    rows = [records[i] for i in np.flatnonzero(kinds == kind)]
    gap = np.mean([r.frame_time_delta for r in rows])
    topic = np.mean([r.mqtt_topic_len for r in rows])
    print(f"{kind:13} {len(rows):6d} packets, mean gap {gap:.4f}s, mean topic length {topic:.0f}")

# The autoencoders train for a few minutes at full size; trim their epochs
# to keep the demo quick (the acceptance suite runs the real preset).
specs = [cyber_preset(f, seed=SEED) for f in (Family.GBDT, Family.KNN, Family.ISOFOREST, Family.OCSVM)]
specs.append(cyber_preset(Family.AUTOENCODER, seed=SEED, epochs=40))

report = run_benchmark("cyber", records, specs, SEED)
print(f"\n{len(report.dataset['selected_features'])} features kept after selection")
for r in report.rows:
    if r.status == "ok":
        print(f"{r.model:18} precision {r.precision:.3f} recall {r.recall:.3f} "
              f"auc {r.roc_auc:.3f} in {r.detect_seconds * 1000:.0f} ms")
    else:
        print(f"{r.model:18} {r.status}")

paths = emit_report(report, "demo_out/cyber")
print(f"\nwrote {len(paths)} files under demo_out/cyber")
