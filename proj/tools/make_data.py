#!/usr/bin/env python3
"""Regenerates the synthetic models, device profiles and traces under data/.

The numbers are stand-ins shaped like common image classifiers: server latency
at a 30% share and batch 1 is pinned per model, on-device totals per device,
and intermediate payloads shrink with local bumps.
"""
import json
import math
import random
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent / "data"
INPUT_BYTES = 602112
KAPPA = 0.9

# id: (layers, server ms at share 30 / batch 1, nano total ms, tx2 total ms)
MODELS = {
    "inc": (17, 29.0, 165.0, 94.0),
    "res": (16, 30.0, 226.0, 114.0),
    "vgg": (6, 6.0, 147.0, 77.0),
    "mob": (18, 19.0, 84.0, 67.0),
    "vit": (15, 58.0, 816.0, 603.0),
}


def layer_shapes(name, n, rng):
    weights = [rng.uniform(0.5, 1.5) for _ in range(n)]
    sizes = []
    size = INPUT_BYTES * rng.uniform(1.2, 1.8)
    for i in range(n - 1):
        size *= rng.uniform(0.55, 0.95)
        bump = 1.6 if i % 4 == 2 else 1.0
        sizes.append(int(max(size * bump, 8192)))
    sizes.append(4000)
    return weights, sizes


def main():
    rng = random.Random(7)
    nano, tx2 = {}, {}
    for name, (n, server_ms, nano_ms, tx2_ms) in MODELS.items():
        weights, sizes = layer_shapes(name, n, rng)
        total = server_ms / (100.0 / 30.0) ** KAPPA
        scale = total / sum(weights)
        layers = [{"compute_weight": round(w * scale, 6), "output_bytes": s} for w, s in zip(weights, sizes)]
        (ROOT / "models" / f"{name}.json").write_text(
            json.dumps({"model_id": name, "input_bytes": INPUT_BYTES, "layers": layers}, indent=2) + "\n")
        jitter = [w * rng.uniform(0.8, 1.2) for w in weights]
        for table, device_total in ((nano, nano_ms), (tx2, tx2_ms)):
            s = sum(jitter)
            table[name] = {"layer_ms": [round(j / s * device_total, 4) for j in jitter]}
    for dev, table in (("nano", nano), ("tx2", tx2)):
        (ROOT / "devices" / f"{dev}.json").write_text(
            json.dumps({"device_id": dev, "models": table}, indent=2) + "\n")

    traces = ROOT / "traces"
    (traces / "constant_100.csv").write_text("time_s,mbps\n0,100\n")
    (traces / "constant_40.csv").write_text("time_s,mbps\n0,40\n")
    rows = ["time_s,mbps"] + [f"{60 * k},{100 if k % 2 == 0 else 40}" for k in range(10)]
    (traces / "two_level.csv").write_text("\n".join(rows) + "\n")
    walk = ["time_s,mbps"]
    bw = 80.0
    for k in range(20):
        walk.append(f"{30 * k},{bw:g}")
        bw = min(150.0, max(15.0, round(bw * rng.uniform(0.6, 1.5))))
    (traces / "walk.csv").write_text("\n".join(walk) + "\n")


if __name__ == "__main__":
    main()
