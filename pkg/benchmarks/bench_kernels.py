"""Benchmark the numba-compiled hot kernels against the pure-numpy fallback.

The backend is chosen at import time via the MOSCL_DISABLE_NUMBA environment
variable, so each path runs in its own subprocess.  The parent process
compares timings and checks that both backends produce identical results.

Run:  python3 benchmarks/bench_kernels.py
"""

import json
import os
import subprocess
import sys

WORKER = """
import json, os, sys, time
import numpy as np
from moscl import kernels
from moscl.model import MlpModel

N, DIM, HIDDEN, G, EPOCHS = 2000, 2, 16, 8, 30

rng = np.random.default_rng(0)
X = rng.normal(size=(N, DIM))
labels = rng.integers(0, 2, size=N).astype(np.int64)
m = MlpModel(DIM, HIDDEN, seed=0)
weights = np.ones(N)
order = np.arange(N, dtype=np.int64)
T = rng.uniform(-0.3, 0.3, (N, G, HIDDEN))

# warm up (trigger jit compilation outside the timed region)
kernels.sgd_epoch(m.W1.copy(), m.b1.copy(), m.W2.copy(), m.b2.copy(),
                  X, labels, order, 2, weights, 0.1, m._act, m._head, 0)
kernels.mean_perturbed_predictions(m.W1, m.b1, m.W2, m.b2, X, T, m._act, m._head)

w = MlpModel(DIM, HIDDEN, seed=0)
t0 = time.perf_counter()
for _ in range(EPOCHS):
    losses = kernels.sgd_epoch(w.W1, w.b1, w.W2, w.b2, X, labels, order, 2,
                               weights, 0.1, w._act, w._head, 0)
sgd_s = time.perf_counter() - t0

t0 = time.perf_counter()
p_bar = kernels.mean_perturbed_predictions(w.W1, w.b1, w.W2, w.b2, X, T,
                                           w._act, w._head)
score_s = time.perf_counter() - t0

json.dump({
    "backend": kernels.backend_name(),
    "sgd_epochs_s": sgd_s,
    "uncertainty_scoring_s": score_s,
    "final_mean_loss": float(np.mean(losses)),
    "p_bar_checksum": float(np.sum(p_bar)),
    "W1_checksum": float(np.sum(w.W1)),
}, sys.stdout)
"""


def run_backend(disable_numba: bool) -> dict:
    env = dict(os.environ, MOSCL_DISABLE_NUMBA="1" if disable_numba else "0")
    out = subprocess.run(
        [sys.executable, "-c", WORKER], env=env, capture_output=True, text=True,
        check=True,
    )
    return json.loads(out.stdout)


def main() -> int:
    numba = run_backend(disable_numba=False)
    numpy = run_backend(disable_numba=True)
    print(f"{'':24s}{numba['backend']:>12s}{numpy['backend']:>12s}{'speedup':>10s}")
    for key, label in (
        ("sgd_epochs_s", "sgd epochs (30x N=2000)"),
        ("uncertainty_scoring_s", "uncertainty scoring"),
    ):
        ratio = numpy[key] / numba[key]
        print(f"{label:24s}{numba[key]:12.4f}{numpy[key]:12.4f}{ratio:9.1f}x")
    agree = all(
        abs(numba[k] - numpy[k]) < 1e-9
        for k in ("final_mean_loss", "p_bar_checksum", "W1_checksum")
    )
    print(f"backends agree: {agree}")
    return 0 if agree else 1


if __name__ == "__main__":
    sys.exit(main())
