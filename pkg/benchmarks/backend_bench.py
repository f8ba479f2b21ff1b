"""Timing comparison of the numba and pure-numpy kernel backends.

Runs the same solver workload in two subprocesses, one with
``SCAMPI_DISABLE_NUMBA=1`` and one without (the backend is chosen at import
time, so it cannot be switched inside a single process), and prints a
side-by-side table. Usage:

    python3 benchmarks/backend_bench.py [--sizes 32,64] [--runs 5]
"""

import argparse
import json
import os
import subprocess
import sys

_CHILD = """
import json, os, time
import numpy as np
from scampi.backend import ACTIVE_BACKEND
from scampi.bench import build_instance, _scampi_options
from scampi.augment import augment
from scampi.core import run_scampi, run_em_scampi
from scampi import kernels

payload = json.loads(os.environ["BENCH_PAYLOAD"])
sizes, runs = payload["sizes"], payload["runs"]
out = {"backend": ACTIVE_BACKEND, "points": []}

# fwht microbench (the hot transform inside every operator application)
x = np.random.default_rng(0).standard_normal(1 << 14)
kernels.fwht_inplace(x.copy())  # warm any JIT
t0 = time.perf_counter()
for _ in range(200):
    kernels.fwht_inplace(x.copy())
out["fwht_ms"] = (time.perf_counter() - t0) / 200 * 1e3

for M in sizes:
    chan, net, meas, diff = build_instance(0, M, M, M * M // 2, 3, 12.0,
                                           12.0, 1.0, 30.0, 0.0, 0)
    sys_aug = augment(net, diff, meas)
    for name, runner in (("uniform_scampi", run_scampi),
                         ("em_scampi", run_em_scampi)):
        opts = _scampi_options(name, {"pooled_noise": True})
        runner(sys_aug, opts)  # warm
        t0 = time.perf_counter()
        for _ in range(runs):
            runner(sys_aug, opts)
        ms = (time.perf_counter() - t0) / runs * 1e3
        out["points"].append({"size": M, "algorithm": name, "ms": ms})
print(json.dumps(out))
"""


def run_child(disable_numba: bool, sizes, runs) -> dict:
    env = dict(os.environ)
    env["BENCH_PAYLOAD"] = json.dumps({"sizes": sizes, "runs": runs})
    if disable_numba:
        env["SCAMPI_DISABLE_NUMBA"] = "1"
    else:
        env.pop("SCAMPI_DISABLE_NUMBA", None)
    proc = subprocess.run([sys.executable, "-c", _CHILD], env=env,
                          capture_output=True, text=True, check=True)
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="32,64",
                    help="comma list of square grid sizes")
    ap.add_argument("--runs", type=int, default=5, help="timed runs per point")
    args = ap.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    numba = run_child(False, sizes, args.runs)
    numpy_ = run_child(True, sizes, args.runs)
    if numba["backend"] == numpy_["backend"]:
        print("warning: both children report the same backend "
              f"({numba['backend']}); is numba installed?")

    print(f"{'workload':28s} {'numpy (ms)':>12s} {'numba (ms)':>12s} {'speedup':>8s}")
    rows = [("fwht 16384 (single)", numpy_["fwht_ms"], numba["fwht_ms"])]
    for a, b in zip(numpy_["points"], numba["points"]):
        assert (a["size"], a["algorithm"]) == (b["size"], b["algorithm"])
        rows.append((f"{a['algorithm']} {a['size']}x{a['size']} (300 it)",
                     a["ms"], b["ms"]))
    for label, np_ms, nb_ms in rows:
        print(f"{label:28s} {np_ms:12.2f} {nb_ms:12.2f} {np_ms / nb_ms:7.2f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
