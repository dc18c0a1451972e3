"""Compare the compiled kernels against the interpreted fallback.

Each backend runs in its own subprocess because ``CRANESAFE_USE_NUMBA`` is
read once at import time.  The first call (compilation, or loading the
on-disk cache) is reported separately from the steady-state timings.

    python3 benchmarks/bench_kernels.py            # both backends
    python3 benchmarks/bench_kernels.py --repeat 5
"""

import argparse
import json
import os
import subprocess
import sys
import time

WORKER = r"""
import json, sys, time
import numpy as np
from cranesafe import USE_NUMBA, kernels
from cranesafe.barrier import BarrierConfig, adapt_delta
from cranesafe.integrator import CraneModel, FlowConfig
from cranesafe.safety import TargetSafetyParams

repeat = int(sys.argv[1])
model = CraneModel()
prof, prm = model.prof, model.prm
x = np.zeros(14)
x[:7] = [0.3, 0.5, 1.1, 0.3, -0.2, 0.25, 0.15]
x[7:] = [0.1, -0.05, 0.02, 0.2, 0.1, -0.1, 0.05]
u = np.array([0.1, -0.05, 0.02])
nodist = np.zeros((14, 0, 3))
xs = np.tile(x, (11, 1))
us = np.tile(u, (10, 1))

cases = {
    "vector_field": lambda: kernels.vector_field(0.1, x, u, prof, prm, nodist),
    "rk4_traj (T=0.1, 4 substeps)": lambda: kernels.rk4_traj(0.1, x, u, 0.1, 4, prof, prm, nodist),
    "shooting_sensitivities (10 nodes)": lambda: kernels.shooting_sensitivities(
        0.0, 0.1, xs, us, 4, prof, prm, 1e-20),
    "adapt_delta (default sampling)": lambda: adapt_delta(
        0.0, x, u, BarrierConfig(), FlowConfig(0.1, 4), model, TargetSafetyParams()),
}
out = {"numba": USE_NUMBA, "cases": {}}
for name, fn in cases.items():
    t0 = time.perf_counter()
    fn()
    first = time.perf_counter() - t0
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    out["cases"][name] = {"first": first, "best": best}
print(json.dumps(out))
"""


def run_backend(use_numba: bool, repeat: int) -> dict:
    env = dict(os.environ, CRANESAFE_USE_NUMBA="1" if use_numba else "0")
    proc = subprocess.run([sys.executable, "-c", WORKER, str(repeat)], env=env,
                          capture_output=True, text=True, check=True)
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3, help="timed calls per case (best is kept)")
    args = ap.parse_args(argv)
    t0 = time.perf_counter()
    fast = run_backend(True, args.repeat)
    slow = run_backend(False, args.repeat)
    if not fast["numba"]:
        print("numba is not importable; both columns use the fallback")
    print(f"{'kernel':38s} {'numba':>11s} {'fallback':>11s} {'speedup':>9s} {'1st call':>9s}")
    for name, f in fast["cases"].items():
        s = slow["cases"][name]
        print(f"{name:38s} {f['best'] * 1e3:9.3f}ms {s['best'] * 1e3:9.3f}ms "
              f"{s['best'] / f['best']:8.1f}x {f['first']:8.2f}s")
    print(f"total wall time {time.perf_counter() - t0:.1f}s")
    return 0


if __name__ == "__main__":
    sys.exit(main())
