"""Compare the compiled and pure-numpy kernel backends.

Runs the same workloads (bulk downward ray casts against a sphere, a full
support simulation, and the voxel oracle) in two subprocesses, one per
SUPPORTSIM_BACKEND value, and prints wall times plus the speedup.

Usage: python3 benchmarks/bench_backends.py [--rays N] [--resolution R]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
import supportsim as ss
from supportsim.shapes import icosphere, extrude_profile, tabletop_profile

n_rays = int(sys.argv[1])
resolution = int(sys.argv[2])

setup = ss.PrintSetup()
sphere = icosphere(24, radius=1.0, center=(0.0, 0.0, 1.5))
bvh = ss.build_bvh(sphere)
rng = np.random.default_rng(12345)
origins = np.column_stack([
    rng.uniform(-1.2, 1.2, n_rays),
    rng.uniform(-1.2, 1.2, n_rays),
    np.full(n_rays, 4.0),
])
directions = np.broadcast_to(np.array([0.0, 0.0, -1.0]), origins.shape).copy()

table = extrude_profile(tabletop_profile(1.0, 1.2, 2.5, 0.4), 0.9)

def timed(fn, repeats=3):
    best = float("inf")
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out

# warm up compilation outside the timed region
ss.cast_rays(sphere, bvh, origins[:16], directions[:16])
ss.voxel_support_oracle(table, setup, resolution=32)
ss.simulate(sphere, setup)

t_rays, (faces, ts) = timed(lambda: ss.cast_rays(sphere, bvh, origins, directions))
t_sim, report = timed(lambda: ss.simulate(sphere, setup))
t_vox, vox = timed(lambda: ss.voxel_support_oracle(table, setup, resolution=resolution))

print(json.dumps({
    "backend": ss.active_backend(),
    "ray_batch_s": t_rays,
    "simulate_s": t_sim,
    "voxel_s": t_vox,
    "hits": int((faces >= 0).sum()),
    "nsv": report.nsv,
    "voxel_volume": vox,
}))
"""


def run_backend(backend: str, n_rays: int, resolution: int) -> dict:
    env = dict(os.environ, SUPPORTSIM_BACKEND=backend)
    proc = subprocess.run(
        [sys.executable, "-c", WORKER, str(n_rays), str(resolution)],
        env=env,
        capture_output=True,
        text=True,
        check=True,
    )
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--rays", type=int, default=200_000)
    ap.add_argument("--resolution", type=int, default=384)
    args = ap.parse_args()

    results = {}
    for backend in ("numpy", "numba"):
        print(f"running {backend} backend ...", flush=True)
        results[backend] = run_backend(backend, args.rays, args.resolution)

    a, b = results["numpy"], results["numba"]
    for key in ("hits", "nsv", "voxel_volume"):
        if a[key] != b[key]:
            print(f"WARNING: backends disagree on {key}: {a[key]} vs {b[key]}")

    print()
    print(f"{'workload':<28}{'numpy':>12}{'numba':>12}{'speedup':>10}")
    rows = [
        (f"ray cast x{args.rays}", "ray_batch_s"),
        ("simulate (icosphere)", "simulate_s"),
        (f"voxel oracle @{args.resolution}", "voxel_s"),
    ]
    for label, key in rows:
        s = a[key] / b[key] if b[key] > 0 else float("inf")
        print(f"{label:<28}{a[key]:>11.4f}s{b[key]:>11.4f}s{s:>9.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
