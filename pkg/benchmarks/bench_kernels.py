"""Benchmark the compiled kernels against the pure-numpy fallback.

Usage: python benchmarks/bench_kernels.py [--extent 30] [--pulse-khz 5]

Builds one parametric forest, then times triangle voxelization and the
survey ray trace on both backends and verifies the outputs match bitwise.
"""

import argparse
import os
import sys
import time

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

import numpy as np

from sylva._kernels import HAVE_COMPILED, fallback
from sylva.geometry import Rect
from sylva.presets import default_generators, default_library
from sylva.procgen import generate_forest
from sylva.survey import ScannerConfig, iter_pulse_batches, plan_flight
from sylva.voxelgrid import transform_instance, voxelize_scene


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--extent", type=float, default=30.0, help="scene side length (m)")
    ap.add_argument("--pulse-khz", type=float, default=5.0, help="pulse frequency for the trace bench")
    ap.add_argument("--voxel", type=float, default=0.1)
    args = ap.parse_args()

    if not HAVE_COMPILED:
        print("compiled core not built; run `python setup.py build_ext --inplace` first")
        return 1
    from sylva._kernels import _core

    lib = default_library()
    scene = generate_forest(Rect(0, 0, args.extent, args.extent), default_generators(), lib, 7)
    grid = voxelize_scene(scene, lib, voxel_size=args.voxel)
    print(f"scene: {len(scene.instances)} trees; grid: {len(grid)} voxels, dims {tuple(grid.dims)}")

    # --- voxelization ---
    meshes = [transform_instance(lib.get(i.asset_id), i) for i in scene.instances]
    verts = [np.ascontiguousarray(m.vertices) for m in meshes]
    tris = [np.ascontiguousarray(m.triangles) for m in meshes]
    mats = [m.material for m in meshes]
    n_tris = sum(len(t) for t in tris)

    def bench_voxelize(impl):
        t0 = time.time()
        out = [
            impl.voxelize_triangles(v, t, m, grid.origin, grid.voxel_size, grid.dims)
            for v, t, m in zip(verts, tris, mats)
        ]
        return time.time() - t0, out

    t_fast, out_fast = bench_voxelize(_core)
    t_slow, out_slow = bench_voxelize(fallback)
    same = all(
        all(np.array_equal(a, b) for a, b in zip(fa, sl))
        for fa, sl in zip(out_fast, out_slow)
    )
    print(f"voxelize {n_tris} triangles:")
    print(f"  compiled  {t_fast:8.3f} s")
    print(f"  fallback  {t_slow:8.3f} s   ({t_slow / max(t_fast, 1e-9):6.1f}x slower)")
    print(f"  bitwise identical: {same}")

    # --- ray trace ---
    plan = plan_flight(scene.extent, spacing=20.0)
    sc = ScannerConfig(pulse_frequency=args.pulse_khz * 1000.0, scan_line_rate=50.0)
    batches = list(iter_pulse_batches(plan, sc))
    n_pulses = sum(len(b[1]) for b in batches)
    cell, opac, inst, sem = grid.dense_attr()

    def bench_trace(impl):
        t0 = time.time()
        outs = []
        for first, origins, dirs, times in batches:
            pidx = np.arange(first, first + len(origins), dtype=np.int64)
            outs.append(
                impl.trace_rays(
                    origins, dirs, pidx, times, grid.origin, grid.voxel_size, grid.dims,
                    cell, opac, inst, sem, 12345, sc.max_returns, sc.max_range,
                )
            )
        return time.time() - t0, outs

    t_fast, out_fast = bench_trace(_core)
    t_slow, out_slow = bench_trace(fallback)
    same = all(
        all(np.array_equal(np.asarray(a), np.asarray(b)) for a, b in zip(fa, sl))
        for fa, sl in zip(out_fast, out_slow)
    )
    n_pts = sum(len(o[0]) for o in out_fast)
    print(f"trace {n_pulses} pulses -> {n_pts} returns:")
    print(f"  compiled  {t_fast:8.3f} s   ({n_pulses / max(t_fast, 1e-9) / 1e6:5.2f} Mpulse/s)")
    print(f"  fallback  {t_slow:8.3f} s   ({t_slow / max(t_fast, 1e-9):6.1f}x slower)")
    print(f"  bitwise identical: {same}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
