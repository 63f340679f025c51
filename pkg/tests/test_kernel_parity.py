"""Compiled core vs pure-numpy fallback: outputs must agree bit for bit."""

import numpy as np
import pytest

from sylva._kernels import HAVE_COMPILED, fallback

if HAVE_COMPILED:
    from sylva._kernels import _core
else:  # pragma: no cover - exercised only in fallback-only environments
    _core = None

pytestmark = pytest.mark.skipif(
    not HAVE_COMPILED, reason="compiled core not built; nothing to compare"
)


def _assert_same(a, b):
    for x, y in zip(a, b):
        x = np.asarray(x)
        y = np.asarray(y)
        assert x.dtype == y.dtype
        if x.dtype.kind == "f":
            assert np.array_equal(x.view(np.uint64), y.view(np.uint64))
        else:
            assert np.array_equal(x, y)


def _random_triangles(seed, n_tris=80, span=6.0):
    rng = np.random.default_rng(seed)
    verts = rng.uniform(0, span, size=(n_tris * 2, 3))
    tris = rng.integers(0, len(verts), size=(n_tris, 3)).astype(np.int32)
    mats = rng.integers(1, 3, size=n_tris).astype(np.uint8)
    return verts, tris, mats


def test_voxelize_parity_random_triangles():
    for seed in range(5):
        verts, tris, mats = _random_triangles(seed)
        origin = np.array([0.0, 0.0, -0.05])
        dims = np.array([64, 64, 64], dtype=np.int64)
        fast = _core.voxelize_triangles(
            np.ascontiguousarray(verts), np.ascontiguousarray(tris), mats, origin, 0.1, dims
        )
        slow = fallback.voxelize_triangles(verts, tris, mats, origin, 0.1, dims)
        _assert_same(fast, slow)


def test_voxelize_parity_on_parametric_tree(library):
    from sylva.procgen import TreeInstance
    from sylva.voxelgrid import transform_instance

    asset = next(iter(library))
    inst = TreeInstance(3, asset.asset_id, 10.0, 10.0, 0.0, 1.1, 0.7, 1, "g")
    mesh = transform_instance(asset, inst)
    origin = np.array([0.0, 0.0, -0.05])
    dims = np.array([220, 220, 260], dtype=np.int64)
    fast = _core.voxelize_triangles(
        np.ascontiguousarray(mesh.vertices),
        np.ascontiguousarray(mesh.triangles),
        mesh.material,
        origin,
        0.1,
        dims,
    )
    slow = fallback.voxelize_triangles(
        mesh.vertices, mesh.triangles, mesh.material, origin, 0.1, dims
    )
    assert len(fast[0]) > 100
    _assert_same(fast, slow)


def _trace_args(seed, grid):
    rng = np.random.default_rng(seed)
    n = 4000
    span = grid.dims * grid.voxel_size
    ox = rng.uniform(grid.origin[0] - 2, grid.origin[0] + span[0] + 2, n)
    oy = rng.uniform(grid.origin[1] - 2, grid.origin[1] + span[1] + 2, n)
    origins = np.stack([ox, oy, np.full(n, 60.0)], axis=1)
    tilt = rng.uniform(-1.0, 1.0, n)
    phi = rng.uniform(0, 2 * np.pi, n)
    dirs = np.stack(
        [np.sin(tilt) * np.cos(phi), np.sin(tilt) * np.sin(phi), -np.abs(np.cos(tilt)) - 1e-3],
        axis=1,
    )
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    dirs[0] = (0.0, 0.0, -1.0)
    pulses = np.arange(n, dtype=np.int64)
    times = rng.uniform(0, 100, n)
    return origins, dirs, pulses, times


def test_trace_parity_on_real_grid(small_grid):
    cell, opac, inst, sem = small_grid.dense_attr()
    origins, dirs, pulses, times = _trace_args(7, small_grid)
    seed = (1 << 62) + 9917
    common = (
        small_grid.origin,
        small_grid.voxel_size,
        small_grid.dims,
        cell,
        opac,
        inst,
        sem,
        seed,
        15,
        300.0,
    )
    fast = _core.trace_rays(
        np.ascontiguousarray(origins), np.ascontiguousarray(dirs), pulses, times, *common
    )
    slow = fallback.trace_rays(origins, dirs, pulses, times, *common)
    assert len(fast[0]) > 500
    _assert_same(fast, slow)


def test_survey_parity_end_to_end(small_scene, library, monkeypatch):
    """A full (tiny) survey must be bitwise identical across backends."""
    from sylva import _kernels
    from sylva.survey import ScannerConfig, plan_flight, run_survey
    from sylva.voxelgrid import voxelize_scene

    from .conftest import assert_clouds_bitwise_equal

    grid = voxelize_scene(small_scene, library, voxel_size=0.25)
    plan = plan_flight(small_scene.extent, spacing=20)
    sc = ScannerConfig(pulse_frequency=2000, scan_line_rate=20)

    compiled_cloud, _ = run_survey(grid, plan, sc, survey_seed=5, extent=small_scene.extent)

    monkeypatch.setattr(_kernels, "trace_rays", fallback.trace_rays)
    monkeypatch.setattr("sylva.survey.trace_rays", fallback.trace_rays)
    monkeypatch.setattr("sylva.voxelgrid.voxelize_triangles", fallback.voxelize_triangles)
    grid2 = voxelize_scene(small_scene, library, voxel_size=0.25)
    fallback_cloud, _ = run_survey(grid2, plan, sc, survey_seed=5, extent=small_scene.extent)

    assert_clouds_bitwise_equal(compiled_cloud, fallback_cloud)
