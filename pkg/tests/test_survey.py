import itertools

import numpy as np
import pytest

from sylva.errors import ValidationError
from sylva.geometry import Rect
from sylva.labels import GROUND, LEAF, WOOD
from sylva.survey import (
    PATTERN_CRISS_CROSS,
    PATTERN_PARALLEL,
    Pulse,
    ScannerConfig,
    generate_pulses,
    plan_flight,
    pulse_by_index,
    run_survey,
    total_pulse_count,
    trace_pulse,
)
from sylva.voxelgrid import VoxelGrid

from .conftest import assert_clouds_bitwise_equal


def _grid(cells, origin=(0.0, 0.0, 0.0), vs=1.0, dims=(3, 3, 3)):
    coords = np.array([c[0] for c in cells], dtype=np.int64).reshape(-1, 3)
    inst = np.array([c[1] for c in cells], dtype=np.uint32)
    sem = np.array([c[2] for c in cells], dtype=np.uint8)
    op = np.array([c[3] for c in cells], dtype=np.float64)
    return VoxelGrid(origin, vs, dims, coords, inst, sem, op)


def test_plan_250m_criss_cross_has_28_legs():
    plan = plan_flight(Rect(0, 0, 250, 250), spacing=20)
    assert len(plan.legs) == 28


def test_plan_exact_multiple_parallel():
    plan = plan_flight(Rect(0, 0, 40, 40), spacing=20, pattern=PATTERN_PARALLEL)
    assert len(plan.legs) == 3
    offsets = sorted({leg.start[1] for leg in plan.legs})
    assert offsets == [0.0, 20.0, 40.0]


def test_criss_cross_doubles_parallel_on_square():
    par = plan_flight(Rect(0, 0, 70, 70), spacing=20, pattern=PATTERN_PARALLEL)
    cc = plan_flight(Rect(0, 0, 70, 70), spacing=20, pattern=PATTERN_CRISS_CROSS)
    assert len(cc.legs) == 2 * len(par.legs)


def test_legs_extended_one_spacing_beyond_ends():
    plan = plan_flight(Rect(0, 0, 40, 40), spacing=20, pattern=PATTERN_PARALLEL)
    xs = [leg.start[0] for leg in plan.legs] + [leg.end[0] for leg in plan.legs]
    assert min(xs) == -20.0 and max(xs) == 60.0


def test_boustrophedon_alternates():
    plan = plan_flight(Rect(0, 0, 40, 40), spacing=20, pattern=PATTERN_PARALLEL)
    d0 = plan.legs[0].direction
    d1 = plan.legs[1].direction
    assert d0[0] == pytest.approx(-d1[0])


def test_zero_area_extent_rejected():
    with pytest.raises(ValidationError):
        plan_flight(Rect(0, 0, 0, 10), spacing=20)


def test_pulses_per_line_default():
    assert ScannerConfig().pulses_per_line == 1000


def test_fifty_meter_leg_has_thousand_lines():
    plan = plan_flight(Rect(0, 0, 30, 30), spacing=20)
    from sylva.survey import FlightLeg, _leg_line_count

    leg = FlightLeg((0, 0), (50, 0), 60.0, 5.0)
    assert _leg_line_count(leg, ScannerConfig()) == 1000


def test_nadir_pulse_exact():
    # Central line over the leg midpoint; pulse at the sweep's zero angle.
    from sylva.survey import FlightLeg, FlightPlan

    leg = FlightLeg((0.0, 10.0), (50.0, 10.0), 60.0, 5.0)
    plan = FlightPlan(legs=[leg], pattern=PATTERN_PARALLEL, spacing=20.0)
    sc = ScannerConfig()
    ppl = sc.pulses_per_line
    target = 500 * ppl + ppl // 2  # line 500 of 1000, middle pulse of the sweep
    pulse = pulse_by_index(plan, sc, target)
    assert abs(pulse.direction[0]) < 1e-9
    assert abs(pulse.direction[1]) < 1e-9
    assert pulse.direction[2] == pytest.approx(-1.0, abs=1e-9)
    assert pulse.origin[0] == pytest.approx(25.0, abs=0.1)


def test_pulse_by_index_matches_stream():
    plan = plan_flight(Rect(0, 0, 5, 5), spacing=20)
    sc = ScannerConfig(pulse_frequency=500, scan_line_rate=50)
    stream = list(generate_pulses(plan, sc))
    assert len(stream) == total_pulse_count(plan, sc)
    for k in (0, 7, len(stream) // 2, len(stream) - 1):
        direct = pulse_by_index(plan, sc, k)
        assert direct == stream[k]
    # Directions are unit length and downward.
    d = np.array([p.direction for p in stream[:2000]])
    assert np.allclose(np.linalg.norm(d, axis=1), 1.0, atol=1e-9)
    assert (d[:, 2] < 0).all()


def test_trace_empty_grid_gives_nothing():
    grid = _grid([((0, 0, 0), 0, GROUND, 1.0)])
    # Remove the only cell to make it genuinely empty.
    empty = VoxelGrid(
        grid.origin,
        grid.voxel_size,
        grid.dims,
        np.empty((0, 3), dtype=np.int64),
        np.empty(0, dtype=np.uint32),
        np.empty(0, dtype=np.uint8),
        np.empty(0, dtype=np.float64),
    )
    pulse = Pulse(0, (1.5, 1.5, 10.0), (0.0, 0.0, -1.0), 0.0)
    assert len(trace_pulse(pulse, empty, survey_seed=1)) == 0


def test_single_opaque_voxel_entry_on_top_face():
    grid = _grid([((1, 1, 1), 5, WOOD, 1.0)])
    pulse = Pulse(3, (1.5, 1.5, 10.0), (0.0, 0.0, -1.0), 0.25)
    pts = trace_pulse(pulse, grid, survey_seed=9)
    assert len(pts) == 1
    p = pts[0]
    assert (p["x"], p["y"], p["z"]) == (1.5, 1.5, 2.0)
    assert p["instance"] == 5 and p["semantic"] == WOOD
    assert p["return_number"] == 1 and p["pulse"] == 3 and p["time"] == 0.25


def test_opaque_leaf_stack_terminates_at_first_voxel():
    cells = [((0, 0, z), 1, LEAF, 1.0) for z in range(20)]
    grid = _grid(cells, dims=(1, 1, 25))
    pulse = Pulse(0, (0.5, 0.5, 40.0), (0.0, 0.0, -1.0), 0.0)
    pts = trace_pulse(pulse, grid, survey_seed=4)
    assert len(pts) == 1
    assert pts[0]["z"] == pytest.approx(20.0)


def test_return_cap_reached_through_translucent_stack():
    # 20 nearly-opaque leaf voxels: every Bernoulli draw passes, so the cap
    # (not opacity termination) ends the pulse at exactly max_returns.
    cells = [((0, 0, z), 1, LEAF, 0.999999) for z in range(20)]
    grid = _grid(cells, dims=(1, 1, 25))
    pulse = Pulse(0, (0.5, 0.5, 40.0), (0.0, 0.0, -1.0), 0.0)
    pts = trace_pulse(pulse, grid, survey_seed=4, scanner=ScannerConfig(max_returns=15))
    assert len(pts) == 15
    assert list(pts["return_number"]) == list(range(1, 16))
    assert pts[0]["z"] == pytest.approx(20.0)
    assert pts[14]["z"] == pytest.approx(6.0)


def test_max_range_cuts_trace():
    grid = _grid([((1, 1, 0), 2, WOOD, 1.0)])
    pulse = Pulse(0, (1.5, 1.5, 500.0), (0.0, 0.0, -1.0), 0.0)
    pts = trace_pulse(pulse, grid, survey_seed=1, scanner=ScannerConfig(max_range=100.0))
    assert len(pts) == 0


def test_survey_determinism_and_worker_independence(small_grid, small_scene):
    plan = plan_flight(small_scene.extent, spacing=20)
    sc = ScannerConfig(pulse_frequency=4000, scan_line_rate=40)
    a, stats_a = run_survey(small_grid, plan, sc, survey_seed=31, extent=small_scene.extent)
    b, _ = run_survey(small_grid, plan, sc, survey_seed=31, extent=small_scene.extent)
    c, _ = run_survey(
        small_grid, plan, sc, survey_seed=31, extent=small_scene.extent, workers=3
    )
    assert_clouds_bitwise_equal(a, b)
    assert_clouds_bitwise_equal(a, c)
    d, _ = run_survey(small_grid, plan, sc, survey_seed=32, extent=small_scene.extent)
    assert len(d) != len(a) or not np.array_equal(a.points["x"], d.points["x"])
    assert stats_a.pulse_count == total_pulse_count(plan, sc)


def test_return_sequences_consecutive(small_grid, small_scene):
    plan = plan_flight(small_scene.extent, spacing=20)
    sc = ScannerConfig(pulse_frequency=3000, scan_line_rate=30)
    cloud, _ = run_survey(small_grid, plan, sc, survey_seed=8, extent=small_scene.extent, clip=False)
    order = np.lexsort((cloud.points["return_number"], cloud.points["pulse"]))
    pts = cloud.points[order]
    assert (pts["return_number"] >= 1).all()
    assert (pts["return_number"] <= sc.max_returns).all()
    for pulse_id, group in itertools.groupby(range(len(pts)), key=lambda i: pts["pulse"][i]):
        rets = [int(pts["return_number"][i]) for i in group]
        assert rets == list(range(1, len(rets) + 1))


def test_points_lie_on_their_rays(small_grid, small_scene):
    plan = plan_flight(small_scene.extent, spacing=20)
    sc = ScannerConfig(pulse_frequency=2000, scan_line_rate=20)
    cloud, _ = run_survey(small_grid, plan, sc, survey_seed=5, extent=small_scene.extent, clip=False)
    rng = np.random.default_rng(1)
    take = rng.integers(0, len(cloud), size=min(500, len(cloud)))
    for i in take:
        p = cloud.points[i]
        pulse = pulse_by_index(plan, sc, int(p["pulse"]))
        o = np.array(pulse.origin)
        d = np.array(pulse.direction)
        v = np.array([p["x"], p["y"], p["z"]]) - o
        t = v @ d
        assert np.linalg.norm(v - t * d) < 1e-6
        assert 0 <= t <= sc.max_range
        # The carried labels belong to a voxel that contains the point.
        found = False
        base = small_grid.voxel_of((p["x"], p["y"], p["z"]))
        for dx in (0, -1, 1):
            for dy in (0, -1, 1):
                for dz in (0, -1, 1):
                    ijk = (base[0] + dx, base[1] + dy, base[2] + dz)
                    attr = small_grid.get(ijk)
                    if attr is None:
                        continue
                    lo, hi = small_grid.voxel_bounds(ijk)
                    inside = all(
                        lo[a] - 1e-9 <= [p["x"], p["y"], p["z"]][a] <= hi[a] + 1e-9
                        for a in range(3)
                    )
                    if (
                        inside
                        and attr.instance_id == p["instance"]
                        and attr.semantic == p["semantic"]
                    ):
                        found = True
        assert found


def test_survey_stats_density_counts_extent_points(small_grid, small_scene):
    plan = plan_flight(small_scene.extent, spacing=20)
    sc = ScannerConfig(pulse_frequency=1000, scan_line_rate=20)
    cloud, stats = run_survey(small_grid, plan, sc, survey_seed=2, extent=small_scene.extent)
    assert stats.points_in_extent == len(cloud)
    assert stats.mean_density == pytest.approx(len(cloud) / small_scene.extent.area)
