import numpy as np
import pytest

from sylva.dataset import Plot
from sylva.errors import AugmentationError
from sylva.geometry import Rect
from sylva.labels import GROUND, WOOD
from sylva.pointcloud import PointCloud, make_points
from sylva.sampling import (
    CylinderSample,
    grid_centers,
    mix_replacement_count,
    sample_cylinders_grid,
    sample_cylinders_random,
    tree_mix,
)


def _plot_with_trees(n_trees=10, extent=Rect(0, 0, 50, 50), seed=0, pts_per_tree=30):
    rng = np.random.default_rng(seed)
    records = []
    # Ground carpet.
    n_ground = 400
    g = make_points(n_ground)
    g["x"] = rng.uniform(extent.xmin, extent.xmax, n_ground)
    g["y"] = rng.uniform(extent.ymin, extent.ymax, n_ground)
    g["z"] = 0.0
    g["semantic"] = GROUND
    g["instance"] = 0
    records.append(g)
    for t in range(1, n_trees + 1):
        cx = rng.uniform(extent.xmin + 2, extent.xmax - 2)
        cy = rng.uniform(extent.ymin + 2, extent.ymax - 2)
        p = make_points(pts_per_tree)
        p["x"] = cx + rng.normal(0, 0.5, pts_per_tree)
        p["y"] = cy + rng.normal(0, 0.5, pts_per_tree)
        p["z"] = rng.uniform(0, 10, pts_per_tree)
        p["semantic"] = WOOD
        p["instance"] = t
        records.append(p)
    cloud = PointCloud(np.concatenate(records), extent=extent)
    return Plot((0, 0), extent, cloud)


def _tree_sample(tree_ids, center=(25.0, 25.0), seed=0, with_ground=True):
    rng = np.random.default_rng(seed)
    parts = []
    if with_ground:
        g = make_points(50)
        g["x"] = center[0] + rng.uniform(-8, 8, 50)
        g["y"] = center[1] + rng.uniform(-8, 8, 50)
        g["z"] = 0.0
        g["instance"] = 0
        g["semantic"] = GROUND
        parts.append(g)
    for t in tree_ids:
        p = make_points(20)
        p["x"] = center[0] + rng.normal(0, 1, 20)
        p["y"] = center[1] + rng.normal(0, 1, 20)
        p["z"] = rng.uniform(0, 8, 20)
        p["instance"] = t
        p["semantic"] = WOOD
        parts.append(p)
    return CylinderSample(center=center, radius=8.0, cloud=PointCloud(np.concatenate(parts)))


# --- random sampling ----------------------------------------------------------


def test_random_zero_count():
    assert sample_cylinders_random(_plot_with_trees(), count=0, seed=1) == []


def test_random_membership_radius():
    plot = _plot_with_trees()
    for s in sample_cylinders_random(plot, radius=8.0, count=10, seed=3):
        d = np.hypot(s.cloud.points["x"] - s.center[0], s.cloud.points["y"] - s.center[1])
        assert (d <= 8.0 + 1e-9).all()


def test_random_deterministic():
    plot = _plot_with_trees()
    a = sample_cylinders_random(plot, count=5, seed=9)
    b = sample_cylinders_random(plot, count=5, seed=9)
    assert [s.center for s in a] == [s.center for s in b]
    c = sample_cylinders_random(plot, count=5, seed=10)
    assert [s.center for s in a] != [s.center for s in c]


def test_random_centers_inside_bounds():
    plot = _plot_with_trees()
    for s in sample_cylinders_random(plot, count=50, seed=2):
        assert plot.bounds.contains_closed(s.center[0], s.center[1])


# --- grid sampling -------------------------------------------------------------


def test_grid_50m_radius8_stride11_gives_25():
    plot = _plot_with_trees()
    samples = sample_cylinders_grid(plot, radius=8.0, stride=11.0)
    assert len(samples) == 25


def test_grid_small_plot_single_centered():
    plot = _plot_with_trees(extent=Rect(0, 0, 10, 10))
    samples = sample_cylinders_grid(plot, radius=8.0, stride=11.0)
    assert len(samples) == 1
    assert samples[0].center == (5.0, 5.0)


def test_grid_full_coverage_at_stride_r_sqrt2():
    # Geometric coverage oracle: a dense lattice of probe points must all
    # fall within some cylinder when stride <= radius * sqrt(2).
    bounds = Rect(0, 0, 50, 50)
    radius = 8.0
    stride = 11.3  # just under 8 * sqrt(2) = 11.3137
    centers = grid_centers(bounds, radius, stride)
    xs = np.linspace(0, 50, 201)
    ys = np.linspace(0, 50, 201)
    gx, gy = np.meshgrid(xs, ys)
    covered = np.zeros(gx.shape, dtype=bool)
    for cx, cy in centers:
        covered |= (gx - cx) ** 2 + (gy - cy) ** 2 <= radius * radius + 1e-9
    assert covered.all()


def test_grid_membership_scan_on_points():
    plot = _plot_with_trees(seed=5)
    samples = sample_cylinders_grid(plot, radius=8.0, stride=11.0)
    pts = plot.cloud.points
    covered = np.zeros(len(pts), dtype=bool)
    for s in samples:
        covered |= (pts["x"] - s.center[0]) ** 2 + (pts["y"] - s.center[1]) ** 2 <= 64.0 + 1e-9
    assert covered.all()


# --- tree mix -------------------------------------------------------------------


def test_mix_replacement_count_rule():
    assert mix_replacement_count(10, 0.30) == 3
    assert mix_replacement_count(1, 0.30) == 1
    assert mix_replacement_count(2, 0.30) == 1
    assert mix_replacement_count(10, 0.0) == 0


def test_mix_replaces_three_of_ten():
    a = _tree_sample(range(1, 11), seed=1)
    b = _tree_sample(range(100, 120), seed=2)
    mixed = tree_mix(a, b, fraction=0.30, seed=5)
    a_ids = set(a.tree_ids())
    m_ids = set(mixed.tree_ids())
    assert len(m_ids) == 10
    assert len(a_ids - m_ids) == 3  # three originals gone
    assert len(m_ids - a_ids) == 3  # three fresh ids arrived


def test_mix_fraction_zero_is_identity():
    a = _tree_sample(range(1, 6), seed=3)
    b = _tree_sample(range(50, 60), seed=4)
    mixed = tree_mix(a, b, fraction=0.0, seed=1)
    assert np.array_equal(mixed.cloud.points.view(np.uint8), a.cloud.points.view(np.uint8))


def test_mix_preserves_non_tree_points():
    a = _tree_sample(range(1, 11), seed=6)
    b = _tree_sample(range(30, 50), seed=7)
    mixed = tree_mix(a, b, fraction=0.30, seed=2)
    ground_a = a.cloud.points[a.cloud.points["instance"] == 0]
    ground_m = mixed.cloud.points[mixed.cloud.points["instance"] == 0]
    assert np.array_equal(ground_a.view(np.uint8), ground_m.view(np.uint8))


def test_mix_unique_ids_over_100_seeds():
    a = _tree_sample(range(1, 11), seed=8)
    b = _tree_sample(range(20, 40), seed=9)
    for seed in range(100):
        mixed = tree_mix(a, b, fraction=0.30, seed=seed)
        ids = mixed.cloud.points["instance"]
        ids = ids[ids != 0]
        uniq = np.unique(ids)
        assert len(set(uniq.tolist())) == len(uniq)
        assert len(uniq) == 10


def test_mix_donor_shortage_raises():
    a = _tree_sample(range(1, 11), seed=1)
    b = _tree_sample([100, 101], seed=2)
    with pytest.raises(AugmentationError):
        tree_mix(a, b, fraction=0.9, seed=0)


def test_mix_places_donor_on_target_footprint():
    a = _tree_sample(range(1, 11), seed=10)
    b = _tree_sample(range(60, 80), center=(5.0, 5.0), seed=11)
    removed_before = {int(t): a.cloud.points[a.cloud.points["instance"] == t] for t in a.tree_ids()}
    mixed = tree_mix(a, b, fraction=0.30, seed=3)
    new_ids = set(mixed.tree_ids()) - set(a.tree_ids())
    removed_ids = set(a.tree_ids()) - set(mixed.tree_ids())
    # Each inserted tree's centroid must coincide with some removed centroid.
    removed_centroids = {
        (round(float(removed_before[t]["x"].mean()), 6), round(float(removed_before[t]["y"].mean()), 6))
        for t in removed_ids
    }
    for t in new_ids:
        pts = mixed.cloud.points[mixed.cloud.points["instance"] == t]
        c = (round(float(pts["x"].mean()), 6), round(float(pts["y"].mean()), 6))
        assert c in removed_centroids
