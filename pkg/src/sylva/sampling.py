"""Training-unit extraction: cylinder sampling and the tree-swap augmentation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng
from .dataset import Plot
from .errors import AugmentationError, ValidationError
from .pointcloud import PointCloud

DEFAULT_RADIUS = 8.0
DEFAULT_GRID_STRIDE = 11.0
DEFAULT_MIX_FRACTION = 0.30


@dataclass
class CylinderSample:
    center: tuple[float, float]
    radius: float
    cloud: PointCloud
    source_plot: tuple[int, int] | None = None

    def __len__(self) -> int:
        return len(self.cloud)

    def tree_ids(self) -> np.ndarray:
        ids = np.unique(self.cloud.points["instance"])
        return ids[ids != 0]


def _cut_cylinder(plot: Plot, cx: float, cy: float, radius: float) -> PointCloud:
    pts = plot.cloud.points
    dx = pts["x"] - cx
    dy = pts["y"] - cy
    mask = dx * dx + dy * dy <= radius * radius
    return PointCloud(pts[mask].copy(), extent=None, provenance=plot.cloud.provenance)


def sample_cylinders_random(
    plot: Plot, radius: float = DEFAULT_RADIUS, count: int = 0, seed: int = 0
) -> list[CylinderSample]:
    """Cylinders at seed-keyed uniform centers over the plot bounds.

    Centers may fall near the boundary; the radius predicate simply excludes
    points outside the plot.  Center k uses stream key (seed, CENTER, k, axis).
    """
    if count < 0:
        raise ValidationError("count must be >= 0")
    b = plot.bounds
    out = []
    for k in range(count):
        cx = b.xmin + rng.u01(seed, rng.CENTER, k, 0) * b.width
        cy = b.ymin + rng.u01(seed, rng.CENTER, k, 1) * b.height
        out.append(
            CylinderSample(
                center=(cx, cy),
                radius=radius,
                cloud=_cut_cylinder(plot, cx, cy, radius),
                source_plot=plot.tile_index,
            )
        )
    return out


def grid_centers(bounds, radius: float, stride: float) -> list[tuple[float, float]]:
    """Plot-centered square lattice with the given stride.

    Per axis the count is max(1, ceil(size / stride)), which keeps the
    outermost centers within half a stride of the boundary; discs of radius r
    then cover the whole plot whenever stride <= r * sqrt(2).
    """
    if stride <= 0:
        raise ValidationError("stride must be positive")

    def axis_centers(lo: float, size: float) -> list[float]:
        n = max(1, int(math.ceil(size / stride - 1e-9)))
        mid = lo + 0.5 * size
        start = mid - 0.5 * (n - 1) * stride
        return [start + i * stride for i in range(n)]

    xs = axis_centers(bounds.xmin, bounds.width)
    ys = axis_centers(bounds.ymin, bounds.height)
    return [(x, y) for x in xs for y in ys]


def sample_cylinders_grid(
    plot: Plot, radius: float = DEFAULT_RADIUS, stride: float = DEFAULT_GRID_STRIDE
) -> list[CylinderSample]:
    """Systematic coverage sampling on the centered lattice."""
    out = []
    for cx, cy in grid_centers(plot.bounds, radius, stride):
        out.append(
            CylinderSample(
                center=(cx, cy),
                radius=radius,
                cloud=_cut_cylinder(plot, cx, cy, radius),
                source_plot=plot.tile_index,
            )
        )
    return out


def _ground_height_near(sample: CylinderSample, x: float, y: float) -> float:
    """Local ground estimate: mean z of non-tree points within 2 m, falling
    back to the nearest non-tree point, then to 0."""
    pts = sample.cloud.points
    ground = pts[pts["instance"] == 0]
    if len(ground) == 0:
        return 0.0
    dx = ground["x"] - x
    dy = ground["y"] - y
    d2 = dx * dx + dy * dy
    near = d2 <= 4.0
    if near.any():
        return float(ground["z"][near].mean())
    return float(ground["z"][int(np.argmin(d2))])


def mix_replacement_count(n_trees: int, fraction: float) -> int:
    """Trees to swap: max(1, round(fraction * n)) for fraction > 0, else 0."""
    if fraction <= 0.0:
        return 0
    return max(1, round(fraction * n_trees))


def tree_mix(
    sample_a: CylinderSample,
    sample_b: CylinderSample,
    fraction: float = DEFAULT_MIX_FRACTION,
    seed: int = 0,
) -> CylinderSample:
    """Swap a fraction of sample_a's trees for trees from sample_b.

    Donor trees are rigidly translated so their xy centroid lands on the
    removed tree's centroid and their minimum z on the local ground height.
    Inserted trees receive fresh instance ids; non-tree points are untouched.
    """
    a_trees = sample_a.tree_ids()
    b_trees = sample_b.tree_ids()
    if len(a_trees) == 0 or len(b_trees) == 0:
        raise AugmentationError("both samples need at least one tree instance")
    k = mix_replacement_count(len(a_trees), fraction)
    if k == 0:
        return CylinderSample(
            center=sample_a.center,
            radius=sample_a.radius,
            cloud=PointCloud(
                sample_a.cloud.points.copy(), provenance=sample_a.cloud.provenance
            ),
            source_plot=sample_a.source_plot,
        )
    if len(b_trees) < k:
        raise AugmentationError(
            f"donor sample has {len(b_trees)} trees; {k} needed for the swap"
        )

    removed = sorted(a_trees, key=lambda t: rng.hash64(seed, rng.MIX, 0, int(t)))[:k]
    donors = sorted(b_trees, key=lambda t: rng.hash64(seed, rng.MIX, 1, int(t)))[:k]

    pts_a = sample_a.cloud.points
    keep_mask = ~np.isin(pts_a["instance"], removed)
    kept = pts_a[keep_mask]

    next_id = int(max(int(kept["instance"].max(initial=0)), int(max(removed)))) + 1
    parts = [kept]
    for removed_id, donor_id in zip(removed, donors):
        target = pts_a[pts_a["instance"] == removed_id]
        tx = float(target["x"].mean())
        ty = float(target["y"].mean())
        tz = _ground_height_near(sample_a, tx, ty)
        donor = sample_b.cloud.points[sample_b.cloud.points["instance"] == donor_id].copy()
        donor["x"] += tx - float(donor["x"].mean())
        donor["y"] += ty - float(donor["y"].mean())
        donor["z"] += tz - float(donor["z"].min())
        donor["instance"] = next_id
        next_id += 1
        parts.append(donor)
    merged = np.concatenate(parts)
    return CylinderSample(
        center=sample_a.center,
        radius=sample_a.radius,
        cloud=PointCloud(merged, provenance=sample_a.cloud.provenance),
        source_plot=sample_a.source_plot,
    )


# Sidecar records for serialized samples (consumed alongside the point files).


def sample_sidecar(sample: CylinderSample) -> dict:
    return {
        "center_x": repr(sample.center[0]),
        "center_y": repr(sample.center[1]),
        "radius": repr(sample.radius),
        "points": len(sample),
        "source_plot": f"{sample.source_plot[0]},{sample.source_plot[1]}"
        if sample.source_plot
        else "",
    }
