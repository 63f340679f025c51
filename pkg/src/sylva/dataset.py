"""Dataset assembly: semantic remapping, tiling, splits, densities, manifests,
and the mesh-vertex (nodal) baseline extraction."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .assets import AssetLibrary
from .errors import DataError, ParseError, ValidationError
from .geometry import Rect
from .labels import LEAF, WOOD, semantic_name
from .pointcloud import (
    POINT_DTYPE,
    PROVENANCE_NODAL,
    PointCloud,
    make_points,
)
from .procgen import ForestScene
from .voxelgrid import transform_instance

SPLIT_NAMES = ("train", "val", "test")
DEFAULT_TILE_SIZE = 50.0
DEFAULT_FRACTIONS = (0.70, 0.15, 0.15)
DEFAULT_DENSITY_THRESHOLD = 1000.0


def remap_semantics(cloud: PointCloud, mapping: dict[int, int]) -> PointCloud:
    """Rewrite semantic labels; geometry and every other field untouched."""
    present = np.unique(cloud.points["semantic"])
    missing = [int(s) for s in present if int(s) not in mapping]
    if missing:
        names = ", ".join(semantic_name(s) for s in missing)
        raise DataError(f"semantic label(s) without mapping: {names}")
    points = cloud.points.copy()
    if len(points):
        lut = np.zeros(int(present.max()) + 1, dtype=POINT_DTYPE["semantic"])
        for src, dst in mapping.items():
            if src <= int(present.max()):
                lut[src] = dst
        points["semantic"] = lut[points["semantic"]]
    return PointCloud(points, extent=cloud.extent, provenance=cloud.provenance)


@dataclass
class Plot:
    tile_index: tuple[int, int]
    bounds: Rect
    cloud: PointCloud
    scene: str = "scene"
    edge: bool = False
    path: str | None = None

    @property
    def density(self) -> float:
        return len(self.cloud) / self.bounds.area if self.bounds.area > 0 else 0.0


def tile(cloud: PointCloud, tile_size: float = DEFAULT_TILE_SIZE, scene: str = "scene") -> list[Plot]:
    """Partition a cloud into tiles aligned to the extent's min corner.

    Points fall into half-open cells by floor division; edge tiles narrower
    than tile_size are kept and flagged; empty tiles are omitted.
    """
    if tile_size <= 0:
        raise ValidationError("tile_size must be positive")
    if len(cloud) == 0:
        return []
    e = cloud.extent
    xs = cloud.points["x"]
    ys = cloud.points["y"]
    ti = np.floor((xs - e.xmin) / tile_size).astype(np.int64)
    tj = np.floor((ys - e.ymin) / tile_size).astype(np.int64)
    # Points exactly on the extent max edge belong to the last interior tile.
    ni = max(1, int(math.ceil(e.width / tile_size - 1e-9)))
    nj = max(1, int(math.ceil(e.height / tile_size - 1e-9)))
    ti = np.minimum(ti, ni - 1)
    tj = np.minimum(tj, nj - 1)

    plots = []
    order = np.lexsort((tj, ti))
    sti = ti[order]
    stj = tj[order]
    boundaries = np.nonzero((sti[1:] != sti[:-1]) | (stj[1:] != stj[:-1]))[0] + 1
    starts = np.concatenate([[0], boundaries])
    ends = np.concatenate([boundaries, [len(order)]])
    for s, t in zip(starts, ends):
        i, j = int(sti[s]), int(stj[s])
        xmin = e.xmin + i * tile_size
        ymin = e.ymin + j * tile_size
        bounds = Rect(xmin, ymin, min(xmin + tile_size, e.xmax), min(ymin + tile_size, e.ymax))
        edge = bounds.width < tile_size - 1e-9 or bounds.height < tile_size - 1e-9
        sub = PointCloud(
            cloud.points[order[s:t]].copy(), extent=bounds, provenance=cloud.provenance
        )
        plots.append(Plot(tile_index=(i, j), bounds=bounds, cloud=sub, scene=scene, edge=edge))
    return plots


def _round_ties_down(x: float) -> int:
    """Nearest integer with exact .5 ties toward zero (pins 25 -> 17/4/4)."""
    return int(math.ceil(x - 0.5))


def split_counts(n: int, fractions=DEFAULT_FRACTIONS) -> tuple[int, int, int]:
    n_train = _round_ties_down(n * fractions[0])
    n_val = _round_ties_down(n * fractions[1])
    return n_train, n_val, n - n_train - n_val


@dataclass
class ManifestEntry:
    scene: str
    tile_index: tuple[int, int]
    split: str
    points: int
    density: float
    bounds: Rect
    path: str | None = None


@dataclass
class DatasetManifest:
    name: str
    scenes: list[str]
    entries: list[ManifestEntry] = field(default_factory=list)

    def split_counts(self, scene: str | None = None) -> dict[str, int]:
        counts = {s: 0 for s in SPLIT_NAMES}
        for entry in self.entries:
            if scene is None or entry.scene == scene:
                counts[entry.split] += 1
        return counts

    def entries_for(self, split: str | None = None):
        return [e for e in self.entries if split is None or e.split == split]


def split(
    plots: list[Plot],
    fractions=DEFAULT_FRACTIONS,
    seed: int = 0,
    kind: str = "Sim",
) -> DatasetManifest:
    """Assign plots to train/val/test per scene with a seed-keyed shuffle."""
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValidationError("split fractions must sum to 1")
    by_scene: dict[str, list[Plot]] = {}
    for p in plots:
        by_scene.setdefault(p.scene, []).append(p)

    entries = []
    for scene in sorted(by_scene):
        group = by_scene[scene]
        if len(group) < 3:
            raise ValidationError(
                f"scene {scene!r} has {len(group)} plots; need at least 3 to populate all splits"
            )
        scene_word = rng.hash64(*(ord(c) for c in scene))
        group = sorted(
            group,
            key=lambda p: rng.hash64(seed, rng.SPLIT, scene_word, p.tile_index[0], p.tile_index[1]),
        )
        n_train, n_val, n_test = split_counts(len(group), fractions)
        for i, plot in enumerate(group):
            if i < n_train:
                name = "train"
            elif i < n_train + n_val:
                name = "val"
            else:
                name = "test"
            entries.append(
                ManifestEntry(
                    scene=scene,
                    tile_index=plot.tile_index,
                    split=name,
                    points=len(plot.cloud),
                    density=plot.density,
                    bounds=plot.bounds,
                    path=plot.path,
                )
            )
    entries.sort(key=lambda e: (e.scene, e.tile_index))
    scenes = sorted(by_scene)
    manifest_name = f"{kind}_{len(scenes)}_{len(entries)}"
    return DatasetManifest(name=manifest_name, scenes=scenes, entries=entries)


@dataclass
class DensityRow:
    scene: str
    tile_index: tuple[int, int]
    density: float
    flagged: bool


@dataclass
class DensityReport:
    rows: list[DensityRow]
    scene_means: dict[str, float]
    threshold: float

    @property
    def overall_mean(self) -> float:
        return sum(r.density for r in self.rows) / len(self.rows) if self.rows else 0.0


def density_report(plots: list[Plot], threshold: float = DEFAULT_DENSITY_THRESHOLD) -> DensityReport:
    rows = [
        DensityRow(p.scene, p.tile_index, p.density, p.density < threshold) for p in plots
    ]
    scene_totals: dict[str, list[float]] = {}
    for r in rows:
        scene_totals.setdefault(r.scene, []).append(r.density)
    means = {s: sum(v) / len(v) for s, v in scene_totals.items()}
    return DensityReport(rows=rows, scene_means=means, threshold=threshold)


def _vertex_majority_material(mesh) -> np.ndarray:
    """Per-vertex majority material over adjacent triangles; wood on ties."""
    nv = len(mesh.vertices)
    wood_count = np.zeros(nv, dtype=np.int64)
    leaf_count = np.zeros(nv, dtype=np.int64)
    tris = mesh.triangles
    is_wood = mesh.material == WOOD
    for c in range(3):
        np.add.at(wood_count, tris[is_wood, c], 1)
        np.add.at(leaf_count, tris[~is_wood, c], 1)
    return np.where(wood_count >= leaf_count, WOOD, LEAF).astype(np.uint8)


def extract_nodal(scene: ForestScene, library: AssetLibrary) -> PointCloud:
    """Mesh-vertex baseline: one point per world-space vertex of every
    instance, deduplicated within 1e-6 m, labeled by the vertex's majority
    adjacent material.  No physics, no ground points."""
    label_cache: dict[str, np.ndarray] = {}
    parts = []
    for inst in scene.instances:
        asset = library.get(inst.asset_id)
        if asset.asset_id not in label_cache:
            label_cache[asset.asset_id] = _vertex_majority_material(asset.mesh)
        labels = label_cache[asset.asset_id]
        world = transform_instance(asset, inst).vertices
        rounded = np.round(world, 6)
        _, keep = np.unique(
            rounded.view([("x", "f8"), ("y", "f8"), ("z", "f8")]), return_index=True
        )
        keep = np.sort(keep)
        pts = make_points(len(keep))
        pts["x"] = world[keep, 0]
        pts["y"] = world[keep, 1]
        pts["z"] = world[keep, 2]
        pts["instance"] = inst.instance_id
        pts["semantic"] = labels[keep]
        pts["return_number"] = 0
        pts["pulse"] = -1
        pts["time"] = 0.0
        parts.append(pts)
    points = np.concatenate(parts) if parts else make_points(0)
    return PointCloud(points, extent=scene.extent, provenance=PROVENANCE_NODAL)


# Manifest files: key-value text, one block per plot.

_MANIFEST_MAGIC = "# sylva-manifest v1"


def write_manifest(manifest: DatasetManifest, path) -> None:
    lines = [_MANIFEST_MAGIC, f"name = {manifest.name}"]
    lines.append(f"scenes = {','.join(manifest.scenes)}")
    lines.append(f"plots = {len(manifest.entries)}")
    for i, e in enumerate(manifest.entries):
        p = f"plot.{i}"
        lines.append(f"{p}.scene = {e.scene}")
        lines.append(f"{p}.tile = {e.tile_index[0]},{e.tile_index[1]}")
        lines.append(f"{p}.split = {e.split}")
        lines.append(f"{p}.points = {e.points}")
        lines.append(f"{p}.density = {e.density!r}")
        b = e.bounds
        lines.append(f"{p}.bounds = {b.xmin!r} {b.ymin!r} {b.xmax!r} {b.ymax!r}")
        if e.path is not None:
            lines.append(f"{p}.path = {e.path}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_manifest(path) -> DatasetManifest:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != _MANIFEST_MAGIC:
        raise ParseError("not a manifest file", path=path, line=1)
    name = None
    scenes: list[str] = []
    plot_fields: dict[int, dict[str, str]] = {}
    count = 0
    for lineno, line in enumerate(lines[1:], start=2):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, eq, value = line.partition("=")
        if not eq:
            raise ParseError("manifest line is not key = value", path=path, line=lineno)
        key, value = key.strip(), value.strip()
        if key == "name":
            name = value
        elif key == "scenes":
            scenes = [s for s in value.split(",") if s]
        elif key == "plots":
            count = int(value)
        elif key.startswith("plot."):
            _, idx, fieldname = key.split(".", 2)
            plot_fields.setdefault(int(idx), {})[fieldname] = value
        else:
            raise ParseError(f"unknown manifest key {key!r}", path=path, line=lineno)
    if name is None:
        raise ParseError("manifest missing name", path=path)
    entries = []
    for i in range(count):
        f = plot_fields.get(i)
        if f is None:
            raise ParseError(f"manifest missing plot {i}", path=path)
        try:
            ti, tj = (int(v) for v in f["tile"].split(","))
            bx = [float(v) for v in f["bounds"].split()]
            entries.append(
                ManifestEntry(
                    scene=f["scene"],
                    tile_index=(ti, tj),
                    split=f["split"],
                    points=int(f["points"]),
                    density=float(f["density"]),
                    bounds=Rect(*bx),
                    path=f.get("path"),
                )
            )
        except (KeyError, ValueError) as exc:
            raise ParseError(f"bad plot block {i}: {exc}", path=path) from None
    return DatasetManifest(name=name, scenes=scenes, entries=entries)


def plot_filename(scene: str, tile_index: tuple[int, int], fmt: str = "binary") -> str:
    ext = "svpc" if fmt == "binary" else "txt"
    return f"{scene}_i{tile_index[0]}_j{tile_index[1]}.{ext}"
