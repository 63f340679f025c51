"""Tree geometry: mesh interchange loading and built-in parametric trees.

The interchange format is deliberately minimal ASCII:

    v x y z          vertex (meters)
    g name           group header; following faces belong to this group
    f i j k          1-based triangle

A sidecar descriptor (key = value text) assigns each group a material and
gives species / canopy level:

    species = ash
    canopy_level = large
    group.Trunk = wood
    group.LeafCards = leaf

Faces that appear before any ``g`` line belong to the group ``default``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .errors import ConfigurationError, ParseError, ValidationError
from .labels import LEAF, MATERIAL_CODES, WOOD

CANOPY_LEVELS = ("large", "medium", "sapling")

# Fraction of total height that counts as the trunk base band when locating
# the trunk axis of a loaded mesh.
_BASE_BAND = 0.05
_MIN_RADIUS = 1e-3


@dataclass(frozen=True)
class TriMesh:
    """Triangle mesh with one material class per triangle."""

    vertices: np.ndarray  # (n, 3) float64
    triangles: np.ndarray  # (m, 3) int32
    material: np.ndarray  # (m,) uint8, values WOOD or LEAF

    def __post_init__(self):
        v, t, m = self.vertices, self.triangles, self.material
        if len(t) != len(m):
            raise ValidationError("per-triangle material count does not match triangle count")
        if len(t) and (t.min() < 0 or t.max() >= len(v)):
            raise ValidationError("triangle index out of range")
        if len(v) and not np.isfinite(v).all():
            raise ValidationError("non-finite vertex coordinate")

    def __len__(self) -> int:
        return len(self.triangles)


@dataclass(frozen=True)
class TreeAsset:
    """A placeable tree: normalized mesh plus species metadata and bounding radii."""

    asset_id: str
    species: str
    canopy_level: str
    mesh: TriMesh
    base_height: float
    crown_radius: float
    trunk_radius: float

    def __post_init__(self):
        if self.canopy_level not in CANOPY_LEVELS:
            raise ValidationError(f"unknown canopy level {self.canopy_level!r}")
        if min(self.base_height, self.crown_radius, self.trunk_radius) <= 0:
            raise ValidationError("asset dimensions must be positive")
        if len(self.mesh) == 0:
            raise ValidationError("asset mesh is empty")


@dataclass
class AssetDescriptor:
    """Sidecar metadata for a mesh file."""

    species: str
    canopy_level: str
    material_map: dict[str, str] = field(default_factory=dict)


@dataclass
class MeshLoadReport:
    degenerate_dropped: int = 0
    orphan_vertices_dropped: int = 0


class AssetLibrary:
    """Assets indexed by id and by (species, canopy level)."""

    def __init__(self, assets=()):
        self._by_id: dict[str, TreeAsset] = {}
        self._by_group: dict[tuple[str, str], list[TreeAsset]] = {}
        for a in assets:
            self.add(a)

    def add(self, asset: TreeAsset) -> None:
        if asset.asset_id in self._by_id:
            raise ConfigurationError(f"duplicate asset id {asset.asset_id!r}")
        self._by_id[asset.asset_id] = asset
        self._by_group.setdefault((asset.species, asset.canopy_level), []).append(asset)

    def get(self, asset_id: str) -> TreeAsset:
        try:
            return self._by_id[asset_id]
        except KeyError:
            raise ConfigurationError(f"unknown asset id {asset_id!r}") from None

    def __contains__(self, asset_id: str) -> bool:
        return asset_id in self._by_id

    def select(self, species: str, canopy_level: str) -> list[TreeAsset]:
        return list(self._by_group.get((species, canopy_level), []))

    def __iter__(self):
        return iter(self._by_id.values())

    def __len__(self) -> int:
        return len(self._by_id)

    @property
    def ids(self) -> list[str]:
        return list(self._by_id)


def _triangle_areas(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    a = vertices[triangles[:, 0]]
    b = vertices[triangles[:, 1]]
    c = vertices[triangles[:, 2]]
    return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)


def parse_mesh_file(path) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """Parse the interchange format into raw vertices, faces and face groups."""
    vertices: list[tuple[float, float, float]] = []
    faces: list[tuple[int, int, int]] = []
    face_groups: list[str] = []
    group = "default"
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            tag = parts[0]
            try:
                if tag == "v":
                    if len(parts) != 4:
                        raise ValueError("vertex line needs 3 coordinates")
                    vertices.append((float(parts[1]), float(parts[2]), float(parts[3])))
                elif tag == "g":
                    if len(parts) != 2:
                        raise ValueError("group line needs exactly one name")
                    group = parts[1]
                elif tag == "f":
                    if len(parts) != 4:
                        raise ValueError("face line needs 3 indices")
                    i, j, k = (int(p) for p in parts[1:])
                    if min(i, j, k) < 1 or max(i, j, k) > len(vertices):
                        raise ValueError("face index out of range")
                    faces.append((i - 1, j - 1, k - 1))
                    face_groups.append(group)
                else:
                    raise ValueError(f"unknown record {tag!r}")
            except ValueError as exc:
                raise ParseError(f"bad mesh record: {exc}", path=path, line=lineno) from None
    if not faces:
        raise ParseError("mesh file contains no faces", path=path)
    return (
        np.asarray(vertices, dtype=np.float64),
        np.asarray(faces, dtype=np.int32),
        face_groups,
    )


def parse_descriptor_text(text: str, path=None) -> AssetDescriptor:
    species = None
    level = None
    material_map: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParseError("descriptor line is not key = value", path=path, line=lineno)
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key == "species":
            species = value
        elif key == "canopy_level":
            level = value
        elif key.startswith("group."):
            if value not in MATERIAL_CODES:
                raise ParseError(f"unknown material {value!r}", path=path, line=lineno)
            material_map[key[len("group.") :]] = value
        else:
            raise ParseError(f"unknown descriptor key {key!r}", path=path, line=lineno)
    if species is None or level is None:
        raise ParseError("descriptor must set species and canopy_level", path=path)
    return AssetDescriptor(species=species, canopy_level=level, material_map=material_map)


def load_descriptor(path) -> AssetDescriptor:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_descriptor_text(fh.read(), path=path)


def read_mesh(path, material_map: dict[str, str]) -> tuple[TriMesh, MeshLoadReport]:
    """Load a mesh file, resolve group materials, drop degenerate triangles.

    Returns the mesh plus a report of what was dropped.  Unreferenced
    vertices are removed so every surviving vertex has adjacent triangles.
    """
    vertices, faces, face_groups = parse_mesh_file(path)
    report = MeshLoadReport()

    unmapped = sorted({g for g in face_groups if g not in material_map})
    if unmapped:
        raise ConfigurationError(
            f"mesh group(s) without material mapping: {', '.join(repr(g) for g in unmapped)}"
        )
    material = np.array([MATERIAL_CODES[material_map[g]] for g in face_groups], dtype=np.uint8)

    areas = _triangle_areas(vertices, faces)
    keep = areas > 0.0
    report.degenerate_dropped = int((~keep).sum())
    faces = faces[keep]
    material = material[keep]
    if len(faces) == 0:
        raise ParseError("all triangles are degenerate", path=path)

    used = np.zeros(len(vertices), dtype=bool)
    used[faces.ravel()] = True
    report.orphan_vertices_dropped = int((~used).sum())
    if report.orphan_vertices_dropped:
        remap = np.cumsum(used) - 1
        vertices = vertices[used]
        faces = remap[faces].astype(np.int32)

    return TriMesh(vertices=vertices, triangles=faces, material=material), report


def _normalize(vertices: np.ndarray) -> np.ndarray:
    """Shift so the lowest vertex sits at z = 0 and the trunk axis at xy = 0.

    The trunk axis is taken as the centroid of the base band (the lowest 5%
    of the height, always including the lowest vertices).
    """
    out = vertices.copy()
    out[:, 2] -= out[:, 2].min()
    zmax = out[:, 2].max()
    band = out[:, 2] <= max(_BASE_BAND * zmax, 0.0) + 1e-12
    out[:, 0] -= out[band, 0].mean()
    out[:, 1] -= out[band, 1].mean()
    return out


def _bounding_radii(mesh: TriMesh) -> tuple[float, float, float]:
    v = mesh.vertices
    base_height = float(v[:, 2].max())
    radial = np.hypot(v[:, 0], v[:, 1])

    tri_mat = mesh.material
    leaf_verts = np.unique(mesh.triangles[tri_mat == LEAF].ravel())
    wood_verts = np.unique(mesh.triangles[tri_mat == WOOD].ravel())

    if len(leaf_verts):
        crown = float(radial[leaf_verts].max())
    else:
        crown = float(radial.max())

    if len(wood_verts):
        band = v[wood_verts, 2] <= max(_BASE_BAND * base_height, 0.0) + 1e-12
        trunk = float(radial[wood_verts][band].max()) if band.any() else float(radial[wood_verts].max())
    else:
        trunk = crown
    return base_height, max(crown, _MIN_RADIUS), max(trunk, _MIN_RADIUS)


def load_asset(path, descriptor: AssetDescriptor, asset_id: str | None = None) -> TreeAsset:
    """Load and normalize a mesh file into a placeable asset."""
    mesh, _report = read_mesh(path, descriptor.material_map)
    mesh = TriMesh(
        vertices=_normalize(mesh.vertices),
        triangles=mesh.triangles,
        material=mesh.material,
    )
    base_height, crown_radius, trunk_radius = _bounding_radii(mesh)
    if base_height <= 0:
        raise ValidationError(f"mesh {path} has zero height")
    return TreeAsset(
        asset_id=asset_id or _default_id_from_path(path, descriptor),
        species=descriptor.species,
        canopy_level=descriptor.canopy_level,
        mesh=mesh,
        base_height=base_height,
        crown_radius=crown_radius,
        trunk_radius=trunk_radius,
    )


def _default_id_from_path(path, descriptor: AssetDescriptor) -> str:
    import os

    stem = os.path.splitext(os.path.basename(str(path)))[0]
    return f"{descriptor.species}_{descriptor.canopy_level}_{stem}"


@dataclass(frozen=True)
class ParametricTreeSpec:
    """Inputs of the built-in tree generator; a pure function of this spec."""

    species: str
    canopy_level: str
    height: float
    crown_shape: str  # "cone" or "ellipsoid"
    crown_radius: float
    crown_base_fraction: float
    leaf_panel_count: int
    rng_seed: int

    def __post_init__(self):
        if self.height <= 0 or self.crown_radius <= 0:
            raise ValidationError("height and crown_radius must be positive")
        if not (0.0 < self.crown_base_fraction < 1.0):
            raise ValidationError("crown_base_fraction must be in (0, 1)")
        if self.leaf_panel_count < 0:
            raise ValidationError("leaf_panel_count must be non-negative")
        if self.crown_shape not in ("cone", "ellipsoid"):
            raise ValidationError(f"unknown crown shape {self.crown_shape!r}")


_TRUNK_SIDES = 12


def _trunk_mesh(height: float, radius: float) -> tuple[list, list]:
    """Closed triangulated cylinder from z=0 to z=height."""
    verts: list[tuple[float, float, float]] = []
    tris: list[tuple[int, int, int]] = []
    n = _TRUNK_SIDES
    for k in range(n):
        a = 2.0 * math.pi * k / n
        verts.append((radius * math.cos(a), radius * math.sin(a), 0.0))
    for k in range(n):
        a = 2.0 * math.pi * k / n
        verts.append((radius * math.cos(a), radius * math.sin(a), height))
    bottom_c = len(verts)
    verts.append((0.0, 0.0, 0.0))
    top_c = len(verts)
    verts.append((0.0, 0.0, height))
    for k in range(n):
        k1 = (k + 1) % n
        tris.append((k, k1, n + k))
        tris.append((k1, n + k1, n + k))
        tris.append((bottom_c, k1, k))
        tris.append((top_c, n + k, n + k1))
    return verts, tris


def make_parametric_tree(spec: ParametricTreeSpec) -> TreeAsset:
    """Generate a tree: wood trunk spanning the full height plus a crown of
    leaf panels whose corners lie exactly on the crown surface."""
    trunk_radius = max(0.02, 0.008 * spec.height)
    verts, tris = _trunk_mesh(spec.height, trunk_radius)
    material = [WOOD] * len(tris)

    n_panels = spec.leaf_panel_count
    if n_panels > 0:
        z_lo = spec.height * spec.crown_base_fraction
        z_hi = spec.height
        crown_h = z_hi - z_lo
        margin = 0.02 * crown_h
        z_c = 0.5 * (z_lo + z_hi)
        c_axis = 0.5 * crown_h

        if spec.crown_shape == "cone":
            def surf_r(z):
                return spec.crown_radius * (z_hi - z) / crown_h
        else:
            def surf_r(z):
                t = (z - z_c) / c_axis
                return spec.crown_radius * math.sqrt(max(0.0, 1.0 - t * t))

        # Lateral extent heuristic: panels roughly tile the crown side area.
        lateral = 2.0 * math.pi * spec.crown_radius * crown_h * 0.5
        side = min(1.5, max(0.15, math.sqrt(lateral / n_panels)))
        golden = (math.sqrt(5.0) - 1.0) / 2.0

        for k in range(n_panels):
            jt = rng.u01(spec.rng_seed, rng.JITTER, k, 0)
            jz = rng.u01(spec.rng_seed, rng.JITTER, k, 1)
            theta = 2.0 * math.pi * (((k + 1) * golden + 0.25 * jt) % 1.0)
            v = (k + 0.5 + 0.5 * (jz - 0.5)) / n_panels
            zc = z_lo + margin + v * (crown_h - 2.0 * margin)
            dz = min(0.5 * side, 0.5 * (crown_h - 2.0 * margin) * 0.9)
            z0 = max(z_lo + margin, zc - dz)
            z1 = min(z_hi - margin, zc + dz)
            if z1 - z0 < 1e-6:
                continue
            r_mid = max(surf_r(0.5 * (z0 + z1)), 1e-3)
            dth = min(0.5 * math.pi, max(1e-3, 0.5 * side / r_mid))

            base = len(verts)
            for zz, tt in ((z0, theta - dth), (z0, theta + dth), (z1, theta + dth), (z1, theta - dth)):
                rr = surf_r(zz)
                verts.append((rr * math.cos(tt), rr * math.sin(tt), zz))
            tris.append((base, base + 1, base + 2))
            tris.append((base, base + 2, base + 3))
            material.extend((LEAF, LEAF))

    mesh = TriMesh(
        vertices=np.asarray(verts, dtype=np.float64),
        triangles=np.asarray(tris, dtype=np.int32),
        material=np.asarray(material, dtype=np.uint8),
    )
    asset_id = (
        f"{spec.species}_{spec.canopy_level}_{spec.crown_shape}"
        f"_h{spec.height:g}_r{spec.crown_radius:g}_s{spec.rng_seed}"
    )
    return TreeAsset(
        asset_id=asset_id,
        species=spec.species,
        canopy_level=spec.canopy_level,
        mesh=mesh,
        base_height=spec.height,
        crown_radius=spec.crown_radius,
        trunk_radius=trunk_radius,
    )
