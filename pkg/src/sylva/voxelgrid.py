"""Scene voxelization: the attributed sparse grid that rays are cast through.

Grid convention: the lattice is anchored at the scene extent's min corner in
xy; in z the origin sits half a voxel below the lowest terrain point, so the
ground voxel straddles the surface and mesh geometry resting on the ground
never lands on a voxel boundary.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from ._kernels import voxelize_triangles
from .assets import AssetLibrary, TreeAsset, TriMesh
from .errors import ParseError, ValidationError
from .geometry import yaw_matrix
from .labels import GROUND, LEAF, WOOD
from .procgen import ForestScene, TreeInstance

DEFAULT_VOXEL_SIZE = 0.1
DEFAULT_OPACITY = {GROUND: 1.0, WOOD: 1.0, LEAF: 0.35}

_KEY_MASK = (1 << 21) - 1


@dataclass(frozen=True)
class VoxelAttr:
    instance_id: int
    semantic: int
    opacity: float


class VoxelGrid:
    """Sparse voxel grid stored as parallel arrays keyed by packed coordinates.

    `coords` rows are (ix, iy, iz) with 0 <= i < dims; attributes align with
    rows.  A dense int32 attribute-index volume is materialized lazily for
    the ray tracer and cached.
    """

    def __init__(self, origin, voxel_size, dims, coords, instance, semantic, opacity):
        self.origin = np.asarray(origin, dtype=np.float64)
        self.voxel_size = float(voxel_size)
        self.dims = np.asarray(dims, dtype=np.int64)
        self.coords = np.asarray(coords, dtype=np.int64).reshape(-1, 3)
        self.instance = np.asarray(instance, dtype=np.uint32)
        self.semantic = np.asarray(semantic, dtype=np.uint8)
        self.opacity = np.asarray(opacity, dtype=np.float64)
        if self.voxel_size <= 0:
            raise ValidationError("voxel_size must be positive")
        if len(self.coords) and (
            (self.coords < 0).any() or (self.coords >= self.dims[None, :]).any()
        ):
            raise ValidationError("occupied voxel outside grid dims")
        self._dense = None
        self._lookup = None

    def __len__(self) -> int:
        return len(self.coords)

    def get(self, ijk) -> VoxelAttr | None:
        if self._lookup is None:
            keys = (self.coords[:, 0] << 42) | (self.coords[:, 1] << 21) | self.coords[:, 2]
            self._lookup = {int(k): i for i, k in enumerate(keys)}
        key = (int(ijk[0]) << 42) | (int(ijk[1]) << 21) | int(ijk[2])
        row = self._lookup.get(key)
        if row is None:
            return None
        return VoxelAttr(int(self.instance[row]), int(self.semantic[row]), float(self.opacity[row]))

    def items(self):
        for row in range(len(self.coords)):
            yield (
                tuple(int(c) for c in self.coords[row]),
                VoxelAttr(int(self.instance[row]), int(self.semantic[row]), float(self.opacity[row])),
            )

    def voxel_of(self, point) -> tuple[int, int, int]:
        p = (np.asarray(point, dtype=np.float64) - self.origin) / self.voxel_size
        return tuple(int(v) for v in np.floor(p).astype(np.int64))

    def voxel_bounds(self, ijk) -> tuple[np.ndarray, np.ndarray]:
        lo = self.origin + np.asarray(ijk, dtype=np.float64) * self.voxel_size
        return lo, lo + self.voxel_size

    def dense_attr(self):
        """(dense int32 index volume, opacity, instance, semantic tables)."""
        if self._dense is None:
            cell = np.full(tuple(int(d) for d in self.dims), -1, dtype=np.int32)
            if len(self.coords):
                cell[self.coords[:, 0], self.coords[:, 1], self.coords[:, 2]] = np.arange(
                    len(self.coords), dtype=np.int32
                )
            self._dense = cell
        return self._dense, self.opacity, self.instance, self.semantic

    def memory_note(self) -> str:
        dense_mb = 4 * int(np.prod(self.dims)) / 2**20
        return f"{len(self)} occupied voxels, dense index {dense_mb:.0f} MiB"


def transform_instance(asset: TreeAsset, instance: TreeInstance) -> TriMesh:
    """World-space triangles of a placed asset: rotate by yaw, scale, translate."""
    if instance.scale <= 0:
        raise ValidationError("instance scale must be positive")
    r = yaw_matrix(instance.yaw)
    verts = (asset.mesh.vertices * instance.scale) @ r.T
    verts = verts + np.array([instance.x, instance.y, instance.z])
    return TriMesh(vertices=verts, triangles=asset.mesh.triangles, material=asset.mesh.material)


def _grid_frame(scene: ForestScene, world_lo, world_hi, voxel_size):
    """Anchor the lattice at the extent min corner; z half a voxel under ground."""
    vs = voxel_size
    e = scene.extent
    terrain_zmin = scene.terrain.zmin if hasattr(scene.terrain, "zmin") else 0.0
    terrain_zmax = scene.terrain.zmax if hasattr(scene.terrain, "zmax") else 0.0
    oz = terrain_zmin - 0.5 * vs

    ox = e.xmin
    if world_lo[0] < ox:
        ox -= vs * math.ceil((ox - world_lo[0]) / vs)
    oy = e.ymin
    if world_lo[1] < oy:
        oy -= vs * math.ceil((oy - world_lo[1]) / vs)

    hi_x = max(e.xmax, world_hi[0])
    hi_y = max(e.ymax, world_hi[1])
    hi_z = max(world_hi[2], terrain_zmax) + 0.5 * vs

    nx = int(math.ceil((hi_x - ox) / vs - 1e-9))
    ny = int(math.ceil((hi_y - oy) / vs - 1e-9))
    nz = int(math.ceil((hi_z - oz) / vs - 1e-9))
    return np.array([ox, oy, oz]), np.array([max(nx, 1), max(ny, 1), max(nz, 1)], dtype=np.int64)


def voxelize_scene(
    scene: ForestScene,
    library: AssetLibrary,
    voxel_size: float = DEFAULT_VOXEL_SIZE,
    opacity_table: dict[int, float] | None = None,
) -> VoxelGrid:
    """Rasterize every placed instance conservatively into an attributed grid.

    Conflicts resolve to a single winning triangle per voxel ordered by
    (wood before leaf, nearest triangle centroid, smaller instance id,
    triangle ordinal); the terrain contributes a one-voxel ground layer
    wherever nothing else claimed the voxel.
    """
    if voxel_size <= 0:
        raise ValidationError("voxel_size must be positive")
    opacity = dict(DEFAULT_OPACITY)
    if opacity_table:
        opacity.update(opacity_table)
    for sem, op in opacity.items():
        if not (0.0 <= op <= 1.0):
            raise ValidationError(f"opacity for semantic {sem} outside [0, 1]")

    meshes = []
    world_lo = np.array([np.inf, np.inf, np.inf])
    world_hi = -world_lo
    for inst in scene.instances:
        asset = library.get(inst.asset_id)
        mesh = transform_instance(asset, inst)
        meshes.append((inst, mesh))
        world_lo = np.minimum(world_lo, mesh.vertices.min(axis=0))
        world_hi = np.maximum(world_hi, mesh.vertices.max(axis=0))
    if not meshes:
        world_lo = np.zeros(3)
        world_hi = np.zeros(3)

    origin, dims = _grid_frame(scene, world_lo, world_hi, voxel_size)

    keys_all, mat_all, dist_all, inst_all = [], [], [], []
    for inst, mesh in meshes:
        keys, mats, dists, _tris = voxelize_triangles(
            np.ascontiguousarray(mesh.vertices),
            np.ascontiguousarray(mesh.triangles),
            mesh.material,
            origin,
            voxel_size,
            dims,
        )
        if len(keys):
            keys_all.append(keys)
            mat_all.append(mats)
            dist_all.append(dists)
            inst_all.append(np.full(len(keys), inst.instance_id, dtype=np.int64))

    if keys_all:
        keys = np.concatenate(keys_all)
        mats = np.concatenate(mat_all)
        dists = np.concatenate(dist_all)
        insts = np.concatenate(inst_all)
        # Wood outranks leaf; then nearest centroid, smaller id, stable ordinal.
        mat_rank = (mats != WOOD).astype(np.int8)
        order = np.lexsort((insts, dists, mat_rank, keys))
        keys = keys[order]
        first = np.ones(len(keys), dtype=bool)
        first[1:] = keys[1:] != keys[:-1]
        win = order[first]
        win_keys = keys[first]
        occ_coords = np.stack(
            [win_keys >> 42, (win_keys >> 21) & _KEY_MASK, win_keys & _KEY_MASK], axis=1
        )
        occ_inst = insts[win].astype(np.uint32)
        occ_sem = np.where(mats[win] == WOOD, WOOD, LEAF).astype(np.uint8)
    else:
        win_keys = np.empty(0, dtype=np.int64)
        occ_coords = np.empty((0, 3), dtype=np.int64)
        occ_inst = np.empty(0, dtype=np.uint32)
        occ_sem = np.empty(0, dtype=np.uint8)

    # Ground layer across the extent, one voxel per column at the surface.
    e = scene.extent
    gx0 = int(math.floor((e.xmin - origin[0]) / voxel_size + 1e-9))
    gy0 = int(math.floor((e.ymin - origin[1]) / voxel_size + 1e-9))
    gnx = int(math.ceil(e.width / voxel_size - 1e-9))
    gny = int(math.ceil(e.height / voxel_size - 1e-9))
    gx, gy = np.meshgrid(
        np.arange(gx0, gx0 + gnx), np.arange(gy0, gy0 + gny), indexing="ij"
    )
    gx = gx.ravel()
    gy = gy.ravel()
    cx = origin[0] + (gx + 0.5) * voxel_size
    cy = origin[1] + (gy + 0.5) * voxel_size
    gz_h = scene.terrain.height_at(cx, cy) if hasattr(scene.terrain, "height_at") else np.zeros(len(gx))
    gz = np.floor((np.asarray(gz_h, dtype=np.float64) - origin[2]) / voxel_size).astype(np.int64)
    gz = np.clip(gz, 0, dims[2] - 1)
    gkeys = (gx.astype(np.int64) << 42) | (gy.astype(np.int64) << 21) | gz
    vacant = ~np.isin(gkeys, win_keys)
    gkeys = gkeys[vacant]

    coords = np.concatenate(
        [occ_coords, np.stack([gkeys >> 42, (gkeys >> 21) & _KEY_MASK, gkeys & _KEY_MASK], axis=1)]
    )
    instance = np.concatenate([occ_inst, np.zeros(len(gkeys), dtype=np.uint32)])
    semantic = np.concatenate([occ_sem, np.full(len(gkeys), GROUND, dtype=np.uint8)])

    all_keys = (coords[:, 0] << 42) | (coords[:, 1] << 21) | coords[:, 2]
    order = np.argsort(all_keys, kind="stable")
    coords = coords[order]
    instance = instance[order]
    semantic = semantic[order]
    opac = np.array([opacity.get(int(s), 1.0) for s in (GROUND, WOOD, LEAF)])[semantic]

    return VoxelGrid(origin, voxel_size, dims, coords, instance, semantic, opac)


# Binary grid dump for debugging and cross-language inspection.

_GRID_MAGIC = b"SVXG"
_GRID_HEADER = struct.Struct("<4sd3d3iQ")
_GRID_RECORD = struct.Struct("<3iIBf")


def write_grid(grid: VoxelGrid, path) -> None:
    with open(path, "wb") as fh:
        fh.write(
            _GRID_HEADER.pack(
                _GRID_MAGIC,
                grid.voxel_size,
                *grid.origin,
                *(int(d) for d in grid.dims),
                len(grid),
            )
        )
        for row in range(len(grid)):
            fh.write(
                _GRID_RECORD.pack(
                    *(int(c) for c in grid.coords[row]),
                    int(grid.instance[row]),
                    int(grid.semantic[row]),
                    float(grid.opacity[row]),
                )
            )


def read_grid(path) -> VoxelGrid:
    with open(path, "rb") as fh:
        head = fh.read(_GRID_HEADER.size)
        if len(head) < _GRID_HEADER.size:
            raise ParseError("truncated grid header", path=path, offset=len(head))
        magic, vs, ox, oy, oz, nx, ny, nz, count = _GRID_HEADER.unpack(head)
        if magic != _GRID_MAGIC:
            raise ParseError("bad grid magic", path=path, offset=0)
        body = fh.read(count * _GRID_RECORD.size)
        if len(body) < count * _GRID_RECORD.size:
            raise ParseError(
                "truncated grid body", path=path, offset=_GRID_HEADER.size + len(body)
            )
    coords = np.empty((count, 3), dtype=np.int64)
    instance = np.empty(count, dtype=np.uint32)
    semantic = np.empty(count, dtype=np.uint8)
    opac = np.empty(count, dtype=np.float64)
    for i in range(count):
        x, y, z, inst, sem, op = _GRID_RECORD.unpack_from(body, i * _GRID_RECORD.size)
        coords[i] = (x, y, z)
        instance[i] = inst
        semantic[i] = sem
        opac[i] = op
    return VoxelGrid((ox, oy, oz), vs, (nx, ny, nz), coords, instance, semantic, opac)
