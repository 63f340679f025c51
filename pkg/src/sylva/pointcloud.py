"""Labeled point clouds and their two serialized forms.

Binary (lossless): magic "SVPC", version u16, count u64, then packed
little-endian records {f64 x,y,z; u32 instance; u8 semantic; u8 return;
i64 pulse; f64 time} (46 bytes).  ASCII (# sylva-pc v1): `x y z instance
semantic return` with positions to 6 decimals; pulse/time are not carried.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError
from .geometry import Rect

POINT_DTYPE = np.dtype(
    [
        ("x", "<f8"),
        ("y", "<f8"),
        ("z", "<f8"),
        ("instance", "<u4"),
        ("semantic", "u1"),
        ("return_number", "u1"),
        ("pulse", "<i8"),
        ("time", "<f8"),
    ]
)
assert POINT_DTYPE.itemsize == 46

PROVENANCE_SIMULATED = "simulated"
PROVENANCE_NODAL = "nodal"


@dataclass
class PointCloud:
    points: np.ndarray  # structured POINT_DTYPE
    extent: Rect | None = None
    provenance: str = PROVENANCE_SIMULATED

    def __post_init__(self):
        if self.points.dtype != POINT_DTYPE:
            raise ValueError("points must use POINT_DTYPE")
        if self.extent is None and len(self.points):
            self.extent = Rect(
                float(self.points["x"].min()),
                float(self.points["y"].min()),
                float(self.points["x"].max()),
                float(self.points["y"].max()),
            )

    def __len__(self) -> int:
        return len(self.points)

    @property
    def xy(self) -> np.ndarray:
        return np.stack([self.points["x"], self.points["y"]], axis=1)

    @property
    def xyz(self) -> np.ndarray:
        return np.stack([self.points["x"], self.points["y"], self.points["z"]], axis=1)

    def select(self, mask) -> "PointCloud":
        return PointCloud(self.points[mask].copy(), extent=None, provenance=self.provenance)


def make_points(n: int) -> np.ndarray:
    return np.zeros(n, dtype=POINT_DTYPE)


def points_from_arrays(pos, instance, semantic, return_number, pulse, time) -> np.ndarray:
    pts = np.empty(len(pos), dtype=POINT_DTYPE)
    pos = np.asarray(pos)
    pts["x"] = pos[:, 0]
    pts["y"] = pos[:, 1]
    pts["z"] = pos[:, 2]
    pts["instance"] = instance
    pts["semantic"] = semantic
    pts["return_number"] = return_number
    pts["pulse"] = pulse
    pts["time"] = time
    return pts


def concat_clouds(clouds, extent=None, provenance=PROVENANCE_SIMULATED) -> PointCloud:
    arrays = [c.points for c in clouds]
    merged = np.concatenate(arrays) if arrays else make_points(0)
    return PointCloud(merged, extent=extent, provenance=provenance)


_BIN_MAGIC = b"SVPC"
_BIN_HEADER = struct.Struct("<4sHQ")
_BIN_VERSION = 1
_ASCII_MAGIC = "# sylva-pc v1"


def write_cloud(cloud: PointCloud, path, fmt: str = "binary") -> None:
    if fmt == "binary":
        with open(path, "wb") as fh:
            fh.write(_BIN_HEADER.pack(_BIN_MAGIC, _BIN_VERSION, len(cloud.points)))
            fh.write(cloud.points.tobytes())
    elif fmt == "ascii":
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(_ASCII_MAGIC + "\n")
            p = cloud.points
            for i in range(len(p)):
                fh.write(
                    f"{p['x'][i]:.6f} {p['y'][i]:.6f} {p['z'][i]:.6f} "
                    f"{p['instance'][i]} {p['semantic'][i]} {p['return_number'][i]}\n"
                )
    else:
        raise ValueError(f"unknown cloud format {fmt!r}")


def _infer_provenance(points: np.ndarray) -> str:
    if len(points) and (points["pulse"] == -1).all():
        return PROVENANCE_NODAL
    return PROVENANCE_SIMULATED


def read_cloud(path) -> PointCloud:
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == _BIN_MAGIC:
        return _read_binary(path)
    return _read_ascii(path)


def _read_binary(path) -> PointCloud:
    with open(path, "rb") as fh:
        head = fh.read(_BIN_HEADER.size)
        if len(head) < _BIN_HEADER.size:
            raise ParseError("truncated header", path=path, offset=len(head))
        magic, version, count = _BIN_HEADER.unpack(head)
        if magic != _BIN_MAGIC:
            raise ParseError("bad magic", path=path, offset=0)
        if version != _BIN_VERSION:
            raise ParseError(f"unsupported version {version}", path=path, offset=4)
        body = fh.read(count * POINT_DTYPE.itemsize + 1)
    if len(body) != count * POINT_DTYPE.itemsize:
        raise ParseError(
            "point record block has wrong length",
            path=path,
            offset=_BIN_HEADER.size + min(len(body), count * POINT_DTYPE.itemsize),
        )
    points = np.frombuffer(body, dtype=POINT_DTYPE).copy()
    return PointCloud(points, provenance=_infer_provenance(points))


def _read_ascii(path) -> PointCloud:
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline().rstrip("\n")
        if first != _ASCII_MAGIC:
            raise ParseError("not a point-cloud file (bad or missing header)", path=path, line=1)
        rows = []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 6:
                raise ParseError("point row needs 6 fields", path=path, line=lineno)
            try:
                rows.append(
                    (
                        float(parts[0]),
                        float(parts[1]),
                        float(parts[2]),
                        int(parts[3]),
                        int(parts[4]),
                        int(parts[5]),
                    )
                )
            except ValueError as exc:
                raise ParseError(f"bad point row: {exc}", path=path, line=lineno) from None
    points = make_points(len(rows))
    for i, (x, y, z, inst, sem, ret) in enumerate(rows):
        points[i] = (x, y, z, inst, sem, ret, -1, 0.0)
    return PointCloud(points, provenance=_infer_provenance(points))
