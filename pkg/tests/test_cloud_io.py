import numpy as np
import pytest

from sylva.errors import ParseError
from sylva.pointcloud import (
    POINT_DTYPE,
    PointCloud,
    make_points,
    read_cloud,
    write_cloud,
)

from .conftest import assert_clouds_bitwise_equal


def _cloud(n=100, seed=0):
    rng = np.random.default_rng(seed)
    pts = make_points(n)
    pts["x"] = rng.uniform(0, 50, n)
    pts["y"] = rng.uniform(0, 50, n)
    pts["z"] = rng.uniform(0, 30, n)
    pts["instance"] = rng.integers(0, 40, n)
    pts["semantic"] = rng.integers(0, 3, n)
    pts["return_number"] = rng.integers(1, 16, n)
    pts["pulse"] = rng.integers(0, 10_000_000, n)
    pts["time"] = rng.uniform(0, 100, n)
    return PointCloud(pts)


def test_record_layout_is_packed_little_endian():
    assert POINT_DTYPE.itemsize == 46
    offsets = [POINT_DTYPE.fields[name][1] for name in POINT_DTYPE.names]
    assert offsets == [0, 8, 16, 24, 28, 29, 30, 38]


def test_binary_roundtrip_bitwise(tmp_path):
    cloud = _cloud(512)
    path = tmp_path / "c.svpc"
    write_cloud(cloud, path, fmt="binary")
    loaded = read_cloud(path)
    assert_clouds_bitwise_equal(cloud, loaded)


def test_ascii_format_line(tmp_path):
    pts = make_points(1)
    pts[0] = (12.345678, 0.1, 3.0, 42, 2, 1, 77, 1.5)
    path = tmp_path / "c.txt"
    write_cloud(PointCloud(pts), path, fmt="ascii")
    lines = path.read_text().splitlines()
    assert lines[0] == "# sylva-pc v1"
    assert lines[1] == "12.345678 0.100000 3.000000 42 2 1"


def test_ascii_roundtrip_labels_exact_positions_6dp(tmp_path):
    cloud = _cloud(64, seed=3)
    path = tmp_path / "c.txt"
    write_cloud(cloud, path, fmt="ascii")
    loaded = read_cloud(path)
    assert np.array_equal(loaded.points["instance"], cloud.points["instance"])
    assert np.array_equal(loaded.points["semantic"], cloud.points["semantic"])
    assert np.array_equal(loaded.points["return_number"], cloud.points["return_number"])
    assert np.allclose(loaded.points["x"], cloud.points["x"], atol=5e-7)
    assert np.allclose(loaded.points["z"], cloud.points["z"], atol=5e-7)
    assert (loaded.points["pulse"] == -1).all()


def test_truncated_binary_rejected_with_offset(tmp_path):
    cloud = _cloud(100)
    path = tmp_path / "c.svpc"
    write_cloud(cloud, path, fmt="binary")
    data = path.read_bytes()
    trunc = tmp_path / "t.svpc"
    trunc.write_bytes(data[: len(data) - 17])
    with pytest.raises(ParseError, match="byte"):
        read_cloud(trunc)


def test_corrupt_magic_rejected(tmp_path):
    path = tmp_path / "c.svpc"
    path.write_bytes(b"NOPE" + b"\x00" * 64)
    with pytest.raises(ParseError):
        read_cloud(path)


def test_empty_cloud_roundtrip(tmp_path):
    cloud = PointCloud(make_points(0))
    path = tmp_path / "e.svpc"
    write_cloud(cloud, path, fmt="binary")
    loaded = read_cloud(path)
    assert len(loaded) == 0


def test_extent_recomputed_on_read(tmp_path):
    cloud = _cloud(32, seed=5)
    path = tmp_path / "c.svpc"
    write_cloud(cloud, path, fmt="binary")
    loaded = read_cloud(path)
    assert loaded.extent.xmin == pytest.approx(float(cloud.points["x"].min()))
    assert loaded.extent.ymax == pytest.approx(float(cloud.points["y"].max()))
