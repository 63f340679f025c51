"""Virtual UAV laser survey: flight planning, pulse scheduling, ray tracing.

The scanner is modeled as a rotating line scanner: `scan_line_rate` lines per
second, each line holding round(pulse_frequency / scan_line_rate) pulses whose
scan angle sweeps the half-open interval [-fov, +fov) in the plane
perpendicular to the flight direction.  The platform moves continuously, so a
pulse's origin reflects its exact emission time.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._kernels import trace_rays
from .errors import ValidationError
from .geometry import Rect
from .pointcloud import PointCloud, concat_clouds, points_from_arrays
from .voxelgrid import VoxelGrid

PATTERN_PARALLEL = "parallel"
PATTERN_CRISS_CROSS = "criss_cross"

# Pulses per kernel dispatch; fixed so outputs never depend on worker count.
BATCH_PULSES = 1 << 18


@dataclass(frozen=True)
class ScannerConfig:
    pulse_frequency: float = 100_000.0  # Hz
    scan_line_rate: float = 100.0  # lines per second
    fov_half_angle: float = 60.0  # degrees off nadir
    max_returns: int = 15
    max_range: float = 300.0  # meters

    def __post_init__(self):
        if self.pulse_frequency <= 0 or self.scan_line_rate <= 0:
            raise ValidationError("pulse_frequency and scan_line_rate must be positive")
        if not (0.0 < self.fov_half_angle < 90.0):
            raise ValidationError("fov_half_angle must be in (0, 90) degrees")
        if self.max_returns < 1:
            raise ValidationError("max_returns must be >= 1")

    @property
    def pulses_per_line(self) -> int:
        return int(round(self.pulse_frequency / self.scan_line_rate))


@dataclass(frozen=True)
class FlightLeg:
    start: tuple[float, float]
    end: tuple[float, float]
    altitude: float
    speed: float

    @property
    def length(self) -> float:
        return math.hypot(self.end[0] - self.start[0], self.end[1] - self.start[1])

    @property
    def duration(self) -> float:
        return self.length / self.speed

    @property
    def direction(self) -> tuple[float, float]:
        l = self.length
        return ((self.end[0] - self.start[0]) / l, (self.end[1] - self.start[1]) / l)


@dataclass
class FlightPlan:
    legs: list[FlightLeg]
    pattern: str
    spacing: float

    @property
    def total_duration(self) -> float:
        return sum(leg.duration for leg in self.legs)


@dataclass(frozen=True)
class Pulse:
    pulse_index: int
    origin: tuple[float, float, float]
    direction: tuple[float, float, float]
    time: float


def _cross_offsets(size: float, spacing: float) -> list[float]:
    """Offsets 0, s, 2s, ... plus a far-edge leg when size is not a multiple."""
    n = int(math.floor(size / spacing + 1e-9))
    offsets = [k * spacing for k in range(n + 1)]
    remainder = size - n * spacing
    if remainder > 1e-9:
        offsets.append(size)
    return offsets


def plan_flight(
    extent: Rect,
    spacing: float = 20.0,
    altitude: float = 60.0,
    speed: float = 5.0,
    pattern: str = PATTERN_CRISS_CROSS,
) -> FlightPlan:
    """Boustrophedon legs along the extent's long axis, extended one spacing
    past both ends; criss-cross adds the same construction rotated 90 degrees."""
    if extent.area <= 0:
        raise ValidationError("extent area must be positive")
    if spacing <= 0 or altitude <= 0 or speed <= 0:
        raise ValidationError("spacing, altitude and speed must be positive")
    if pattern not in (PATTERN_PARALLEL, PATTERN_CRISS_CROSS):
        raise ValidationError(f"unknown flight pattern {pattern!r}")

    legs: list[FlightLeg] = []

    def add_direction(along_x: bool) -> None:
        if along_x:
            lo, hi = extent.xmin - spacing, extent.xmax + spacing
            cross0, size = extent.ymin, extent.height
        else:
            lo, hi = extent.ymin - spacing, extent.ymax + spacing
            cross0, size = extent.xmin, extent.width
        for k, off in enumerate(_cross_offsets(size, spacing)):
            c = cross0 + off
            a, b = (lo, hi) if k % 2 == 0 else (hi, lo)
            if along_x:
                legs.append(FlightLeg((a, c), (b, c), altitude, speed))
            else:
                legs.append(FlightLeg((c, a), (c, b), altitude, speed))

    along_x_first = extent.width >= extent.height
    add_direction(along_x_first)
    if pattern == PATTERN_CRISS_CROSS:
        add_direction(not along_x_first)
    return FlightPlan(legs=legs, pattern=pattern, spacing=spacing)


def _leg_line_count(leg: FlightLeg, scanner: ScannerConfig) -> int:
    return max(0, int(math.ceil(leg.duration * scanner.scan_line_rate - 1e-9)))


def _leg_pulse_counts(plan: FlightPlan, scanner: ScannerConfig) -> list[int]:
    ppl = scanner.pulses_per_line
    return [_leg_line_count(leg, scanner) * ppl for leg in plan.legs]


def total_pulse_count(plan: FlightPlan, scanner: ScannerConfig) -> int:
    return sum(_leg_pulse_counts(plan, scanner))


def _pulse_arrays(leg, leg_t0, local_idx, scanner):
    """Vectorized origins/directions/times for pulse ordinals within a leg."""
    ppl = scanner.pulses_per_line
    line = local_idx // ppl
    k = local_idx % ppl
    fov = math.radians(scanner.fov_half_angle)
    angle = -fov + k * (2.0 * fov / ppl)
    t_rel = line / scanner.scan_line_rate + k / scanner.pulse_frequency

    fx, fy = leg.direction
    npx, npy = -fy, fx
    along = leg.speed * t_rel
    ox = leg.start[0] + fx * along
    oy = leg.start[1] + fy * along
    oz = np.full(len(local_idx), leg.altitude)

    sin_a = np.sin(angle)
    cos_a = np.cos(angle)
    dx = sin_a * npx
    dy = sin_a * npy
    dz = -cos_a

    origins = np.stack([ox, oy, oz], axis=1)
    dirs = np.stack([dx, dy, dz], axis=1)
    times = leg_t0 + t_rel
    return origins, dirs, times


def iter_pulse_batches(plan: FlightPlan, scanner: ScannerConfig, batch: int = BATCH_PULSES):
    """Yield (first_global_index, origins, dirs, times) in fixed-size batches.

    Batch boundaries depend only on `batch`, never on worker count, so any
    downstream parallel dispatch reassembles into the same global order.
    """
    counts = _leg_pulse_counts(plan, scanner)
    leg_t0 = 0.0
    global_first = 0
    carry: list = []
    carry_n = 0

    def flush(chunks):
        nonlocal global_first
        origins = np.concatenate([c[0] for c in chunks], axis=0)
        dirs = np.concatenate([c[1] for c in chunks], axis=0)
        times = np.concatenate([c[2] for c in chunks])
        first = global_first
        global_first += len(origins)
        return first, origins, dirs, times

    for leg, count in zip(plan.legs, counts):
        produced = 0
        while produced < count:
            take = min(batch - carry_n, count - produced)
            local = np.arange(produced, produced + take, dtype=np.int64)
            carry.append(_pulse_arrays(leg, leg_t0, local, scanner))
            carry_n += take
            produced += take
            if carry_n == batch:
                yield flush(carry)
                carry = []
                carry_n = 0
        leg_t0 += leg.duration
    if carry_n:
        yield flush(carry)


def generate_pulses(plan: FlightPlan, scanner: ScannerConfig):
    """Ordered stream of Pulse records (API convenience; surveys use batches)."""
    for first, origins, dirs, times in iter_pulse_batches(plan, scanner):
        for i in range(len(origins)):
            yield Pulse(
                pulse_index=first + i,
                origin=tuple(origins[i]),
                direction=tuple(dirs[i]),
                time=float(times[i]),
            )


def pulse_by_index(plan: FlightPlan, scanner: ScannerConfig, index: int) -> Pulse:
    """Reconstruct one pulse by its global index (pure arithmetic)."""
    counts = _leg_pulse_counts(plan, scanner)
    if index < 0 or index >= sum(counts):
        raise ValidationError(f"pulse index {index} out of range")
    leg_t0 = 0.0
    remaining = index
    for leg, count in zip(plan.legs, counts):
        if remaining < count:
            local = np.asarray([remaining], dtype=np.int64)
            origins, dirs, times = _pulse_arrays(leg, leg_t0, local, scanner)
            return Pulse(index, tuple(origins[0]), tuple(dirs[0]), float(times[0]))
        remaining -= count
        leg_t0 += leg.duration
    raise AssertionError("unreachable")


@dataclass
class SurveyStats:
    pulse_count: int
    point_count: int
    extent: Rect
    mean_density: float  # points inside the extent per square meter
    points_in_extent: int
    backend: str = ""

    def as_dict(self) -> dict:
        return {
            "pulse_count": self.pulse_count,
            "point_count": self.point_count,
            "points_in_extent": self.points_in_extent,
            "mean_density_pts_m2": round(self.mean_density, 3),
            "extent": f"{self.extent.xmin} {self.extent.ymin} {self.extent.xmax} {self.extent.ymax}",
            "backend": self.backend,
        }


def trace_pulse(pulse: Pulse, grid: VoxelGrid, survey_seed: int, scanner: ScannerConfig | None = None):
    """Trace a single pulse; returns the structured point records."""
    scanner = scanner or ScannerConfig()
    cell, opac, inst, sem = grid.dense_attr()
    pos, instance, semantic, retnum, pidx, times = trace_rays(
        np.ascontiguousarray([pulse.origin], dtype=np.float64),
        np.ascontiguousarray([pulse.direction], dtype=np.float64),
        np.asarray([pulse.pulse_index], dtype=np.int64),
        np.asarray([pulse.time], dtype=np.float64),
        grid.origin,
        grid.voxel_size,
        grid.dims,
        cell,
        opac,
        inst,
        sem,
        survey_seed,
        scanner.max_returns,
        scanner.max_range,
    )
    return points_from_arrays(pos, instance, semantic, retnum, pidx, times)


def run_survey(
    grid: VoxelGrid,
    plan: FlightPlan,
    scanner: ScannerConfig,
    survey_seed: int,
    extent: Rect | None = None,
    workers: int = 1,
    clip: bool = True,
) -> tuple[PointCloud, SurveyStats]:
    """Trace every planned pulse through the grid.

    Output is ordered by pulse index then return number and is identical for
    any `workers` value (fixed batches, keyed randomness).  With `clip` the
    returned cloud keeps only points inside the extent (the labeled region);
    the stats count both the full emission and the in-extent subset.
    """
    from ._kernels import backend_name

    cell, opac, inst, sem = grid.dense_attr()

    def run_batch(batch):
        _first, origins, dirs, times = batch
        n = len(origins)
        pidx = np.arange(_first, _first + n, dtype=np.int64)
        return trace_rays(
            origins,
            dirs,
            pidx,
            times,
            grid.origin,
            grid.voxel_size,
            grid.dims,
            cell,
            opac,
            inst,
            sem,
            survey_seed,
            scanner.max_returns,
            scanner.max_range,
        )

    batches = iter_pulse_batches(plan, scanner)
    results = []
    pulse_total = 0
    if workers <= 1:
        for batch in batches:
            pulse_total += len(batch[1])
            results.append(run_batch(batch))
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = []
            for batch in batches:
                pulse_total += len(batch[1])
                futures.append(pool.submit(run_batch, batch))
            results = [f.result() for f in futures]

    parts = []
    for pos, instance, semantic, retnum, pidx, times in results:
        parts.append(
            PointCloud(points_from_arrays(pos, instance, semantic, retnum, pidx, times))
        )
    if extent is None:
        e = grid.origin
        extent = Rect(
            float(e[0]),
            float(e[1]),
            float(e[0] + grid.dims[0] * grid.voxel_size),
            float(e[1] + grid.dims[1] * grid.voxel_size),
        )
    cloud = concat_clouds(parts, extent=None)
    emitted = len(cloud)
    in_mask = (
        extent.contains(cloud.points["x"], cloud.points["y"]) if emitted else np.zeros(0, bool)
    )
    inside = int(np.count_nonzero(in_mask))
    if clip:
        cloud = PointCloud(cloud.points[in_mask].copy(), extent=extent)
    stats = SurveyStats(
        pulse_count=pulse_total,
        point_count=emitted,
        extent=extent,
        mean_density=inside / extent.area if extent.area > 0 else 0.0,
        points_in_extent=inside,
        backend=backend_name(),
    )
    return cloud, stats
