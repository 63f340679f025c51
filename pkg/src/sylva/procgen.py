"""Procedural forest generation: iterative seed spawning, dispersal and pruning.

Each simulation step runs, in order: spawn, attribute assignment, shade
pruning of new seedlings, collision pruning, aging.  All randomness comes
from the counter-based stream keyed by the scene seed, so a scene is a pure
function of (extent, generators, library, rng_seed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from . import rng
from .assets import AssetLibrary
from .errors import ConfigurationError, ParseError, ValidationError
from .geometry import FlatTerrain, Rect


@dataclass(frozen=True)
class FoliageGeneratorParams:
    """One canopy layer's spawning and competition parameters.

    ``assets`` maps asset ids to selection weights.  Radii are meters and
    scale linearly with the instance scale drawn from ``procedural_scale``.
    ``initial_seed_density`` is seeds per 10 m line: a density d places
    round(d^2 * area / 100 m^2) step-0 seeds.
    """

    name: str
    assets: tuple[tuple[str, float], ...]
    initial_seed_density: float
    collision_radius: float
    shade_radius: float
    procedural_scale: tuple[float, float]
    average_spread_distance: float
    spread_variance: float  # standard deviation of the dispersal distance
    num_steps: int
    max_age: int
    can_grow_in_shade: bool = False

    def __post_init__(self):
        lo, hi = self.procedural_scale
        if self.initial_seed_density < 0:
            raise ValidationError(f"{self.name}: initial_seed_density must be >= 0")
        if self.collision_radius <= 0:
            raise ValidationError(f"{self.name}: collision_radius must be > 0")
        if self.shade_radius < 0:
            raise ValidationError(f"{self.name}: shade_radius must be >= 0")
        if not (0 < lo <= hi):
            raise ValidationError(f"{self.name}: bad procedural_scale {self.procedural_scale}")
        if self.num_steps < 1 or self.max_age < 1:
            raise ValidationError(f"{self.name}: num_steps and max_age must be >= 1")
        if self.spread_variance < 0:
            raise ValidationError(f"{self.name}: spread_variance must be >= 0")


@dataclass
class TreeInstance:
    instance_id: int
    asset_id: str
    x: float
    y: float
    z: float
    scale: float
    yaw: float
    age: int
    generator: str


@dataclass
class ForestScene:
    extent: Rect
    generators: list[FoliageGeneratorParams]
    instances: list[TreeInstance]
    rng_seed: int
    terrain: object = field(default_factory=FlatTerrain)


def initial_seed_count(density: float, area_m2: float) -> int:
    """Seeds per 10 m line squared per 10 m x 10 m cell, scaled to the area."""
    return int(round(density * density * area_m2 / 100.0))


def _scaled_cr(inst: TreeInstance, gen: FoliageGeneratorParams) -> float:
    return gen.collision_radius * inst.scale


class _CellIndex:
    """Uniform-grid neighbor index over instance positions."""

    def __init__(self, cell: float):
        self.cell = max(cell, 1e-9)
        self.cells: dict[tuple[int, int], list[int]] = {}

    def key(self, x: float, y: float) -> tuple[int, int]:
        return (int(math.floor(x / self.cell)), int(math.floor(y / self.cell)))

    def add(self, idx: int, x: float, y: float) -> None:
        self.cells.setdefault(self.key(x, y), []).append(idx)

    def neighbors(self, x: float, y: float, radius: float):
        r_cells = int(math.ceil(radius / self.cell))
        kx, ky = self.key(x, y)
        for cx in range(kx - r_cells, kx + r_cells + 1):
            for cy in range(ky - r_cells, ky + r_cells + 1):
                yield from self.cells.get((cx, cy), ())


def resolve_collisions(
    instances: list[TreeInstance], gen_of: dict[str, FoliageGeneratorParams]
) -> list[TreeInstance]:
    """Greedy collision thinning in priority order.

    Priority: larger scaled collision radius, then greater age, then smaller
    instance id.  An instance survives iff it clears every surviving superior,
    so the returned set is collision free and deterministic.
    """
    if len(instances) <= 1:
        return list(instances)
    radii = [_scaled_cr(inst, gen_of[inst.generator]) for inst in instances]
    order = sorted(
        range(len(instances)),
        key=lambda i: (-radii[i], -instances[i].age, instances[i].instance_id),
    )
    max_r = max(radii)
    index = _CellIndex(cell=2.0 * max_r)
    kept: list[int] = []
    for i in order:
        inst = instances[i]
        ok = True
        for j in index.neighbors(inst.x, inst.y, radii[i] + max_r):
            other = instances[j]
            if math.hypot(inst.x - other.x, inst.y - other.y) < radii[i] + radii[j]:
                ok = False
                break
        if ok:
            index.add(i, inst.x, inst.y)
            kept.append(i)
    kept.sort()
    return [instances[i] for i in kept]


def _prune_shade(
    instances: list[TreeInstance], gen_of: dict[str, FoliageGeneratorParams]
) -> list[TreeInstance]:
    """Remove shade-intolerant seedlings under any elder's scaled shade radius."""
    elders = [inst for inst in instances if inst.age >= 1]
    if not elders:
        return list(instances)
    shade_r = [gen_of[e.generator].shade_radius * e.scale for e in elders]
    max_r = max(shade_r)
    if max_r <= 0:
        return list(instances)
    index = _CellIndex(cell=max_r)
    for k, e in enumerate(elders):
        index.add(k, e.x, e.y)
    out = []
    for inst in instances:
        if inst.age == 0 and not gen_of[inst.generator].can_grow_in_shade:
            shaded = False
            for k in index.neighbors(inst.x, inst.y, max_r):
                e = elders[k]
                if math.hypot(inst.x - e.x, inst.y - e.y) < shade_r[k]:
                    shaded = True
                    break
            if shaded:
                continue
        out.append(inst)
    return out


def generate_forest(
    extent: Rect,
    generators: list[FoliageGeneratorParams],
    library: AssetLibrary,
    rng_seed: int,
    terrain=None,
) -> ForestScene:
    """Run the spawn/spread/prune/age simulation and return the final scene."""
    if extent.area <= 0:
        raise ValidationError("extent area must be positive")
    for gen in generators:
        for asset_id, weight in gen.assets:
            if asset_id not in library:
                raise ConfigurationError(
                    f"generator {gen.name!r} references unknown asset {asset_id!r}"
                )
            if weight <= 0:
                raise ConfigurationError(f"generator {gen.name!r}: weight for {asset_id!r} must be > 0")
    names = [g.name for g in generators]
    if len(set(names)) != len(names):
        raise ConfigurationError("generator names must be unique")
    gen_of = {g.name: g for g in generators}
    terrain = terrain if terrain is not None else FlatTerrain()

    def assign(inst_id: int, gen: FoliageGeneratorParams, x: float, y: float) -> TreeInstance:
        lo, hi = gen.procedural_scale
        scale = lo + rng.u01(rng_seed, rng.SCALE, inst_id) * (hi - lo)
        yaw = 2.0 * math.pi * rng.u01(rng_seed, rng.YAW, inst_id)
        total = sum(w for _, w in gen.assets)
        pick = rng.u01(rng_seed, rng.ASSET, inst_id) * total
        acc = 0.0
        asset_id = gen.assets[-1][0]
        for aid, w in gen.assets:
            acc += w
            if pick < acc:
                asset_id = aid
                break
        return TreeInstance(
            instance_id=inst_id,
            asset_id=asset_id,
            x=x,
            y=y,
            z=float(terrain.height_at(x, y)),
            scale=scale,
            yaw=yaw,
            age=0,
            generator=gen.name,
        )

    instances: list[TreeInstance] = []
    next_id = 1
    total_steps = max((g.num_steps for g in generators), default=0)

    for step in range(total_steps):
        new: list[TreeInstance] = []
        if step == 0:
            for gi, gen in enumerate(generators):
                count = initial_seed_count(gen.initial_seed_density, extent.area)
                for k in range(count):
                    x = extent.xmin + rng.u01(rng_seed, rng.SPAWN, step, gi, k, 0) * extent.width
                    y = extent.ymin + rng.u01(rng_seed, rng.SPAWN, step, gi, k, 1) * extent.height
                    new.append(assign(next_id, gen, x, y))
                    next_id += 1
        else:
            # Offspring grouped by generator declaration order, parents by id.
            for gen in generators:
                if step >= gen.num_steps:
                    continue
                parents = [i for i in instances if i.generator == gen.name]
                for parent in parents:
                    dist = max(
                        0.0,
                        rng.normal(
                            gen.average_spread_distance,
                            gen.spread_variance,
                            rng_seed,
                            rng.SPREAD,
                            step,
                            parent.instance_id,
                        ),
                    )
                    ang = 2.0 * math.pi * rng.u01(
                        rng_seed, rng.SPREAD, step, parent.instance_id, 2
                    )
                    x = parent.x + dist * math.cos(ang)
                    y = parent.y + dist * math.sin(ang)
                    if not extent.contains(x, y):
                        continue
                    new.append(assign(next_id, gen, x, y))
                    next_id += 1

        population = instances + new
        population = _prune_shade(population, gen_of)
        population = resolve_collisions(population, gen_of)

        aged: list[TreeInstance] = []
        for inst in population:
            inst = replace(inst, age=inst.age + 1)
            if inst.age <= gen_of[inst.generator].max_age:
                aged.append(inst)
        instances = aged

    return ForestScene(
        extent=extent,
        generators=list(generators),
        instances=instances,
        rng_seed=rng_seed,
        terrain=terrain,
    )


def scene_composition(scene: ForestScene) -> list[tuple[str, int, float]]:
    """Per-asset (count, percentage) rows, sorted by asset id."""
    counts: dict[str, int] = {}
    for inst in scene.instances:
        counts[inst.asset_id] = counts.get(inst.asset_id, 0) + 1
    total = sum(counts.values())
    return [
        (asset_id, n, 100.0 * n / total)
        for asset_id, n in sorted(counts.items())
    ]


# Scene files: header block with extent / seed / generator parameters, then
# one instance record per line.

_SCENE_MAGIC = "# sylva-scene v1"


def write_scene(scene: ForestScene, path) -> None:
    lines = [_SCENE_MAGIC]
    e = scene.extent
    lines.append(f"extent = {e.xmin!r} {e.ymin!r} {e.xmax!r} {e.ymax!r}")
    lines.append(f"rng_seed = {scene.rng_seed}")
    for g in scene.generators:
        p = f"generator.{g.name}"
        assets = ",".join(f"{aid}:{w!r}" for aid, w in g.assets)
        lines.append(f"{p}.assets = {assets}")
        lines.append(f"{p}.initial_seed_density = {g.initial_seed_density!r}")
        lines.append(f"{p}.collision_radius = {g.collision_radius!r}")
        lines.append(f"{p}.shade_radius = {g.shade_radius!r}")
        lines.append(f"{p}.procedural_scale = {g.procedural_scale[0]!r} {g.procedural_scale[1]!r}")
        lines.append(f"{p}.average_spread_distance = {g.average_spread_distance!r}")
        lines.append(f"{p}.spread_variance = {g.spread_variance!r}")
        lines.append(f"{p}.num_steps = {g.num_steps}")
        lines.append(f"{p}.max_age = {g.max_age}")
        lines.append(f"{p}.can_grow_in_shade = {int(g.can_grow_in_shade)}")
    lines.append("[instances]")
    for i in scene.instances:
        lines.append(
            f"{i.instance_id} {i.asset_id} {i.x!r} {i.y!r} {i.z!r} "
            f"{i.scale!r} {i.yaw!r} {i.age} {i.generator}"
        )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_scene(path) -> ForestScene:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != _SCENE_MAGIC:
        raise ParseError("not a scene file", path=path, line=1)
    extent = None
    seed = None
    gen_fields: dict[str, dict[str, str]] = {}
    gen_order: list[str] = []
    instances: list[TreeInstance] = []
    in_instances = False
    for lineno, line in enumerate(lines[1:], start=2):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if line == "[instances]":
            in_instances = True
            continue
        try:
            if in_instances:
                parts = line.split()
                if len(parts) != 9:
                    raise ValueError("instance record needs 9 fields")
                instances.append(
                    TreeInstance(
                        instance_id=int(parts[0]),
                        asset_id=parts[1],
                        x=float(parts[2]),
                        y=float(parts[3]),
                        z=float(parts[4]),
                        scale=float(parts[5]),
                        yaw=float(parts[6]),
                        age=int(parts[7]),
                        generator=parts[8],
                    )
                )
                continue
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key == "extent":
                vals = [float(v) for v in value.split()]
                extent = Rect(*vals)
            elif key == "rng_seed":
                seed = int(value)
            elif key.startswith("generator."):
                _, name, fieldname = key.split(".", 2)
                if name not in gen_fields:
                    gen_fields[name] = {}
                    gen_order.append(name)
                gen_fields[name][fieldname] = value
            else:
                raise ValueError(f"unknown key {key!r}")
        except (ValueError, TypeError) as exc:
            raise ParseError(f"bad scene record: {exc}", path=path, line=lineno) from None
    if extent is None or seed is None:
        raise ParseError("scene file missing extent or rng_seed", path=path)
    generators = []
    for name in gen_order:
        f = gen_fields[name]
        try:
            assets = tuple(
                (part.split(":")[0], float(part.split(":")[1]))
                for part in f["assets"].split(",")
                if part
            )
            lo, hi = (float(v) for v in f["procedural_scale"].split())
            generators.append(
                FoliageGeneratorParams(
                    name=name,
                    assets=assets,
                    initial_seed_density=float(f["initial_seed_density"]),
                    collision_radius=float(f["collision_radius"]),
                    shade_radius=float(f["shade_radius"]),
                    procedural_scale=(lo, hi),
                    average_spread_distance=float(f["average_spread_distance"]),
                    spread_variance=float(f["spread_variance"]),
                    num_steps=int(f["num_steps"]),
                    max_age=int(f["max_age"]),
                    can_grow_in_shade=bool(int(f["can_grow_in_shade"])),
                )
            )
        except (KeyError, ValueError, IndexError) as exc:
            raise ParseError(f"bad generator block {name!r}: {exc}", path=path) from None
    return ForestScene(extent=extent, generators=generators, instances=instances, rng_seed=seed)
