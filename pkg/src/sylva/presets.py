"""Built-in asset library and canopy-layer parameter presets.

The parametric trees let the whole pipeline run with zero external files.
The two-layer generator preset models a coniferous stand: shade-intolerant
canopy trees over shade-tolerant saplings, with radii at the midpoints of
typical per-layer ranges.
"""

from __future__ import annotations

from .assets import AssetLibrary, ParametricTreeSpec, make_parametric_tree
from .procgen import FoliageGeneratorParams

# Panel counts are tuned so the standard survey over the default forest
# lands inside the reference density band (roughly 1100-2100 pts/m^2) at the
# default leaf opacity.
_OVERSTORY_SPECS = [
    ParametricTreeSpec("spruce", "large", 20.0, "cone", 4.0, 0.28, 20, 101),
    ParametricTreeSpec("spruce", "large", 18.0, "cone", 3.6, 0.30, 20, 102),
    ParametricTreeSpec("pine", "large", 16.0, "cone", 3.2, 0.34, 18, 103),
    ParametricTreeSpec("birch", "medium", 12.0, "ellipsoid", 2.8, 0.45, 14, 104),
]

_UNDERSTORY_SPECS = [
    ParametricTreeSpec("sapling", "sapling", 3.5, "ellipsoid", 1.3, 0.30, 5, 201),
    ParametricTreeSpec("sapling", "sapling", 2.5, "ellipsoid", 1.0, 0.30, 4, 202),
]


def default_library() -> AssetLibrary:
    lib = AssetLibrary()
    for spec in _OVERSTORY_SPECS + _UNDERSTORY_SPECS:
        lib.add(make_parametric_tree(spec))
    return lib


def overstory_asset_ids() -> list[str]:
    return [make_asset_id(s) for s in _OVERSTORY_SPECS]


def understory_asset_ids() -> list[str]:
    return [make_asset_id(s) for s in _UNDERSTORY_SPECS]


def make_asset_id(spec: ParametricTreeSpec) -> str:
    return (
        f"{spec.species}_{spec.canopy_level}_{spec.crown_shape}"
        f"_h{spec.height:g}_r{spec.crown_radius:g}_s{spec.rng_seed}"
    )


def default_generators(library: AssetLibrary | None = None) -> list[FoliageGeneratorParams]:
    """Overstory (shade-intolerant canopy trees) plus understory saplings."""
    over = tuple((aid, 1.0) for aid in overstory_asset_ids())
    under = tuple((aid, 1.0) for aid in understory_asset_ids())
    return [
        FoliageGeneratorParams(
            name="overstory",
            assets=over,
            initial_seed_density=3.0,
            collision_radius=2.75,
            shade_radius=4.5,
            procedural_scale=(0.8, 1.2),
            average_spread_distance=15.0,
            spread_variance=5.0,
            num_steps=2,
            max_age=3,
            can_grow_in_shade=False,
        ),
        FoliageGeneratorParams(
            name="understory",
            assets=under,
            initial_seed_density=2.0,
            collision_radius=0.75,
            shade_radius=0.5,
            procedural_scale=(0.5, 1.0),
            average_spread_distance=8.0,
            spread_variance=3.0,
            num_steps=2,
            max_age=2,
            can_grow_in_shade=True,
        ),
    ]
