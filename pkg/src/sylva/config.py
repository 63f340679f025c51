"""Key-value configuration files with dotted paths and CLI overrides.

Format: one `key = value` per line, `#` comments, keys use dotted paths
(`survey.pulse_frequency = 100000`).  Overrides are `key=value` strings or
`--key value` argument pairs; later assignments win.
"""

from __future__ import annotations

import dataclasses
import os

from . import rng
from .assets import ParametricTreeSpec, load_asset, make_parametric_tree
from .errors import ConfigurationError, ParseError
from .geometry import Rect
from .presets import default_generators, default_library
from .procgen import FoliageGeneratorParams

ENV_CONFIG_DIR = "SYLVA_CONFIG_DIR"

DEFAULTS = {
    "seed": "42",
    "scene.extent": "0 0 50 50",
    "scene.assets": "default",
    "scene.generators": "default",
    "survey.pulse_frequency": "100000",
    "survey.scan_line_rate": "100",
    "survey.fov_half_angle": "60",
    "survey.max_returns": "15",
    "survey.max_range": "300",
    "survey.flight_pattern": "criss_cross",
    "survey.flight_spacing": "20",
    "survey.flight_speed": "5",
    "survey.relative_altitude": "60",
    "survey.voxel_size": "0.1",
    "survey.leaf_opacity": "0.35",
    "survey.workers": "1",
    "dataset.tile_size": "50",
    "dataset.split": "0.70 0.15 0.15",
    "dataset.density_threshold": "1000",
    "dataset.remap": "none",
    "dataset.format": "binary",
    "sampling.radius": "8",
    "sampling.grid_stride": "11",
    "sampling.mix_fraction": "0.30",
    "eval.iou_threshold": "0.5",
}


def parse_kv_text(text: str, path=None) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, eq, value = line.partition("=")
        if not eq:
            raise ParseError("config line is not key = value", path=path, line=lineno)
        out[key.strip()] = value.strip()
    return out


def read_kv_file(path) -> dict[str, str]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_kv_text(fh.read(), path=path)


def write_kv_file(data: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for key, value in data.items():
            fh.write(f"{key} = {value}\n")


def resolve_config_path(name: str) -> str:
    """A plain name resolves against SYLVA_CONFIG_DIR when not a local file."""
    if os.path.exists(name):
        return name
    cfg_dir = os.environ.get(ENV_CONFIG_DIR)
    if cfg_dir:
        candidate = os.path.join(cfg_dir, name)
        if os.path.exists(candidate):
            return candidate
    raise ConfigurationError(f"config file not found: {name}")


class Config:
    """Flat dotted-key configuration with typed accessors."""

    def __init__(self, values: dict[str, str] | None = None, use_defaults: bool = True):
        self.values: dict[str, str] = dict(DEFAULTS) if use_defaults else {}
        if values:
            self.values.update(values)

    @classmethod
    def load(cls, path=None, overrides: list[str] | None = None) -> "Config":
        cfg = cls()
        if path is not None:
            cfg.values.update(read_kv_file(resolve_config_path(str(path))))
        for item in overrides or []:
            key, eq, value = item.partition("=")
            if not eq:
                raise ConfigurationError(f"override {item!r} is not key=value")
            cfg.values[key.strip()] = value.strip()
        return cfg

    def get(self, key: str, default: str | None = None) -> str:
        if key in self.values:
            return self.values[key]
        if default is not None:
            return default
        raise ConfigurationError(f"missing config key {key!r}")

    def get_float(self, key: str) -> float:
        try:
            return float(self.get(key))
        except ValueError:
            raise ConfigurationError(f"config key {key!r} is not a number: {self.get(key)!r}") from None

    def get_int(self, key: str) -> int:
        try:
            return int(self.get(key))
        except ValueError:
            raise ConfigurationError(f"config key {key!r} is not an integer: {self.get(key)!r}") from None

    def get_floats(self, key: str) -> list[float]:
        try:
            return [float(v) for v in self.get(key).split()]
        except ValueError:
            raise ConfigurationError(f"config key {key!r} is not a number list") from None

    def get_rect(self, key: str) -> Rect:
        vals = self.get_floats(key)
        if len(vals) != 4:
            raise ConfigurationError(f"config key {key!r} needs 4 numbers (xmin ymin xmax ymax)")
        return Rect(*vals)

    def section(self, prefix: str) -> dict[str, str]:
        p = prefix + "."
        return {k[len(p) :]: v for k, v in self.values.items() if k.startswith(p)}

    def seed_for(self, stage: str) -> int:
        """Per-stage seed: explicit `<stage>.seed` wins, else derived."""
        explicit = self.values.get(f"{stage}.seed")
        if explicit is not None:
            return int(explicit)
        master = self.get_int("seed")
        return rng.derive_seed(master, stage) & (2**63 - 1)

    def as_dict(self) -> dict[str, str]:
        return dict(sorted(self.values.items()))


def _group_blocks(section: dict[str, str]) -> dict[str, dict[str, str]]:
    blocks: dict[str, dict[str, str]] = {}
    for key, value in section.items():
        name, dot, fieldname = key.partition(".")
        if not dot:
            continue
        blocks.setdefault(name, {})[fieldname] = value
    return blocks


def build_library(cfg: Config):
    """Assets from config: the built-in preset plus any `asset.*` blocks."""
    mode = cfg.get("scene.assets")
    if mode == "default":
        library = default_library()
    elif mode == "none":
        library = default_library().__class__()
    else:
        raise ConfigurationError(f"scene.assets must be 'default' or 'none', got {mode!r}")

    for asset_id, block in sorted(_group_blocks(cfg.section("asset")).items()):
        kind = block.get("kind", "parametric")
        if kind == "parametric":
            try:
                spec = ParametricTreeSpec(
                    species=block["species"],
                    canopy_level=block["canopy_level"],
                    height=float(block["height"]),
                    crown_shape=block.get("crown_shape", "cone"),
                    crown_radius=float(block["crown_radius"]),
                    crown_base_fraction=float(block.get("crown_base_fraction", "0.35")),
                    leaf_panel_count=int(block.get("leaf_panels", "48")),
                    rng_seed=int(block.get("seed", "1")),
                )
            except KeyError as exc:
                raise ConfigurationError(f"asset {asset_id!r} missing field {exc}") from None
            asset = dataclasses.replace(make_parametric_tree(spec), asset_id=asset_id)
            library.add(asset)
        elif kind == "file":
            try:
                mesh_path = block["mesh"]
                desc_path = block["descriptor"]
            except KeyError as exc:
                raise ConfigurationError(f"asset {asset_id!r} missing field {exc}") from None
            if not os.path.exists(mesh_path):
                raise ConfigurationError(f"asset {asset_id!r}: mesh file not found: {mesh_path}")
            if not os.path.exists(desc_path):
                raise ConfigurationError(f"asset {asset_id!r}: descriptor not found: {desc_path}")
            from .assets import load_descriptor

            library.add(load_asset(mesh_path, load_descriptor(desc_path), asset_id=asset_id))
        else:
            raise ConfigurationError(f"asset {asset_id!r}: unknown kind {kind!r}")
    return library


def build_generators(cfg: Config, library) -> list[FoliageGeneratorParams]:
    mode = cfg.get("scene.generators")
    generators: list[FoliageGeneratorParams] = []
    if mode == "default":
        generators = default_generators(library)
    elif mode != "explicit":
        raise ConfigurationError(
            f"scene.generators must be 'default' or 'explicit', got {mode!r}"
        )
    for name, block in sorted(_group_blocks(cfg.section("generator")).items()):
        try:
            assets = tuple(
                (part.split(":")[0], float(part.split(":")[1]) if ":" in part else 1.0)
                for part in block["assets"].split(",")
                if part
            )
            lo, hi = (float(v) for v in block["procedural_scale"].split())
            generators.append(
                FoliageGeneratorParams(
                    name=name,
                    assets=assets,
                    initial_seed_density=float(block["initial_seed_density"]),
                    collision_radius=float(block["collision_radius"]),
                    shade_radius=float(block["shade_radius"]),
                    procedural_scale=(lo, hi),
                    average_spread_distance=float(block["average_spread_distance"]),
                    spread_variance=float(block["spread_variance"]),
                    num_steps=int(block["num_steps"]),
                    max_age=int(block["max_age"]),
                    can_grow_in_shade=block.get("can_grow_in_shade", "0") in ("1", "true", "yes"),
                )
            )
        except KeyError as exc:
            raise ConfigurationError(f"generator {name!r} missing field {exc}") from None
        except ValueError as exc:
            raise ConfigurationError(f"generator {name!r}: {exc}") from None
    return generators
