"""Command-line interface: one-shot pipeline plus per-stage subcommands.

Exit codes: 0 success; 2 configuration error; 3 data error; 4 internal
error.  `pipeline` maps stage failures to stage-unique codes instead:
10 scene, 11 voxelize, 12 plan, 13 survey, 14 dataset, 15 report.
Unknown `--dotted.path value` arguments are treated as config overrides.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

from . import __version__
from .config import Config, build_generators, build_library, write_kv_file
from .dataset import (
    density_report,
    extract_nodal,
    plot_filename,
    read_manifest,
    remap_semantics,
    split,
    tile,
    write_manifest,
)
from .errors import ConfigurationError, DataError, SylvaError
from .labels import GROUND, LEAF, SIM_TO_BINARY, WOOD
from .metrics import evaluate_instances, evaluate_semantics
from .pointcloud import read_cloud, write_cloud
from .procgen import generate_forest, read_scene, scene_composition, write_scene
from .sampling import (
    sample_cylinders_grid,
    sample_cylinders_random,
    sample_sidecar,
    tree_mix,
)
from .survey import (
    ScannerConfig,
    plan_flight,
    run_survey,
    total_pulse_count,
)
from .voxelgrid import voxelize_scene, write_grid

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_INTERNAL = 4
STAGE_CODES = {"scene": 10, "voxelize": 11, "plan": 12, "survey": 13, "dataset": 14, "report": 15}


class _StageFailure(Exception):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage} failed: {cause}")
        self.stage = stage
        self.cause = cause


def _classify(exc: Exception) -> int:
    if isinstance(exc, ConfigurationError):
        return EXIT_CONFIG
    if isinstance(exc, DataError):
        return EXIT_DATA
    if isinstance(exc, SylvaError):
        return EXIT_CONFIG
    return EXIT_INTERNAL


def _extract_overrides(unknown: list[str]) -> list[str]:
    """Turn leftover `--dotted.path value` pairs into key=value overrides."""
    overrides = []
    i = 0
    while i < len(unknown):
        arg = unknown[i]
        if arg.startswith("--") and "." in arg:
            key = arg[2:]
            if "=" in key:
                overrides.append(key)
                i += 1
                continue
            if i + 1 >= len(unknown):
                raise ConfigurationError(f"override {arg} needs a value")
            overrides.append(f"{key}={unknown[i + 1]}")
            i += 2
        else:
            raise ConfigurationError(f"unrecognized argument {arg!r}")
    return overrides


def _load_config(args, unknown) -> Config:
    overrides = list(getattr(args, "set", None) or [])
    overrides += _extract_overrides(unknown)
    return Config.load(getattr(args, "config", None), overrides)


def _scanner_from(cfg: Config) -> ScannerConfig:
    return ScannerConfig(
        pulse_frequency=cfg.get_float("survey.pulse_frequency"),
        scan_line_rate=cfg.get_float("survey.scan_line_rate"),
        fov_half_angle=cfg.get_float("survey.fov_half_angle"),
        max_returns=cfg.get_int("survey.max_returns"),
        max_range=cfg.get_float("survey.max_range"),
    )


def _opacity_from(cfg: Config) -> dict[int, float]:
    return {
        GROUND: 1.0,
        WOOD: 1.0,
        LEAF: cfg.get_float("survey.leaf_opacity"),
    }


# --- pipeline ---------------------------------------------------------------


def cmd_pipeline(args, unknown) -> int:
    cfg = _load_config(args, unknown)
    out_dir = args.out
    created: list[str] = []
    timings: dict[str, float] = {}
    report: dict[str, object] = {}

    def track(path: str) -> str:
        created.append(path)
        return path

    def run_stage(name, fn):
        t0 = time.time()
        try:
            result = fn()
        except Exception as exc:
            raise _StageFailure(name, exc) from exc
        timings[name] = time.time() - t0
        return result

    try:
        # Configuration is validated before any stage runs.
        extent = cfg.get_rect("scene.extent")
        library = build_library(cfg)
        generators = build_generators(cfg, library)
        scanner = _scanner_from(cfg)
        fractions = tuple(cfg.get_floats("dataset.split"))
        tile_size = cfg.get_float("dataset.tile_size")
        fmt = cfg.get("dataset.format")
        remap_mode = cfg.get("dataset.remap")
        if remap_mode not in ("none", "binary"):
            raise ConfigurationError(f"dataset.remap must be none or binary, got {remap_mode!r}")
        workers = cfg.get_int("survey.workers")
        os.makedirs(out_dir, exist_ok=True)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _classify(exc) if not isinstance(exc, _StageFailure) else EXIT_INTERNAL

    try:
        scene = run_stage(
            "scene",
            lambda: generate_forest(extent, generators, library, cfg.seed_for("scene")),
        )
        scene_path = track(os.path.join(out_dir, "scene.txt"))
        write_scene(scene, scene_path)

        grid = run_stage(
            "voxelize",
            lambda: voxelize_scene(
                scene, library, cfg.get_float("survey.voxel_size"), _opacity_from(cfg)
            ),
        )

        plan = run_stage(
            "plan",
            lambda: plan_flight(
                extent,
                spacing=cfg.get_float("survey.flight_spacing"),
                altitude=cfg.get_float("survey.relative_altitude"),
                speed=cfg.get_float("survey.flight_speed"),
                pattern=cfg.get("survey.flight_pattern"),
            ),
        )

        survey_seed = cfg.seed_for("survey")
        cloud, stats = run_stage(
            "survey",
            lambda: run_survey(grid, plan, scanner, survey_seed, extent=extent, workers=workers),
        )
        cloud_path = track(os.path.join(out_dir, f"cloud.{ 'svpc' if fmt == 'binary' else 'txt'}"))
        write_cloud(cloud, cloud_path, fmt=fmt)

        def build_dataset():
            work = cloud
            if remap_mode == "binary":
                work = remap_semantics(work, SIM_TO_BINARY)
            plots = tile(work, tile_size=tile_size, scene=args.scene_name)
            if len(plots) >= 3:
                manifest = split(plots, fractions=fractions, seed=cfg.seed_for("dataset"))
            else:
                # Too few tiles to populate every split; keep them all in train.
                from .dataset import DatasetManifest, ManifestEntry

                manifest = DatasetManifest(
                    name=f"Sim_1_{len(plots)}",
                    scenes=[args.scene_name],
                    entries=[
                        ManifestEntry(
                            scene=p.scene,
                            tile_index=p.tile_index,
                            split="train",
                            points=len(p.cloud),
                            density=p.density,
                            bounds=p.bounds,
                        )
                        for p in plots
                    ],
                )
                report["notes.split"] = "fewer than 3 plots; all assigned to train"
            plots_dir = os.path.join(out_dir, "plots")
            os.makedirs(plots_dir, exist_ok=True)
            by_tile = {p.tile_index: p for p in plots}
            for entry in manifest.entries:
                plot = by_tile[entry.tile_index]
                rel = os.path.join("plots", plot_filename(entry.scene, entry.tile_index, fmt))
                write_cloud(plot.cloud, track(os.path.join(out_dir, rel)), fmt=fmt)
                entry.path = rel
            return plots, manifest

        plots, manifest = run_stage("dataset", build_dataset)
        manifest_path = track(os.path.join(out_dir, "manifest.txt"))
        write_manifest(manifest, manifest_path)

        def write_report():
            dens = density_report(plots, cfg.get_float("dataset.density_threshold"))
            report.update({f"config.{k}": v for k, v in cfg.as_dict().items()})
            report["seeds.scene"] = cfg.seed_for("scene")
            report["seeds.survey"] = survey_seed
            report["seeds.dataset"] = cfg.seed_for("dataset")
            report.update({f"stats.{k}": v for k, v in stats.as_dict().items()})
            report["stats.instances"] = len(scene.instances)
            report["stats.occupied_voxels"] = len(grid)
            report["stats.pulses_planned"] = total_pulse_count(plan, scanner)
            report["stats.plots"] = len(manifest.entries)
            report["stats.mean_plot_density"] = round(dens.overall_mean, 3)
            report["stats.flagged_plots"] = sum(1 for r in dens.rows if r.flagged)
            for name, dt in timings.items():
                report[f"timing.{name}_s"] = round(dt, 3)
            report["outputs.scene"] = "scene.txt"
            report["outputs.cloud"] = os.path.basename(cloud_path)
            report["outputs.manifest"] = "manifest.txt"
            write_kv_file(report, os.path.join(out_dir, "run_report.txt"))

        run_stage("report", write_report)
    except _StageFailure as failure:
        for path in created:
            if os.path.exists(path):
                os.remove(path)
        print(f"error: {failure}", file=sys.stderr)
        return STAGE_CODES[failure.stage]

    print(f"pipeline complete: {len(manifest.entries)} plots in {out_dir}")
    return EXIT_OK


# --- stage subcommands -------------------------------------------------------


def cmd_generate_scene(args, unknown) -> int:
    cfg = _load_config(args, unknown)
    extent = cfg.get_rect("scene.extent")
    library = build_library(cfg)
    generators = build_generators(cfg, library)
    scene = generate_forest(extent, generators, library, cfg.seed_for("scene"))
    write_scene(scene, args.out)
    print(f"scene: {len(scene.instances)} instances -> {args.out}")
    return EXIT_OK


def cmd_voxelize(args, unknown) -> int:
    cfg = _load_config(args, unknown)
    scene = read_scene(args.scene)
    library = build_library(cfg)
    grid = voxelize_scene(scene, library, cfg.get_float("survey.voxel_size"), _opacity_from(cfg))
    write_grid(grid, args.out)
    print(f"grid: {len(grid)} occupied voxels -> {args.out}")
    return EXIT_OK


def cmd_plan_flight(args, unknown) -> int:
    cfg = _load_config(args, unknown)
    extent = cfg.get_rect("scene.extent")
    plan = plan_flight(
        extent,
        spacing=cfg.get_float("survey.flight_spacing"),
        altitude=cfg.get_float("survey.relative_altitude"),
        speed=cfg.get_float("survey.flight_speed"),
        pattern=cfg.get("survey.flight_pattern"),
    )
    data: dict[str, object] = {
        "pattern": plan.pattern,
        "spacing": plan.spacing,
        "legs": len(plan.legs),
        "total_duration_s": round(plan.total_duration, 3),
    }
    for i, leg in enumerate(plan.legs):
        data[f"leg.{i}"] = (
            f"{leg.start[0]!r} {leg.start[1]!r} -> {leg.end[0]!r} {leg.end[1]!r} "
            f"alt {leg.altitude!r} speed {leg.speed!r}"
        )
    if args.out:
        write_kv_file(data, args.out)
    else:
        for k, v in data.items():
            print(f"{k} = {v}")
    return EXIT_OK


def cmd_survey(args, unknown) -> int:
    cfg = _load_config(args, unknown)
    scene = read_scene(args.scene)
    library = build_library(cfg)
    grid = voxelize_scene(scene, library, cfg.get_float("survey.voxel_size"), _opacity_from(cfg))
    plan = plan_flight(
        scene.extent,
        spacing=cfg.get_float("survey.flight_spacing"),
        altitude=cfg.get_float("survey.relative_altitude"),
        speed=cfg.get_float("survey.flight_speed"),
        pattern=cfg.get("survey.flight_pattern"),
    )
    cloud, stats = run_survey(
        grid,
        plan,
        _scanner_from(cfg),
        cfg.seed_for("survey"),
        extent=scene.extent,
        workers=cfg.get_int("survey.workers"),
    )
    write_cloud(cloud, args.out, fmt=cfg.get("dataset.format"))
    if args.stats_out:
        write_kv_file(stats.as_dict(), args.stats_out)
    print(
        f"survey: {stats.point_count} points, {stats.mean_density:.1f} pts/m^2 -> {args.out}"
    )
    return EXIT_OK


def cmd_tile(args, unknown) -> int:
    cfg = _load_config(args, unknown)
    cloud = read_cloud(args.cloud)
    plots = tile(cloud, tile_size=cfg.get_float("dataset.tile_size"), scene=args.scene_name)
    os.makedirs(args.out_dir, exist_ok=True)
    fmt = cfg.get("dataset.format")
    index: dict[str, object] = {"plots": len(plots)}
    for p in plots:
        name = plot_filename(p.scene, p.tile_index, fmt)
        write_cloud(p.cloud, os.path.join(args.out_dir, name), fmt=fmt)
        index[f"plot.{p.tile_index[0]},{p.tile_index[1]}"] = name
    write_kv_file(index, os.path.join(args.out_dir, "tiles.txt"))
    print(f"tiled: {len(plots)} plots -> {args.out_dir}")
    return EXIT_OK


def cmd_split(args, unknown) -> int:
    cfg = _load_config(args, unknown)
    cloud = read_cloud(args.cloud)
    plots = tile(cloud, tile_size=cfg.get_float("dataset.tile_size"), scene=args.scene_name)
    seed = args.seed if args.seed is not None else cfg.seed_for("dataset")
    manifest = split(plots, fractions=tuple(cfg.get_floats("dataset.split")), seed=seed)
    write_manifest(manifest, args.out)
    counts = manifest.split_counts()
    print(
        f"split: {counts['train']} train / {counts['val']} val / {counts['test']} test -> {args.out}"
    )
    return EXIT_OK


def cmd_nodal(args, unknown) -> int:
    cfg = _load_config(args, unknown)
    scene = read_scene(args.scene)
    library = build_library(cfg)
    cloud = extract_nodal(scene, library)
    write_cloud(cloud, args.out, fmt=cfg.get("dataset.format"))
    density = len(cloud) / scene.extent.area if scene.extent.area else 0.0
    print(f"nodal: {len(cloud)} points ({density:.1f} pts/m^2) -> {args.out}")
    return EXIT_OK


def cmd_sample(args, unknown) -> int:
    cfg = _load_config(args, unknown)
    cloud = read_cloud(args.plot)
    from .dataset import Plot

    bounds = cloud.extent
    plot = Plot(tile_index=(0, 0), bounds=bounds, cloud=cloud, scene=args.scene_name)
    radius = cfg.get_float("sampling.radius")
    if args.mode == "grid":
        samples = sample_cylinders_grid(plot, radius, cfg.get_float("sampling.grid_stride"))
    else:
        samples = sample_cylinders_random(plot, radius, args.count, args.seed)
    os.makedirs(args.out_dir, exist_ok=True)
    fmt = cfg.get("dataset.format")
    for i, s in enumerate(samples):
        base = os.path.join(args.out_dir, f"cyl_{i:04d}")
        write_cloud(s.cloud, base + (".svpc" if fmt == "binary" else ".txt"), fmt=fmt)
        write_kv_file(sample_sidecar(s), base + ".meta")
    print(f"sampled: {len(samples)} cylinders -> {args.out_dir}")
    return EXIT_OK


def cmd_mix(args, unknown) -> int:
    cfg = _load_config(args, unknown)
    from .dataset import Plot

    def load_sample(path):
        cloud = read_cloud(path)
        from .sampling import CylinderSample

        e = cloud.extent
        return CylinderSample(center=e.center, radius=cfg.get_float("sampling.radius"), cloud=cloud)

    mixed = tree_mix(
        load_sample(args.sample_a),
        load_sample(args.sample_b),
        fraction=cfg.get_float("sampling.mix_fraction"),
        seed=args.seed,
    )
    write_cloud(mixed.cloud, args.out, fmt=cfg.get("dataset.format"))
    print(f"mixed sample -> {args.out}")
    return EXIT_OK


def cmd_eval(args, unknown) -> int:
    cfg = _load_config(args, unknown)
    pred = read_cloud(args.pred)
    gt = read_cloud(args.gt)
    if len(pred) != len(gt):
        raise DataError("prediction and ground-truth clouds differ in length")
    inst = evaluate_instances(
        pred.points["instance"],
        gt.points["instance"],
        iou_threshold=cfg.get_float("eval.iou_threshold"),
    )
    lines = {f"instance.{k}": v for k, v in inst.as_dict().items()}
    if args.semantic:
        sem = evaluate_semantics(pred.points["semantic"], gt.points["semantic"])
        lines.update({f"semantic.{k}": v for k, v in sem.as_dict().items()})
    for k, v in lines.items():
        print(f"{k} = {v}")
    if args.out:
        write_kv_file(lines, args.out)
    return EXIT_OK


def cmd_stats(args, unknown) -> int:
    cfg = _load_config(args, unknown)
    if args.manifest:
        manifest = read_manifest(args.manifest)
        counts = manifest.split_counts()
        print(f"dataset {manifest.name}: {len(manifest.entries)} plots")
        print(f"split: train {counts['train']} / val {counts['val']} / test {counts['test']}")
        print(f"{'scene':<16}{'tile':<10}{'split':<8}{'points':>10}{'pts/m^2':>10}")
        for e in manifest.entries:
            print(
                f"{e.scene:<16}{str(e.tile_index):<10}{e.split:<8}{e.points:>10}{e.density:>10.1f}"
            )
        dens = [e.density for e in manifest.entries]
        if dens:
            print(f"mean density: {sum(dens) / len(dens):.1f} pts/m^2")
    if args.scene:
        scene = read_scene(args.scene)
        rows = scene_composition(scene)
        total = sum(n for _, n, _ in rows)
        print(f"scene composition: {total} instances, {len(rows)} assets")
        print(f"{'asset':<40}{'count':>8}{'percent':>9}")
        for asset_id, count, pct in rows:
            print(f"{asset_id:<40}{count:>8}{pct:>8.2f}%")
    if args.cloud:
        cloud = read_cloud(args.cloud)
        e = cloud.extent
        density = len(cloud) / e.area if e and e.area else 0.0
        print(f"cloud: {len(cloud)} points, density {density:.1f} pts/m^2")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sylva",
        description="Procedural forest scenes, simulated UAV laser scans, ML-ready datasets.",
    )
    parser.add_argument("--version", action="version", version=f"sylva {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="config file (resolved against $SYLVA_CONFIG_DIR)")
        p.add_argument(
            "--set",
            action="append",
            metavar="KEY=VALUE",
            help="config override; may repeat",
        )

    p = sub.add_parser("pipeline", help="run the full pipeline")
    common(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--scene-name", default="scene", help="scene label used in the manifest")
    p.set_defaults(fn=cmd_pipeline)

    p = sub.add_parser("generate-scene", help="procedurally generate a forest scene")
    common(p)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_generate_scene)

    p = sub.add_parser("voxelize", help="voxelize a scene to a grid dump")
    common(p)
    p.add_argument("--scene", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_voxelize)

    p = sub.add_parser("plan-flight", help="plan the survey flight")
    common(p)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_plan_flight)

    p = sub.add_parser("survey", help="simulate the laser survey over a scene")
    common(p)
    p.add_argument("--scene", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--stats-out")
    p.set_defaults(fn=cmd_survey)

    p = sub.add_parser("tile", help="tile a cloud into plots")
    common(p)
    p.add_argument("--cloud", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--scene-name", default="scene")
    p.set_defaults(fn=cmd_tile)

    p = sub.add_parser("split", help="tile a cloud and assign train/val/test splits")
    common(p)
    p.add_argument("--cloud", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--scene-name", default="scene")
    p.set_defaults(fn=cmd_split)

    p = sub.add_parser("nodal", help="extract the mesh-vertex baseline cloud")
    common(p)
    p.add_argument("--scene", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_nodal)

    p = sub.add_parser("sample", help="cut cylinder samples from a plot")
    common(p)
    p.add_argument("--plot", required=True)
    p.add_argument("--mode", choices=("grid", "random"), default="grid")
    p.add_argument("--count", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--scene-name", default="scene")
    p.set_defaults(fn=cmd_sample)

    p = sub.add_parser("mix", help="tree-swap augmentation between two samples")
    common(p)
    p.add_argument("--sample-a", required=True)
    p.add_argument("--sample-b", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_mix)

    p = sub.add_parser("eval", help="evaluate predicted labels against ground truth")
    common(p)
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--semantic", action="store_true")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("stats", help="density and composition tables")
    common(p)
    p.add_argument("--manifest")
    p.add_argument("--scene")
    p.add_argument("--cloud")
    p.set_defaults(fn=cmd_stats)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args, unknown = parser.parse_known_args(argv)
    try:
        return args.fn(args, unknown)
    except _StageFailure as failure:
        print(f"error: {failure}", file=sys.stderr)
        return STAGE_CODES[failure.stage]
    except SylvaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _classify(exc)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # internal
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
