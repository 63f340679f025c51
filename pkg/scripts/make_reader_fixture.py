"""Generate the dataset fixture consumed by the frontend reader tests.

Runs the CLI pipeline at reduced density over a 250 m scene (25 plots,
17/4/4 split), then records the expected cylinder centers straight from the
primary sampler so the reader tests can assert bit-level agreement.

Usage: python scripts/make_reader_fixture.py [out_dir]
"""

import json
import os
import shutil
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from sylva import rng
from sylva.cli import main as cli_main
from sylva.dataset import read_manifest
from sylva.sampling import grid_centers


def main() -> int:
    out = sys.argv[1] if len(sys.argv) > 1 else os.path.join(
        os.path.dirname(__file__), "..", "frontend", "tests", "fixture"
    )
    out = os.path.abspath(out)
    if os.path.exists(out):
        shutil.rmtree(out)

    code = cli_main(
        [
            "pipeline",
            "--out", out,
            "--scene-name", "conifer",
            "--set", "scene.extent=0 0 250 250",
            "--set", "survey.pulse_frequency=100",
            "--set", "survey.scan_line_rate=5",
            "--set", "survey.flight_spacing=50",
            "--set", "survey.flight_speed=10",
            "--set", "survey.voxel_size=0.5",
            "--set", "seed=2024",
        ]
    )
    if code != 0:
        print(f"pipeline failed with exit code {code}", file=sys.stderr)
        return code
    # The merged cloud duplicates the per-plot files; the reader never uses it.
    os.remove(os.path.join(out, "cloud.svpc"))

    manifest = read_manifest(os.path.join(out, "manifest.txt"))
    first = manifest.entries[0]

    grid = grid_centers(first.bounds, radius=8.0, stride=11.0)

    rand_seed = 123
    rand = []
    for k in range(7):
        cx = first.bounds.xmin + rng.u01(rand_seed, rng.CENTER, k, 0) * first.bounds.width
        cy = first.bounds.ymin + rng.u01(rand_seed, rng.CENTER, k, 1) * first.bounds.height
        rand.append([cx, cy])

    expected = {
        "manifest_name": manifest.name,
        "split_counts": manifest.split_counts(),
        "plots": len(manifest.entries),
        "first_plot": {
            "scene": first.scene,
            "tile": list(first.tile_index),
            "path": first.path,
            "points": first.points,
            "bounds": [
                first.bounds.xmin,
                first.bounds.ymin,
                first.bounds.xmax,
                first.bounds.ymax,
            ],
        },
        "grid_centers": {
            "radius": 8.0,
            "stride": 11.0,
            "centers": [[x, y] for x, y in grid],
        },
        "random_centers": {
            "seed": rand_seed,
            "count": 7,
            "centers": rand,
        },
        # Raw hash pins so the reader's keyed RNG can be verified exactly.
        "hash_probes": [
            {"words": [rand_seed, rng.CENTER, 0, 0], "hash": str(rng.hash64(rand_seed, rng.CENTER, 0, 0))},
            {"words": [rand_seed, rng.CENTER, 3, 1], "hash": str(rng.hash64(rand_seed, rng.CENTER, 3, 1))},
            {"words": [1, 2, 3], "hash": str(rng.hash64(1, 2, 3))},
        ],
    }
    with open(os.path.join(out, "expected.json"), "w", encoding="utf-8") as fh:
        json.dump(expected, fh, indent=2)

    # The run report carries wall-clock timings; drop it so the fixture is
    # fully deterministic across regenerations.
    report = os.path.join(out, "run_report.txt")
    if os.path.exists(report):
        os.remove(report)

    size = sum(
        os.path.getsize(os.path.join(root, f))
        for root, _, files in os.walk(out)
        for f in files
    )
    print(f"fixture written to {out} ({size / 1e6:.1f} MB, {len(manifest.entries)} plots)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
