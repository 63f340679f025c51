import os

from sylva.cli import EXIT_CONFIG, EXIT_OK, main
from sylva.dataset import read_manifest
from sylva.pointcloud import read_cloud

FAST_SURVEY = [
    "--set", "survey.pulse_frequency=2000",
    "--set", "survey.scan_line_rate=20",
    "--set", "survey.voxel_size=0.2",
]


def _run(*argv):
    return main(list(argv))


def test_pipeline_smoke_minimal_config(tmp_path):
    out = tmp_path / "run"
    code = _run("pipeline", "--out", str(out), *FAST_SURVEY)
    assert code == EXIT_OK
    manifest = read_manifest(out / "manifest.txt")
    assert len(manifest.entries) >= 1
    assert (out / "run_report.txt").exists()
    assert (out / "scene.txt").exists()
    for e in manifest.entries:
        assert (out / e.path).exists()


def test_pipeline_override_in_report(tmp_path):
    out = tmp_path / "run"
    code = _run("pipeline", "--out", str(out), "--survey.relative_altitude", "120", *FAST_SURVEY)
    assert code == EXIT_OK
    report = (out / "run_report.txt").read_text()
    assert "config.survey.relative_altitude = 120" in report


def test_pipeline_missing_asset_is_config_error(tmp_path):
    out = tmp_path / "missing"
    code = _run(
        "pipeline",
        "--out",
        str(out),
        "--set", "asset.x.kind=file",
        "--set", "asset.x.mesh=/does/not/exist.mesh",
        "--set", "asset.x.descriptor=/does/not/exist.desc",
    )
    assert code == EXIT_CONFIG
    assert not out.exists()


def test_pipeline_rerun_is_bitwise_identical(tmp_path):
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    for out in (out_a, out_b):
        assert _run("pipeline", "--out", str(out), *FAST_SURVEY) == EXIT_OK
    assert (out_a / "cloud.svpc").read_bytes() == (out_b / "cloud.svpc").read_bytes()
    assert (out_a / "manifest.txt").read_bytes() == (out_b / "manifest.txt").read_bytes()


def test_stage_subcommands_chain(tmp_path):
    scene = tmp_path / "scene.txt"
    assert _run("generate-scene", "--out", str(scene), "--set", "scene.extent=0 0 30 30") == EXIT_OK

    grid = tmp_path / "grid.svxg"
    assert _run("voxelize", "--scene", str(scene), "--out", str(grid), "--set", "survey.voxel_size=0.3") == EXIT_OK
    assert grid.stat().st_size > 0

    plan_file = tmp_path / "plan.txt"
    assert _run("plan-flight", "--out", str(plan_file), "--set", "scene.extent=0 0 30 30") == EXIT_OK
    assert "legs = " in plan_file.read_text()

    cloud = tmp_path / "cloud.svpc"
    assert (
        _run("survey", "--scene", str(scene), "--out", str(cloud), *FAST_SURVEY) == EXIT_OK
    )
    assert len(read_cloud(cloud)) > 0

    nodal = tmp_path / "nodal.svpc"
    assert _run("nodal", "--scene", str(scene), "--out", str(nodal)) == EXIT_OK
    assert len(read_cloud(nodal)) > 0

    tiles_dir = tmp_path / "tiles"
    assert _run("tile", "--cloud", str(cloud), "--out-dir", str(tiles_dir), "--set", "dataset.tile_size=15") == EXIT_OK
    assert (tiles_dir / "tiles.txt").exists()

    manifest = tmp_path / "manifest.txt"
    assert _run(
        "split", "--cloud", str(cloud), "--out", str(manifest), "--seed", "7",
        "--set", "dataset.tile_size=15",
    ) == EXIT_OK
    manifest2 = tmp_path / "manifest2.txt"
    assert _run(
        "split", "--cloud", str(cloud), "--out", str(manifest2), "--seed", "7",
        "--set", "dataset.tile_size=15",
    ) == EXIT_OK
    assert manifest.read_bytes() == manifest2.read_bytes()

    samples_dir = tmp_path / "samples"
    plot_path = tiles_dir / os.listdir(tiles_dir)[0]
    plots = [p for p in os.listdir(tiles_dir) if p.endswith(".svpc")]
    assert (
        _run("sample", "--plot", str(tiles_dir / plots[0]), "--mode", "grid", "--out-dir", str(samples_dir))
        == EXIT_OK
    )
    metas = [p for p in os.listdir(samples_dir) if p.endswith(".meta")]
    assert metas


def test_eval_identical_clouds_scores_100(tmp_path, capsys):
    scene = tmp_path / "scene.txt"
    _run("generate-scene", "--out", str(scene), "--set", "scene.extent=0 0 25 25")
    cloud = tmp_path / "c.svpc"
    _run("survey", "--scene", str(cloud.with_name('scene.txt')), "--out", str(cloud), *FAST_SURVEY)
    capsys.readouterr()
    code = _run("eval", "--pred", str(cloud), "--gt", str(cloud), "--semantic")
    out = capsys.readouterr().out
    assert code == EXIT_OK
    assert "instance.f1 = 100.0" in out
    assert "semantic.accuracy = 100.0" in out


def test_nodal_density_below_simulated(tmp_path, capsys):
    scene = tmp_path / "scene.txt"
    _run("generate-scene", "--out", str(scene), "--set", "scene.extent=0 0 25 25")
    nodal = tmp_path / "n.svpc"
    sim = tmp_path / "s.svpc"
    _run("nodal", "--scene", str(scene), "--out", str(nodal))
    _run("survey", "--scene", str(scene), "--out", str(sim), *FAST_SURVEY)
    capsys.readouterr()
    assert _run("stats", "--cloud", str(nodal)) == EXIT_OK
    out_nodal = capsys.readouterr().out
    assert _run("stats", "--cloud", str(sim)) == EXIT_OK
    out_sim = capsys.readouterr().out
    d_nodal = float(out_nodal.split("density")[1].split()[0])
    d_sim = float(out_sim.split("density")[1].split()[0])
    assert d_nodal < d_sim


def test_stats_scene_composition(tmp_path, capsys):
    scene = tmp_path / "scene.txt"
    _run("generate-scene", "--out", str(scene), "--set", "scene.extent=0 0 40 40")
    capsys.readouterr()
    assert _run("stats", "--scene", str(scene)) == EXIT_OK
    out = capsys.readouterr().out
    assert "scene composition" in out
    assert "%" in out


def test_unknown_override_rejected(tmp_path):
    code = _run("pipeline", "--out", str(tmp_path / "x"), "--bogus-flag")
    assert code == EXIT_CONFIG
