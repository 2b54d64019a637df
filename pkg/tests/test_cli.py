import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from nvbmesh.cli import main

from conftest import OMEGA_L

GRADE_CFG = {
    "domain": "l_shape",
    "delta": 0.3,
    "p": 1,
    "output_dir": "out",
    "terms": [{"center": [0.0, 0.0], "angular": {"kind": "sin", "omega": OMEGA_L}}],
}


@pytest.fixture
def runner():
    return CliRunner()


def write_cfg(data, name="exp.json"):
    Path(name).write_text(json.dumps(data))
    return name


def test_kellogg_command(runner):
    result = runner.invoke(main, ["kellogg", "0.1"])
    assert result.exit_code == 0, result.output
    assert "R=161.4476" in result.output
    assert '"kind": "kellogg"' in result.output


def test_kellogg_command_rejects_bad_gamma(runner):
    result = runner.invoke(main, ["kellogg", "2.5"])
    assert result.exit_code != 0


def test_grade_writes_artifacts_and_passes(runner):
    with runner.isolated_filesystem():
        cfg = write_cfg(GRADE_CFG)
        result = runner.invoke(main, ["grade", "-c", cfg])
        assert result.exit_code == 0, result.output
        for name in ("mesh.txt", "mesh.vtk", "ledger.csv", "size_lemma.csv"):
            assert (Path("out") / name).exists()
        assert "all verifiers passed" in result.output


def test_grade_deterministic_outputs(runner):
    with runner.isolated_filesystem():
        cfg = write_cfg(GRADE_CFG)
        assert runner.invoke(main, ["grade", "-c", cfg, "-o", "a"]).exit_code == 0
        assert runner.invoke(main, ["grade", "-c", cfg, "-o", "b"]).exit_code == 0
        for name in ("mesh.txt", "ledger.csv"):
            assert (Path("a") / name).read_bytes() == (Path("b") / name).read_bytes()


def test_grade_output_dir_env_override(runner, monkeypatch):
    with runner.isolated_filesystem():
        cfg = write_cfg(GRADE_CFG)
        monkeypatch.setenv("NVBMESH_OUTDIR", "envdir")
        result = runner.invoke(main, ["grade", "-c", cfg])
        assert result.exit_code == 0
        assert (Path("envdir") / "mesh.txt").exists()


def test_grade_requires_delta(runner):
    with runner.isolated_filesystem():
        cfg = dict(GRADE_CFG)
        del cfg["delta"]
        result = runner.invoke(main, ["grade", "-c", write_cfg(cfg)])
        assert result.exit_code == 2
        assert "delta" in result.output


def test_converge_small_sweep(runner):
    with runner.isolated_filesystem():
        cfg = dict(GRADE_CFG, deltas=[0.4, 0.2, 0.1, 0.05], u0="sin_cos")
        cfg.pop("delta")
        result = runner.invoke(main, ["converge", "-c", write_cfg(cfg)])
        assert result.exit_code == 0, result.output
        assert (Path("out") / "convergence.csv").exists()
        assert "slope=" in result.output and "pass" in result.output


def test_converge_single_delta_usage_error(runner):
    with runner.isolated_filesystem():
        cfg = dict(GRADE_CFG, deltas=[0.4])
        cfg.pop("delta")
        result = runner.invoke(main, ["converge", "-c", write_cfg(cfg)])
        assert result.exit_code == 2
        assert "4 decreasing values" in result.output


def test_export_round_trip_and_vtk(runner):
    with runner.isolated_filesystem():
        cfg = write_cfg(GRADE_CFG)
        assert runner.invoke(main, ["grade", "-c", cfg]).exit_code == 0
        mesh_path = Path("out") / "mesh.txt"
        original = mesh_path.read_text()

        result = runner.invoke(
            main, ["export", str(mesh_path), "--format", "text", "-o", "round.txt"]
        )
        assert result.exit_code == 0
        assert Path("round.txt").read_text() == original

        result = runner.invoke(main, ["export", str(mesh_path), "--format", "vtk"])
        assert result.exit_code == 0
        assert Path("out/mesh.vtk").read_text().startswith("# vtk DataFile Version 2.0")


def test_export_unknown_format(runner):
    with runner.isolated_filesystem():
        Path("m.txt").write_text("nvb-mesh 1 0 0\n")
        result = runner.invoke(main, ["export", "m.txt", "--format", "step"])
        assert result.exit_code == 2


def test_export_parse_error_names_line(runner):
    with runner.isolated_filesystem():
        Path("bad.txt").write_text("nvb-mesh 1 2 1\n0 0\n")
        result = runner.invoke(main, ["export", "bad.txt", "--format", "vtk"])
        assert result.exit_code == 2
        assert "line" in result.output


def test_verify_command(runner):
    with runner.isolated_filesystem():
        cfg = write_cfg(GRADE_CFG)
        assert runner.invoke(main, ["grade", "-c", cfg]).exit_code == 0
        result = runner.invoke(
            main,
            ["verify", "out/mesh.txt", "-c", cfg, "--ledger", "out/ledger.csv"],
        )
        assert result.exit_code == 0, result.output
        assert "size_lemma: pass" in result.output


def test_verify_command_fails_on_tampered_mesh(runner):
    from nvbmesh import mesh_from_text, mesh_to_text

    with runner.isolated_filesystem():
        cfg = write_cfg(GRADE_CFG)
        assert runner.invoke(main, ["grade", "-c", cfg]).exit_code == 0
        mesh = mesh_from_text(Path("out/mesh.txt").read_text())
        # bisect one leaf whose refinement edge is interior: the neighbour
        # across it is left with a hanging node
        tv = mesh.tri_vertices()
        victim = next(
            int(t)
            for t in mesh.leaf_ids()
            if len(mesh.edge_map[tuple(sorted((int(tv[t, 0]), int(tv[t, 1]))))]) == 2
        )
        mesh.refine([victim])
        Path("out/broken.txt").write_text(mesh_to_text(mesh))
        result = runner.invoke(main, ["verify", "out/broken.txt", "-c", cfg])
        assert result.exit_code == 1
        assert "conforming: FAIL" in result.output
