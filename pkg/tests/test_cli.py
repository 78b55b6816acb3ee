import json

import pytest

from pmorkit import io as pio
from pmorkit.cli import main

SHORT = {"integrator": {"t_end": 0.1}, "pmor": {"q": 8}, "pod": {"q": 8}}


@pytest.fixture
def short_cfg(tmp_path):
    p = tmp_path / "short.json"
    p.write_text(json.dumps(SHORT))
    return p


def test_help_and_usage_errors(capsys):
    assert main(["--help"]) == 0
    assert "pmor" in capsys.readouterr().out
    assert main(["frobnicate"]) == 1
    assert main(["pod", "build"]) == 1                       # missing --snapshots
    assert main(["pmor", "sweep", "--library", "x", "--range", "1:2"]) == 1
    assert main(["pmor", "sweep", "--library", "x", "--range", "1:2:0"]) == 1


def test_missing_files_exit_1(tmp_path):
    assert main(["pod", "build", "--snapshots", str(tmp_path / "none")]) == 1
    assert main(["fom", "run", "--config", str(tmp_path / "none.json")]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"mystery": 1}))
    assert main(["fom", "run", "--config", str(bad), "--out", str(tmp_path)]) == 1


def test_numerical_failure_exit_2(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"integrator": {"t_end": 0.05},
                               "tolerances": {"max_newton": 1, "tol_s_res": 1e-14}}))
    assert main(["fom", "run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_fom_pod_rom_pipeline(short_cfg, tmp_path):
    out = tmp_path / "run"
    assert main(["--seed", "3", "fom", "run", "--config", str(short_cfg), "--out", str(out)]) == 0
    cols = pio.read_trajectory_csv(out / "trajectory.csv")
    assert cols["t"].size == 101
    summary = json.loads((out / "summary.json").read_text())
    assert {"EF", "p_v_max", "wall_time_s"} <= set(summary)
    assert (out / "snapshots.mat").exists() and (out / "snapshots.meta").exists()

    assert main(["pod", "build", "--snapshots", str(out / "snapshots"), "--q", "6",
                 "--out", str(out / "basis")]) == 0
    basis = pio.load_basis(out / "basis")
    assert basis.q == 6
    assert main(["pod", "build", "--snapshots", str(out / "snapshots"), "--eps-pod", "1e-6",
                 "--out", str(out / "basis_eps")]) == 0
    assert pio.load_basis(out / "basis_eps").q >= 1

    assert main(["rom", "run", "--config", str(short_cfg), "--basis", str(out / "basis"),
                 "--compare", "--out", str(out)]) == 0
    rom = json.loads((out / "summary_rom.json").read_text())
    assert rom["q"] == 6 and rom["eps_inf_inf"] >= 0
    assert pio.read_trajectory_csv(out / "trajectory_rom.csv")["q"][0] == 6


def test_pmor_library_and_sweep_rows(short_cfg, tmp_path):
    lib = tmp_path / "lib"
    assert main(["pmor", "library", "--config", str(short_cfg), "--out", str(lib)]) == 0
    assert main(["pmor", "sweep", "--config", str(short_cfg), "--library", str(lib),
                 "--method", "cos", "--range", "280:430:9", "--out", str(tmp_path)]) == 0
    cols, rows = pio.read_table(tmp_path / "sweep_cos.csv")
    assert cols == pio.SWEEP_COLUMNS
    assert sum(r["method"] == "cos" for r in rows) == 9
    assert sum(r["method"] == "fom" for r in rows) == 9
    # the sample points themselves reproduce the sampled basis
    assert all(r["eps_inf_inf"] < 0.05 for r in rows if r["method"] == "cos")
