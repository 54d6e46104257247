"""Batch front door: config parsing, subcommands, artifacts, exit codes."""

import json

import numpy as np
import pytest

from mfgprod.cli import (
    EXIT_CONFIG,
    EXIT_IO,
    EXIT_OK,
    ConfigError,
    build_run_config,
    main,
    parse_config,
)

COARSE = """
# coarse desk-scale instance for fast CLI runs
disc.Nx = 80
disc.Nt = 80
cascade.K = 2
sweep.epsilons = 0.02,0.04,0.08
"""


@pytest.fixture()
def coarse_cfg(tmp_path):
    path = tmp_path / "coarse.cfg"
    path.write_text(COARSE)
    return path


def test_parse_config_types():
    got = parse_config("params.sigma = 2.5\ndisc.Nx = 100\nsweep.epsilons = 0.1,0.2\n")
    assert got["params.sigma"] == 2.5
    assert got["disc.Nx"] == 100
    assert got["sweep.epsilons"] == (0.1, 0.2)


def test_parse_config_families():
    got = parse_config("params.xi = smooth_bump:2\nparams.M = gamma4_density:1.5\n")
    assert got["params.xi"].family == "smooth_bump"
    assert got["params.M"].params == (1.5,)


def test_parse_config_rejects_unknown_key():
    with pytest.raises(ConfigError):
        parse_config("bogus.key = 1\n")


def test_parse_config_rejects_malformed_line():
    with pytest.raises(ConfigError):
        parse_config("params.sigma 2.5\n")


def test_build_run_config_defaults():
    cfg = build_run_config({})
    assert cfg.params.sigma == 1.0
    assert cfg.disc.Nx == 240 and cfg.disc.Nt == 240
    assert cfg.opts.tol == 1e-8
    assert cfg.cascade_K == 3
    assert cfg.sweep_epsilons == (0.02, 0.04, 0.08)


def test_invalid_config_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("params.sigma = -1\n")
    assert main(["solve", "--config", str(bad), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert "positive" in capsys.readouterr().err


def test_missing_config_file_exits_4(tmp_path):
    assert main(["solve", "--config", str(tmp_path / "nope.cfg")]) == EXIT_IO


def test_solve_artifacts(tmp_path, coarse_cfg):
    out = tmp_path / "out"
    assert main(["solve", "--config", str(coarse_cfg), "--out", str(out)]) == EXIT_OK
    summary = json.loads((out / "summary.json").read_text())
    assert summary["kind"] == "solve_summary"
    assert summary["residual"] <= 1e-8
    for name in ("u.csv", "m.csv", "F.csv", "mass.csv"):
        assert (out / name).exists()


def test_cascade_artifacts(tmp_path, coarse_cfg):
    out = tmp_path / "out"
    assert main(["cascade", "--config", str(coarse_cfg), "--out", str(out)]) == EXIT_OK
    manifest = json.loads((out / "cascade" / "manifest.json").read_text())
    assert manifest["K"] == 2
    assert (out / "cascade" / "u_2.csv").exists()


def test_sweep_report_and_determinism(tmp_path, coarse_cfg):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    for out in (out1, out2):
        code = main(
            ["sweep", "--config", str(coarse_cfg), "--out", str(out), "--threads", "4"]
        )
        assert code == EXIT_OK
    assert (out1 / "report.json").read_bytes() == (out2 / "report.json").read_bytes()
    assert (out1 / "errors.csv").read_bytes() == (out2 / "errors.csv").read_bytes()
    report = json.loads((out1 / "report.json").read_text())
    assert report["schema_version"] == 1
    assert len(report["slopes"]) > 0


def test_oracle_summary(tmp_path, coarse_cfg):
    out = tmp_path / "out"
    assert main(["oracle", "--config", str(coarse_cfg), "--out", str(out)]) == EXIT_OK
    summary = json.loads((out / "oracle_summary.json").read_text())
    assert summary["heat_image_pair_sup_error"] <= 1e-3
    assert summary["affine_backward_sup_error"] <= 1e-4
    assert summary["duhamel_vs_fp_sup_error"] <= 1e-2


def test_report_merges_everything(tmp_path, coarse_cfg):
    out = tmp_path / "out"
    assert main(["solve", "--config", str(coarse_cfg), "--out", str(out)]) == EXIT_OK
    assert main(["sweep", "--config", str(coarse_cfg), "--out", str(out)]) == EXIT_OK
    assert main(["report", "--out", str(out)]) == EXIT_OK
    merged = json.loads((out / "merged.json").read_text())
    files = merged["files"]
    # every artifact written earlier is re-parsed into the merge
    assert "summary.json" in files and "report.json" in files
    assert files["u.csv"]["header"] == "t,x,value"
    assert files["errors.csv"]["header"] == "k,epsilon,norm,error"


def test_report_without_output_dir_exits_4(tmp_path):
    assert main(["report", "--out", str(tmp_path / "absent")]) == EXIT_IO
