#!/usr/bin/env python3
"""
Test script for the command-line harness

Runs every subcommand on tiny problems in a temporary folder and checks
outputs, exit codes and manifests.

Usage:
python tests/test_cli.py
"""

import json
import os
import subprocess
import sys

import numpy as np
import pandas as pd
import pytest

# Add project root to Python path for src module imports
project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, project_root)

from src.cli.csi_cli import EXIT_ARGUMENT, EXIT_FORMAT, EXIT_NUMERICAL, EXIT_OK, main
from src.storage import cube_files, manifest
from src.storage.phantom import make_phantom
from src.tensors.tensor_core import Tensor3

FAST_FIT = ["--iters", "4", "--width", "3", "--log-stride", "2"]


@pytest.fixture
def scene(tmp_path):
    path = str(tmp_path / "scene.scb")
    assert main(["phantom", "--dims", "16x16x4", "--blobs", "3", "--seed", "1", "--out", path]) == EXIT_OK
    return path


@pytest.fixture
def simulated(tmp_path, scene):
    meas, ca = str(tmp_path / "y.sme"), str(tmp_path / "y.ca")
    code = main(["simulate", "--scene", scene, "--shots", "2", "--snr", "inf", "--ca", "bernoulli",
                 "--seed", "7", "--out", meas, "--ca-out", ca])
    assert code == EXIT_OK
    return meas, ca


def test_phantom_writes_cube_and_manifest(scene):
    assert cube_files.read_scube(scene).dims == (16, 16, 4)
    records = manifest.read_records(scene + ".manifest.jsonl")
    assert records[-1]["command"] == "phantom"
    assert records[-1]["outputs"][scene] == manifest.file_digest(scene)


def test_simulate_outputs(simulated):
    meas, ca = simulated
    measurements = cube_files.read_smea(meas)
    assert measurements.images.shape == (2, 16, 19)
    assert cube_files.read_aperture(ca).shots == 2


def test_reconstruct_with_trace(tmp_path, scene, simulated):
    meas, ca = simulated
    out, trace = str(tmp_path / "rec.scb"), str(tmp_path / "trace.csv")
    restarts = str(tmp_path / "restarts.csv")
    code = main(["reconstruct", "--meas", meas, "--ca", ca, "--net", "resnet", "--rho", "0.5", "--restarts", "2",
                 "--mode", "full", "--seed", "3", "--ref", scene, "--out", out, "--trace", trace,
                 "--restarts-out", restarts] + FAST_FIT)
    assert code == EXIT_OK
    assert cube_files.read_scube(out).dims == (16, 16, 4)
    table = pd.read_csv(trace)
    assert list(table.columns) == ["iteration", "loss", "psnr"]
    assert table["iteration"].tolist() == [0, 2, 4]
    summary = pd.read_csv(restarts)
    assert summary["restart"].tolist() == [0, 1]
    assert summary["final_loss"].min() == pytest.approx(table["loss"].iloc[-1], rel=1e-12)


@pytest.mark.parametrize("method", ["bp", "fista-dct"])
def test_baseline(tmp_path, simulated, method):
    meas, ca = simulated
    out = str(tmp_path / f"{method}.scb")
    assert main(["baseline", "--meas", meas, "--ca", ca, "--method", method, "--iters", "5", "--out", out]) == EXIT_OK
    assert cube_files.read_scube(out).dims == (16, 16, 4)


def test_metrics_on_identical_files(tmp_path, scene):
    out = str(tmp_path / "row.csv")
    assert main(["metrics", "--ref", scene, "--rec", scene, "--out", out]) == EXIT_OK
    row = pd.read_csv(out).iloc[0]
    assert row["psnr_db"] == 100.0
    assert row["ssim"] == 1.0
    assert row["sam_rad"] == 0.0


def test_metrics_keep_units_when_peak_is_not_one(tmp_path):
    bright = str(tmp_path / "bright.scb")
    unit = str(tmp_path / "unit.scb")
    cube = make_phantom(16, 16, 4, seed=2)
    cube_files.write_scube(bright, Tensor3(2.0 * cube.values))
    cube_files.write_scube(unit, cube)

    out = str(tmp_path / "row.csv")
    assert main(["metrics", "--ref", bright, "--rec", bright, "--out", out]) == EXIT_OK
    row = pd.read_csv(out).iloc[0]
    assert (row["psnr_db"], row["ssim"], row["sam_rad"]) == (100.0, 1.0, 0.0)

    assert main(["metrics", "--ref", bright, "--rec", unit, "--rec-normalized", "--out", out]) == EXIT_OK
    assert pd.read_csv(out).iloc[0]["psnr_db"] == 100.0


def test_sweep_rho_row_count(tmp_path, scene):
    out = str(tmp_path / "sweep.csv")
    code = main(["sweep-rho", "--scene", scene, "--rhos", "0.25,0.5,1.0", "--trials", "2", "--out", out] + FAST_FIT)
    assert code == EXIT_OK
    table = pd.read_csv(out)
    assert len(table) == 3 * 2
    assert sorted(table["rho"].unique()) == [0.25, 0.5, 1.0]


def test_grid_emits_twelve_blocks(tmp_path, scene):
    out, raw = str(tmp_path / "grid.csv"), str(tmp_path / "grid_raw.csv")
    code = main(["grid", "--scene", scene, "--shots", "1,2,3,4", "--snrs", "20,30,inf", "--trials", "1",
                 "--methods", "bp", "--out", out, "--raw-out", raw])
    assert code == EXIT_OK
    table = pd.read_csv(out, keep_default_na=False, dtype={"snr": str})
    assert len(table[["shots", "snr"]].drop_duplicates()) == 12
    assert len(table) == 12 * 3
    assert set(table["metric"]) == {"PSNR", "SSIM", "SAM"}
    assert len(pd.read_csv(raw)) == 12


def test_export_convert_and_signature(tmp_path, scene):
    pgm = str(tmp_path / "band.pgm")
    assert main(["export-band", "--scene", scene, "--band", "2", "--out", pgm]) == EXIT_OK
    assert open(pgm, "rb").read(2) == b"P5"

    csv_path, converted = str(tmp_path / "flat.csv"), str(tmp_path / "flat.scb")
    pd.DataFrame({"m": [0, 0, 1, 1], "n": [0, 0, 0, 0], "band": [0, 1, 0, 1],
                  "value": [0.25, 0.5, 0.75, 1.0]}).to_csv(csv_path, index=False)
    assert main(["convert", "--csv", csv_path, "--out", converted]) == EXIT_OK
    assert cube_files.read_scube(converted).values[:, 0, :].tolist() == [[0.25, 0.5], [0.75, 1.0]]

    signature = str(tmp_path / "signature.csv")
    assert main(["signature", "--cubes", scene, "--pixel", "3,4", "--out", signature]) == EXIT_OK
    table = pd.read_csv(signature)
    assert np.allclose(table["scene.scb"], cube_files.read_scube(scene).values[3, 4, :])
    assert main(["signature", "--cubes", scene, "--pixel", "30,4", "--out", signature]) == EXIT_ARGUMENT


def test_replay_checks_digests(tmp_path):
    out = str(tmp_path / "phantom.scb")
    log = str(tmp_path / "runs.jsonl")
    assert main(["--manifest", log, "phantom", "--dims", "8x8x3", "--seed", "5", "--out", out]) == EXIT_OK
    assert main(["replay", "--from-manifest", log, "--index", "0"]) == EXIT_OK

    records = manifest.read_records(log)
    records[0]["outputs"][out] = "0" * 64
    with open(log, "w", encoding="utf-8") as f:
        f.write(json.dumps(records[0]) + "\n")
    assert main(["replay", "--from-manifest", log, "--index", "0"]) == EXIT_NUMERICAL


def test_replay_pins_environment_defaults(tmp_path, monkeypatch):
    out = str(tmp_path / "env_seed.scb")
    log = str(tmp_path / "env_runs.jsonl")
    monkeypatch.setenv("CSI_DEFAULT_SEED", "5")
    monkeypatch.setenv("CSI_WORKERS", "2")
    assert main(["--manifest", log, "phantom", "--dims", "8x8x3", "--out", out]) == EXIT_OK
    argv = manifest.read_records(log)[0]["argv"]
    assert argv[:2] == ["--workers", "2"]
    assert argv[-2:] == ["--seed", "5"]

    monkeypatch.setenv("CSI_DEFAULT_SEED", "9")
    monkeypatch.setenv("CSI_WORKERS", "1")
    assert main(["replay", "--from-manifest", log, "--index", "0"]) == EXIT_OK


def test_error_exit_codes(tmp_path, capsys):
    assert main(["phantom", "--bogus"]) == EXIT_ARGUMENT
    assert "usage" in capsys.readouterr().err.lower()
    assert main(["phantom", "--dims", "8x8", "--out", str(tmp_path / "x.scb")]) == EXIT_ARGUMENT

    bad = tmp_path / "bad.scb"
    bad.write_bytes(b"XXXX" + bytes(16))
    assert main(["export-band", "--scene", str(bad), "--band", "0", "--out", str(tmp_path / "b.pgm")]) == EXIT_FORMAT
    assert main(["export-band", "--scene", str(tmp_path / "missing.scb"), "--band", "0",
                 "--out", str(tmp_path / "b.pgm")]) == EXIT_ARGUMENT


def test_launcher_runs_cli(tmp_path):
    out = str(tmp_path / "launched.scb")
    launcher = os.path.join(project_root, "csi_recon.py")
    result = subprocess.run([sys.executable, launcher, "phantom", "--dims", "4x4x2", "--out", out],
                            capture_output=True, text=True)
    assert result.returncode == 0, result.stderr
    assert cube_files.read_scube(out).dims == (4, 4, 2)


def main_tests():
    """Run all tests"""
    print("CLI Harness - Test Suite")
    print("=" * 50)
    return pytest.main([__file__, "-v"])


if __name__ == "__main__":
    sys.exit(main_tests())
