#!/usr/bin/env python3
"""
Compressive spectral imaging command-line harness

Simulates CASSI measurements, reconstructs cubes with the deep-prior solver
or the baselines, scores reconstructions and scripts the experiment
protocols (rank-factor sweep, noise/shot grid).

Usage:
python csi_cli.py phantom --dims 32x32x8 --blobs 6 --seed 1 --out scene.scb
python csi_cli.py simulate --scene scene.scb --shots 1 --snr inf --ca bernoulli --out y.sme --ca-out y.ca
python csi_cli.py reconstruct --meas y.sme --ca y.ca --net resnet --rho 0.5 --out rec.scb --trace trace.csv
python csi_cli.py metrics --ref scene.scb --rec rec.scb --out row.csv

Exit codes: 0 success, 2 argument error, 3 format error, 4 numerical failure.
"""

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np
import pandas as pd

# Add project root to Python path for src module imports
project_root = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
sys.path.insert(0, project_root)

from src.cli import protocols
from src.config import configure_logging, load_settings
from src.errors import (ArgumentError, CSIError, FormatError, NumericalError, OracleRefusalError,
                        ShapeError, UsageError)
from src.evaluation.metrics import metrics_row, metrics_table
from src.priors.generator_net import ARCHITECTURES
from src.sensing.cassi_model import BINARY, COLORED
from src.solvers.baseline import back_projection, fista_dct
from src.solvers.deep_prior_solver import DIP_FIXED_INPUT, FULL, FitConfig, derive_seed, fit
from src.storage import cube_files, manifest
from src.storage.phantom import make_phantom
from src.tensors.tensor_core import Tensor3

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ARGUMENT = 2
EXIT_FORMAT = 3
EXIT_NUMERICAL = 4

CA_KINDS = {"bernoulli": BINARY, "colored": COLORED}
MODES = {"full": FULL, "dip": DIP_FIXED_INPUT}


def parse_snr(text: str) -> float:
    if text.strip().lower() in ("inf", "+inf", "infinity"):
        return float("inf")
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"SNR must be a number of dB or 'inf', got {text!r}")


def parse_dims(text: str):
    try:
        dims = tuple(int(part) for part in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"dims must look like MxNxL, got {text!r}")
    if len(dims) != 3 or min(dims) < 1:
        raise argparse.ArgumentTypeError(f"dims must be three positive extents MxNxL, got {text!r}")
    return dims


def parse_list(cast):
    def parse(text: str):
        try:
            return [cast(part) for part in text.split(",") if part.strip()]
        except (ValueError, argparse.ArgumentTypeError):
            raise argparse.ArgumentTypeError(f"invalid list {text!r}")
    return parse


def parse_pixel(text: str):
    values = parse_list(int)(text)
    if len(values) != 2:
        raise argparse.ArgumentTypeError(f"pixel must be m,n, got {text!r}")
    return tuple(values)


def add_fit_arguments(parser: argparse.ArgumentParser, restarts: int = 5) -> None:
    parser.add_argument("--net", choices=ARCHITECTURES, default="resnet", help="Generator architecture")
    parser.add_argument("--width", type=int, help="Hidden channel width (default 7 resnet, 16 autoencoder)")
    parser.add_argument("--rho", type=float, default=0.5, help="Tucker rank factor in (0, 1]")
    parser.add_argument("--iters", type=int, default=3000, help="Optimizer iterations per restart")
    parser.add_argument("--lr", type=float, default=1e-3, help="Learning rate")
    parser.add_argument("--restarts", type=int, default=restarts, help="Independent seeded restarts")
    parser.add_argument("--optimizer", choices=("adam", "sgd"), default="adam")
    parser.add_argument("--log-stride", type=int, default=10, help="Residual trace stride")
    parser.add_argument("--early-stop", type=float, help="Stop when loss <= this fraction of the first loss")


def fit_config(args, mode: str = FULL) -> FitConfig:
    return FitConfig(
        iterations=args.iters, learning_rate=args.lr, rho=args.rho, arch=args.net, width=args.width,
        restarts=args.restarts, seed=args.seed, mode=mode, log_stride=args.log_stride,
        optimizer=args.optimizer, early_stop_tol=args.early_stop, workers=args.workers,
    )


def build_parser() -> argparse.ArgumentParser:
    settings = load_settings()
    parser = argparse.ArgumentParser(
        prog="csi_recon",
        description="Compressive spectral imaging: CASSI simulation and deep-prior reconstruction",
    )
    parser.add_argument("--manifest", help="Manifest file (JSON lines); default <output>.manifest.jsonl")
    parser.add_argument("--log-level", default=settings.log_level, help="Logging level")
    parser.add_argument("--workers", type=int, default=settings.workers, help="Threads for restarts/cells")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom", help="Generate a synthetic blob phantom")
    p.add_argument("--dims", type=parse_dims, required=True, help="MxNxL")
    p.add_argument("--blobs", type=int, default=6)
    p.add_argument("--seed", type=int, default=settings.default_seed)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_phantom)

    p = sub.add_parser("simulate", help="Simulate CASSI measurements of a scene")
    p.add_argument("--scene", required=True)
    p.add_argument("--shots", type=int, default=1)
    p.add_argument("--snr", type=parse_snr, default=float("inf"), help="dB or inf")
    p.add_argument("--ca", choices=tuple(CA_KINDS), default="bernoulli")
    p.add_argument("--transmittance", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=settings.default_seed)
    p.add_argument("--no-normalize", dest="normalize", action="store_false")
    p.add_argument("--out", required=True)
    p.add_argument("--ca-out", required=True)
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("reconstruct", help="Deep-prior reconstruction from measurements")
    p.add_argument("--meas", required=True)
    p.add_argument("--ca", required=True)
    add_fit_arguments(p)
    p.add_argument("--mode", choices=tuple(MODES), default="full")
    p.add_argument("--seed", type=int, default=settings.default_seed)
    p.add_argument("--ref", help="Ground-truth cube; adds PSNR to the trace")
    p.add_argument("--out", required=True)
    p.add_argument("--trace", help="Residual trace CSV")
    p.add_argument("--restarts-out", help="Per-restart final losses CSV")
    p.set_defaults(handler=cmd_reconstruct)

    p = sub.add_parser("baseline", help="Back-projection or FISTA-DCT reconstruction")
    p.add_argument("--meas", required=True)
    p.add_argument("--ca", required=True)
    p.add_argument("--method", choices=("bp", "fista-dct"), default="fista-dct")
    p.add_argument("--lambda", dest="lam", type=float, help="l1 weight (default 0.01*||H^T y||_inf in basis)")
    p.add_argument("--iters", type=int, default=300)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_baseline)

    p = sub.add_parser("metrics", help="PSNR / SSIM / SAM of a reconstruction")
    p.add_argument("--ref", required=True)
    p.add_argument("--rec", required=True)
    p.add_argument("--no-normalize", dest="normalize", action="store_false")
    p.add_argument("--rec-normalized", action="store_true",
                   help="Reconstruction is already in normalized units (reconstruct/baseline output)")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_metrics)

    p = sub.add_parser("sweep-rho", help="Rank-factor sweep (box-plot data)")
    p.add_argument("--scene", required=True)
    p.add_argument("--rhos", type=parse_list(float), default=[r / 10 for r in range(1, 11)])
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--nets", type=parse_list(str), default=["resnet"])
    p.add_argument("--shots", type=int, default=1)
    p.add_argument("--snr", type=parse_snr, default=float("inf"))
    p.add_argument("--ca", choices=tuple(CA_KINDS), default="bernoulli")
    p.add_argument("--transmittance", type=float, default=0.5)
    add_fit_arguments(p, restarts=1)
    p.add_argument("--seed", type=int, default=settings.default_seed)
    p.add_argument("--no-normalize", dest="normalize", action="store_false")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_sweep_rho)

    p = sub.add_parser("grid", help="Methods over shot counts and noise levels")
    p.add_argument("--scene", required=True)
    p.add_argument("--shots", type=parse_list(int), default=[1, 2, 3, 4])
    p.add_argument("--snrs", type=parse_list(parse_snr), default=[20.0, 30.0, float("inf")])
    p.add_argument("--trials", type=int, default=3)
    p.add_argument("--methods", type=parse_list(str), default=["prop"])
    p.add_argument("--ca", choices=tuple(CA_KINDS), default="bernoulli")
    p.add_argument("--transmittance", type=float, default=0.5)
    add_fit_arguments(p, restarts=1)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--fista-iters", type=int, default=300)
    p.add_argument("--seed", type=int, default=settings.default_seed)
    p.add_argument("--no-normalize", dest="normalize", action="store_false")
    p.add_argument("--out", required=True)
    p.add_argument("--raw-out", help="Per-trial rows CSV")
    p.set_defaults(handler=cmd_grid)

    p = sub.add_parser("export-band", help="Export one band as 16-bit PGM")
    p.add_argument("--scene", required=True)
    p.add_argument("--band", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_export_band)

    p = sub.add_parser("convert", help="Flat CSV (m,n,band,value) to SCB1")
    p.add_argument("--csv", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_convert)

    p = sub.add_parser("signature", help="Spectral signature at one pixel of one or more cubes")
    p.add_argument("--cubes", nargs="+", required=True)
    p.add_argument("--pixel", type=parse_pixel, required=True, help="m,n (0-based)")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_signature)

    p = sub.add_parser("replay", help="Re-run a manifest record and compare output digests")
    p.add_argument("--from-manifest", dest="source", required=True)
    p.add_argument("--index", type=int, default=-1)
    p.set_defaults(handler=cmd_replay)
    return parser


# Commands return (exit code, input files, output files)

def cmd_phantom(args):
    M, N, L = args.dims
    cube = make_phantom(M, N, L, args.blobs, args.seed)
    cube_files.write_scube(args.out, cube)
    print(f"✅ Phantom {M}x{N}x{L} with {args.blobs} blobs written to {args.out}")
    return EXIT_OK, [], [args.out]


def cmd_simulate(args):
    scene, scale = cube_files.load_scene(args.scene, args.normalize)
    aperture, measurements = protocols.simulate(
        scene, args.shots, args.snr, CA_KINDS[args.ca], args.transmittance,
        derive_seed(args.seed, 0), derive_seed(args.seed, 1))
    cube_files.write_smea(args.out, measurements)
    cube_files.write_aperture(args.ca_out, aperture)
    print(f"✅ {args.shots} shot(s) of {scene.dims} at SNR {protocols.snr_label(args.snr)} dB")
    print(f"📁 Measurements: {args.out}")
    print(f"📁 Coded apertures: {args.ca_out}")
    outputs = [args.out, args.ca_out]
    if args.normalize:
        outputs.append(cube_files.sidecar_path(args.scene))
    return EXIT_OK, [args.scene], outputs


def load_problem(meas_path, ca_path):
    measurements = cube_files.read_smea(meas_path)
    aperture = cube_files.read_aperture(ca_path)
    M, N = aperture.spatial_dims
    L = measurements.cols - N + 1
    if L < 1:
        raise ShapeError(f"detector width {measurements.cols} is narrower than the aperture width {N}")
    dims = (M, N, L)
    measurements.check_consistent(aperture, dims)
    return measurements, aperture, dims


def cmd_reconstruct(args):
    measurements, aperture, dims = load_problem(args.meas, args.ca)
    protocols.check_compression(aperture.shots, dims)
    reference = cube_files.load_scene(args.ref)[0] if args.ref else None
    cfg = fit_config(args, MODES[args.mode])
    print(f"🚀 Reconstructing {dims} from {aperture.shots} shot(s): {cfg.arch}, rho={cfg.rho}, "
          f"{cfg.iterations} iterations x {cfg.restarts} restarts ({cfg.mode})")
    result = fit(measurements, aperture, dims, cfg, reference)
    cube_files.write_scube(args.out, result.reconstruction)
    outputs = [args.out]
    if args.trace:
        result.trace.to_csv(args.trace, index=False)
        outputs.append(args.trace)
    summary = result.restart_summary()
    for row in summary.itertuples(index=False):
        marker = "⭐" if row.restart == result.best_restart else "  "
        print(f"  {marker} restart {row.restart}: final loss {row.final_loss:.6e}")
    if args.restarts_out:
        summary.to_csv(args.restarts_out, index=False)
        outputs.append(args.restarts_out)
    print(f"✅ Best restart {result.best_restart} with loss {result.final_loss:.6e} "
          f"({result.wall_time:.1f}s)")
    print(f"📁 Reconstruction: {args.out}")
    inputs = [args.meas, args.ca] + ([args.ref] if args.ref else [])
    return EXIT_OK, inputs, outputs


def cmd_baseline(args):
    measurements, aperture, dims = load_problem(args.meas, args.ca)
    if args.method == "bp":
        cube = back_projection(measurements, aperture, dims)
    else:
        cube = fista_dct(measurements, aperture, dims, args.lam, args.iters)
    cube_files.write_scube(args.out, cube)
    print(f"✅ {args.method} reconstruction written to {args.out}")
    return EXIT_OK, [args.meas, args.ca], [args.out]


def cmd_metrics(args):
    ref, scale = cube_files.load_scene(args.ref, args.normalize)
    rec = cube_files.read_scube(args.rec)
    if not args.rec_normalized:
        # same units as the reference file
        rec = Tensor3(rec.values * scale)
    row = metrics_row(Path(args.rec).name, ref, rec)
    metrics_table([row]).to_csv(args.out, index=False)
    print(f"📊 PSNR {row['psnr_db']:.2f} dB | SSIM {row['ssim']:.4f} | SAM {row['sam_rad']:.4f} rad")
    outputs = [args.out] + ([cube_files.sidecar_path(args.ref)] if args.normalize else [])
    return EXIT_OK, [args.ref, args.rec], outputs


def cmd_sweep_rho(args):
    scene = cube_files.load_scene(args.scene, args.normalize)[0]
    cfg = fit_config(args)
    table = protocols.sweep_rho(scene, args.rhos, args.trials, cfg, nets=args.nets, shots=args.shots,
                                snr_db=args.snr, kind=CA_KINDS[args.ca],
                                transmittance=args.transmittance, workers=args.workers)
    table.to_csv(args.out, index=False)
    best = table.groupby(["net", "rho"])["psnr_db"].median()
    for (net, rho), value in best.items():
        print(f"  {net:12s} rho={rho:<5g} median PSNR {value:.2f} dB")
    print(f"✅ {len(table)} sweep rows written to {args.out}")
    return EXIT_OK, [args.scene], [args.out]


def cmd_grid(args):
    scene = cube_files.load_scene(args.scene, args.normalize)[0]
    cfg = fit_config(args)
    summary, raw = protocols.noise_shot_grid(
        scene, args.shots, args.snrs, args.trials, cfg, methods=args.methods, kind=CA_KINDS[args.ca],
        transmittance=args.transmittance,
        baseline=protocols.BaselineOptions(args.lam, args.fista_iters), workers=args.workers)
    summary.to_csv(args.out, index=False)
    outputs = [args.out]
    if args.raw_out:
        raw.to_csv(args.raw_out, index=False)
        outputs.append(args.raw_out)
    blocks = len(args.shots) * len(args.snrs)
    print(f"✅ {blocks} configuration blocks written to {args.out}")
    return EXIT_OK, [args.scene], outputs


def cmd_export_band(args):
    cube = cube_files.read_scube(args.scene)
    cube_files.export_band(args.out, cube, args.band)
    print(f"✅ Band {args.band} exported to {args.out}")
    return EXIT_OK, [args.scene], [args.out]


def cmd_convert(args):
    cube = cube_files.convert_csv(args.csv)
    cube_files.write_scube(args.out, cube)
    print(f"✅ Converted {args.csv} to {cube.dims} cube {args.out}")
    return EXIT_OK, [args.csv], [args.out]


def cmd_signature(args):
    m, n = args.pixel
    columns = {}
    L = None
    for path in args.cubes:
        cube = cube_files.read_scube(path)
        M, N, bands = cube.dims
        if not (0 <= m < M and 0 <= n < N):
            raise ArgumentError(f"pixel {(m, n)} outside {path} extent {(M, N)}")
        if L is not None and bands != L:
            raise ShapeError(f"{path} has {bands} bands, expected {L}")
        L = bands
        columns[Path(path).name] = cube.values[m, n, :]
    table = pd.DataFrame({"band": np.arange(L), **columns})
    table.to_csv(args.out, index=False)
    print(f"✅ Signature at {(m, n)} of {len(args.cubes)} cube(s) written to {args.out}")
    return EXIT_OK, list(args.cubes), [args.out]


def cmd_replay(args):
    records = manifest.read_records(args.source)
    if not records:
        raise ArgumentError(f"{args.source} holds no records")
    try:
        record = records[args.index]
    except IndexError:
        raise ArgumentError(f"{args.source} has {len(records)} record(s), no index {args.index}")
    print(f"🔁 Replaying: {' '.join(record['argv'])}")
    code = main(record["argv"])
    if code != EXIT_OK:
        return code, [args.source], []
    mismatched = [path for path, digest in record["outputs"].items()
                  if manifest.file_digest(path) != digest]
    if mismatched:
        for path in mismatched:
            print(f"❌ Output differs from the recorded run: {path}")
        return EXIT_NUMERICAL, [args.source], []
    print(f"✅ All {len(record['outputs'])} output(s) are bit-identical to the recorded run")
    return EXIT_OK, [args.source], []


def _has_flag(argv: List[str], flag: str) -> bool:
    return any(a == flag or a.startswith(flag + "=") for a in argv)


def pinned_argv(argv: List[str], args: argparse.Namespace) -> List[str]:
    """argv with the environment-dependent seed and worker defaults written out"""
    pinned = list(argv)
    if not _has_flag(pinned, "--workers"):
        pinned = ["--workers", str(args.workers)] + pinned
    if getattr(args, "seed", None) is not None and not _has_flag(pinned, "--seed"):
        pinned += ["--seed", str(args.seed)]
    return pinned


def main(argv: Optional[List[str]] = None) -> int:
    """Run one CLI command and return its exit code"""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_ARGUMENT
    configure_logging(args.log_level.upper())

    try:
        code, inputs, outputs = args.handler(args)
    except (ArgumentError, ShapeError, UsageError, OracleRefusalError) as e:
        print(f"❌ Argument error: {e}", file=sys.stderr)
        return EXIT_ARGUMENT
    except FormatError as e:
        print(f"❌ Format error: {e}", file=sys.stderr)
        return EXIT_FORMAT
    except NumericalError as e:
        print(f"❌ Numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except FileNotFoundError as e:
        print(f"❌ File not found: {e.filename}", file=sys.stderr)
        return EXIT_ARGUMENT
    except CSIError as e:
        logger.exception("Internal consistency failure")
        print(f"❌ {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_NUMERICAL

    if args.command != "replay" and outputs:
        manifest_path = args.manifest or f"{outputs[0]}.manifest.jsonl"
        record = manifest.build_record(args.command, pinned_argv(argv, args), vars(args), inputs, outputs)
        manifest.append_record(manifest_path, record)
    return code


if __name__ == "__main__":
    sys.exit(main())
