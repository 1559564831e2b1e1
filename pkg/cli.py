"""
Command-line front end for the colour Gabor edge detector.

Subcommands:
  detect      --input img --output edges.png
  eval        --pred edges.png --gt gt.png [--tol N] [--out scores.json]
  sweep       --dataset dir --gt-dir dir [--grid grid.json] --out report.csv [--summary s.json]
  noise       --input img --sigma 15 --seed 42 --output noisy.png
  esm-dump    --input img --out-dir dir
  synth       --out-dir dir [--count 10 --seed 0 --size 64]
  noise-bench --out bench.csv [--sigma 15 --seed 42 --size 64]

Every subcommand takes --config cfg.json, --jobs N and --verbose; detector
flags (--beta-low, --frequencies a,b, ...) override the config file.

Exit codes: 0 ok, 2 bad parameters, 3 I/O failure, 1 anything else.

Usage:
  python3 cli.py synth --out-dir data
  python3 cli.py sweep --dataset data/images --gt-dir data/gt --out report.csv --jobs 4
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import traceback
from dataclasses import replace
from typing import Callable, Dict, List, Optional, Sequence

import config
import image_io
import runlog
import synthetic
from config import ParameterError
from detector import detect_edges, edge_strength
from evaluate import (
    NoiseSpec,
    add_gaussian_noise,
    default_grid,
    default_tolerance,
    default_variants,
    f_measure,
    fom,
    match_edges,
    noise_benchmark,
    pr_sweep,
    precision_recall,
)
from run_config import RunConfig, config_from_dict, load_config, serialize_config, validate

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_PARAMS = 2
EXIT_IO = 3


# ── Argument parsing ───────────────────────────────────────────────────────

def _float_list(text: str) -> List[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _name_list(text: str) -> List[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def _global_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", default=None, help="run config JSON")
    p.add_argument("--jobs", type=int, default=config.JOBS, help="worker processes for sweep")
    p.add_argument("--verbose", action="store_true", help="log stage timings")
    return p


def _detector_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--beta-low", type=float)
    p.add_argument("--beta-up", type=float)
    p.add_argument("--orientations", type=int)
    p.add_argument("--frequencies", type=_float_list, help="e.g. 0.1,0.2")
    p.add_argument("--gamma", type=float)
    p.add_argument("--eta", type=float)
    p.add_argument("--window", type=int)
    p.add_argument("--connectivity", type=int)
    p.add_argument("--channels", type=_name_list, help="subset of L,a,b")
    p.add_argument("--nms-interpolation")
    p.add_argument("--nms-direction")
    p.add_argument("--no-nms-junctions", dest="nms_junctions", action="store_false", default=None,
                   help="plain NMS along the winning orientation only")
    p.add_argument("--convolution")
    p.add_argument("--srgb-gamma", action="store_true", default=None)
    return p


def build_parser() -> argparse.ArgumentParser:
    common, det = _global_flags(), _detector_flags()
    ap = argparse.ArgumentParser(prog="cli.py", description="Colour Gabor edge detection")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", parents=[common, det], help="detect edges in one image")
    p.add_argument("--input")
    p.add_argument("--output")

    p = sub.add_parser("eval", parents=[common], help="score a predicted edge map")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt")
    p.add_argument("--tol", type=int)
    p.add_argument("--out", help="also write the scores here")

    p = sub.add_parser("sweep", parents=[common, det], help="threshold sweep over a dataset")
    p.add_argument("--dataset")
    p.add_argument("--gt-dir")
    p.add_argument("--grid", help="JSON list of [beta_low, beta_up] pairs")
    p.add_argument("--tol", type=int)
    p.add_argument("--out", required=True, help="per-grid-point CSV")
    p.add_argument("--summary", help="summary JSON (default: next to --out)")

    p = sub.add_parser("noise", parents=[common], help="add seeded Gaussian noise")
    p.add_argument("--input")
    p.add_argument("--output")
    p.add_argument("--sigma", type=float)
    p.add_argument("--seed", type=int)

    p = sub.add_parser("esm-dump", parents=[common, det], help="write per-channel/scale ESMs")
    p.add_argument("--input")
    p.add_argument("--out-dir")

    p = sub.add_parser("synth", parents=[common], help="write a synthetic scene dataset")
    p.add_argument("--out-dir")
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--size", type=int, default=64)

    p = sub.add_parser("noise-bench", parents=[common, det], help="FOM of fused vs single-scale ESM under noise")
    p.add_argument("--out", required=True)
    p.add_argument("--summary", help="per-variant mean FOM JSON (default: next to --out)")
    p.add_argument("--sigma", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--tol", type=int)
    return ap


# ── Config merging ─────────────────────────────────────────────────────────

_GABOR_FLAGS = ("gamma", "eta", "frequencies", "orientations")
_DETECTOR_FLAGS = (
    "beta_low", "beta_up", "window", "connectivity", "channels",
    "nms_interpolation", "nms_direction", "nms_junctions", "convolution", "srgb_gamma",
)
_IO_FLAGS = {"input": "input", "output": "output", "gt": "gt", "dataset": "dataset",
             "gt_dir": "gt_dir", "out_dir": "out_dir"}


def _given(args: argparse.Namespace, names: Sequence[str]) -> Dict:
    return {n: getattr(args, n) for n in names if getattr(args, n, None) is not None}


def apply_overrides(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    """Explicit flags win over the config file; the result is re-validated."""
    gabor_kw = _given(args, _GABOR_FLAGS)
    if "frequencies" in gabor_kw:
        gabor_kw["frequencies"] = tuple(gabor_kw["frequencies"])
    det_kw = _given(args, _DETECTOR_FLAGS)
    if "channels" in det_kw:
        det_kw["channels"] = tuple(det_kw["channels"])
    detector = replace(cfg.detector, gabor=replace(cfg.detector.gabor, **gabor_kw), **det_kw)

    io_kw = {field: getattr(args, flag) for flag, field in _IO_FLAGS.items()
             if getattr(args, flag, None) is not None}
    io = replace(cfg.io, **io_kw)

    noise = cfg.noise
    noise_kw = _given(args, ("sigma", "seed"))
    if args.command in ("noise", "noise-bench"):
        noise = replace(noise or NoiseSpec(), **noise_kw)

    ev = cfg.eval
    if getattr(args, "tol", None) is not None:
        ev = replace(ev, tolerance=args.tol)

    merged = RunConfig(detector=detector, noise=noise, eval=ev, io=io)
    # paths from flags are checked when opened (I/O errors), not here
    return validate(merged, check_paths=False)


def _require(value: Optional[str], flag: str, field: str) -> str:
    if value is None:
        raise ParameterError(f"{flag} is required (or set {field} in the config)", [field])
    return value


def _sidecar(path: str, suffix: str = ".json") -> str:
    return os.path.splitext(path)[0] + suffix


def load_grid(path: str):
    """Grid file: a JSON list of [beta_low, beta_up] pairs, or {"grid": [...]}."""
    with open(path, "r", encoding="utf-8") as f:
        try:
            raw = json.load(f)
        except json.JSONDecodeError as exc:
            raise ParameterError(f"{path}: malformed JSON ({exc})", ["eval.grid"]) from exc
    if isinstance(raw, dict) and set(raw) == {"grid"}:
        raw = raw["grid"]
    return config_from_dict({"eval": {"grid": raw}}, check_paths=False).eval.grid_list()


# ── Subcommands ────────────────────────────────────────────────────────────

def _read_input(cfg: RunConfig):
    path = _require(cfg.io.input, "--input", "io.input")
    img = image_io.read_rgb(path)
    runlog.log(f"read {path} ({img.width}x{img.height})")
    return img


def cmd_detect(args: argparse.Namespace, cfg: RunConfig) -> int:
    img = _read_input(cfg)
    out = _require(cfg.io.output, "--output", "io.output")
    if cfg.noise is not None:
        img = add_gaussian_noise(img, cfg.noise)
        runlog.log(f"added noise sigma={cfg.noise.sigma:g} seed={cfg.noise.seed}")
    edges = detect_edges(img, cfg.detector)
    image_io.write_edge_map(out, edges)
    runlog.log(f"wrote {out}: {edges.count} edge pixels")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace, cfg: RunConfig) -> int:
    pred = image_io.read_edge_map(args.pred)
    gt = image_io.read_edge_map(_require(cfg.io.gt, "--gt", "io.gt"))
    tol = cfg.eval.tolerance
    if tol is None:
        tol = default_tolerance(gt.height, gt.width)
    counts = match_edges(pred, gt, tol)
    p, r = precision_recall(counts)
    scores = {"precision": p, "recall": r, "f": f_measure(p, r), "fom": fom(pred, gt)}
    print(json.dumps(scores, indent=2, sort_keys=True), flush=True)
    if args.out:
        image_io.write_json(args.out, scores)
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace, cfg: RunConfig) -> int:
    image_dir = _require(cfg.io.dataset, "--dataset", "io.dataset")
    gt_dir = _require(cfg.io.gt_dir, "--gt-dir", "io.gt_dir")
    if args.grid:
        grid = load_grid(args.grid)
    else:
        grid = cfg.eval.grid_list() or default_grid()

    names, dataset = [], []
    for name, img_path, gt_path in image_io.list_dataset(image_dir, gt_dir):
        img = image_io.read_rgb(img_path)
        if cfg.noise is not None:
            img = add_gaussian_noise(img, cfg.noise)
        dataset.append((img, image_io.read_edge_map(gt_path)))
        names.append(name)
    runlog.log(f"{len(dataset)} images x {len(grid)} grid points, jobs={args.jobs}")

    summary = pr_sweep(dataset, grid, cfg.detector, cfg.eval.tolerance, jobs=args.jobs, names=names)

    image_io.write_text(args.out, summary.table.to_csv(index=False, float_format=config.REPORT_FLOAT_FORMAT))
    summary_path = args.summary or _sidecar(args.out)
    payload = summary.to_json()
    payload["detector"] = cfg.detector.to_dict()
    payload["noise"] = None if cfg.noise is None else cfg.noise.to_dict()
    image_io.write_json(summary_path, payload)
    runlog.log(
        f"F_ODS={summary.f_ods:.4f} F_OIS={summary.f_ois:.4f} AP={summary.ap:.4f} R50={summary.r50:.4f}"
    )
    runlog.log(f"wrote {args.out} and {summary_path}")
    return EXIT_OK


def cmd_noise(args: argparse.Namespace, cfg: RunConfig) -> int:
    img = _read_input(cfg)
    out = _require(cfg.io.output, "--output", "io.output")
    image_io.write_rgb(out, add_gaussian_noise(img, cfg.noise))
    runlog.log(f"wrote {out} (sigma={cfg.noise.sigma:g} seed={cfg.noise.seed})")
    return EXIT_OK


def cmd_esm_dump(args: argparse.Namespace, cfg: RunConfig) -> int:
    img = _read_input(cfg)
    out_dir = _require(cfg.io.out_dir, "--out-dir", "io.out_dir")
    strength = edge_strength(img, cfg.detector)

    factors: Dict[str, float] = {}
    for (channel, freq), esm in zip(strength.esm_labels, strength.esms):
        fn = f"esm_{channel}_f{freq:g}.png"
        factors[fn] = image_io.write_esm_png(os.path.join(out_dir, fn), esm.strength)
    factors["esm_fused.png"] = image_io.write_esm_png(os.path.join(out_dir, "esm_fused.png"), strength.fused.strength)
    image_io.write_json(os.path.join(out_dir, "esm_scales.json"), factors)
    runlog.log(f"wrote {len(factors)} ESM images to {out_dir}")
    return EXIT_OK


def cmd_synth(args: argparse.Namespace, cfg: RunConfig) -> int:
    out_dir = _require(cfg.io.out_dir, "--out-dir", "io.out_dir")
    if args.count < 1 or args.size < 8:
        raise ParameterError("need --count >= 1 and --size >= 8", ["count", "size"])
    names = synthetic.write_dataset(out_dir, count=args.count, seed=args.seed, size=args.size)
    runlog.log(f"wrote {len(names)} scenes to {out_dir}/images and {out_dir}/gt")
    return EXIT_OK


def cmd_noise_bench(args: argparse.Namespace, cfg: RunConfig) -> int:
    shapes = synthetic.shapes(size=args.size)
    variants = default_variants(cfg.detector)
    table = noise_benchmark(shapes, variants, cfg.noise, cfg.eval.tolerance)

    image_io.write_text(args.out, table.to_csv(index=False, float_format=config.REPORT_FLOAT_FORMAT))
    means = table.groupby("variant", sort=False)["fom"].mean()
    summary_path = args.summary or _sidecar(args.out)
    image_io.write_json(summary_path, {
        "noise": cfg.noise.to_dict(),
        "mean_fom": {name: float(v) for name, v in means.items()},
    })
    for name, v in means.items():
        runlog.log(f"{name}: mean FOM {v:.4f}")
    return EXIT_OK


COMMANDS: Dict[str, Callable[[argparse.Namespace, RunConfig], int]] = {
    "detect": cmd_detect,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "noise": cmd_noise,
    "esm-dump": cmd_esm_dump,
    "synth": cmd_synth,
    "noise-bench": cmd_noise_bench,
}


# ── Main ───────────────────────────────────────────────────────────────────

def run(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors and 0 for --help
        return EXIT_PARAMS if exc.code else EXIT_OK

    runlog.set_context(args.command)
    runlog.set_verbose(args.verbose)
    try:
        if args.jobs < 1:
            raise ParameterError(f"--jobs must be >= 1, got {args.jobs}", ["jobs"])
        cfg = apply_overrides(load_config(args.config), args)
        runlog.debug(f"config: {json.dumps(serialize_config(cfg), sort_keys=True)}")
        return COMMANDS[args.command](args, cfg)
    except ParameterError as exc:
        runlog.log(f"ERROR: {exc}")
        return EXIT_PARAMS
    except OSError as exc:
        runlog.log(f"ERROR: {exc}")
        return EXIT_IO
    except Exception as exc:
        runlog.log(f"ERROR: unexpected failure: {exc}")
        traceback.print_exc()
        return EXIT_UNEXPECTED


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
