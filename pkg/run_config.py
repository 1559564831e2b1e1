"""
Run configuration: JSON file <-> dataclasses, defaults filled, validated.

Layout (every key optional):

{
  "detector": {"gabor": {"gamma", "eta", "frequencies", "orientations", "truncation"},
               "window", "beta_low", "beta_up", "connectivity", "nms_interpolation",
               "nms_direction", "channels", "srgb_gamma", "convolution"},
  "noise":    {"sigma", "seed"} or null,
  "eval":     {"tolerance": int or null, "grid": [[beta_low, beta_up], ...] or null},
  "io":       {"input", "output", "gt", "dataset", "gt_dir", "out_dir"}
}

Problems are reported together, each with its field path
(`detector.beta_low`, `eval.grid[3]`, ...).
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, List, Optional, Tuple

from config import ParameterError
from detector import DetectorConfig
from evaluate import Grid, NoiseSpec, validate_grid
from gabor import GaborParams

Problems = List[Tuple[str, str]]


@dataclass(frozen=True)
class EvalConfig:
    tolerance: Optional[int] = None
    grid: Optional[Tuple[Tuple[float, float], ...]] = None

    def grid_list(self) -> Optional[Grid]:
        return None if self.grid is None else [tuple(p) for p in self.grid]


@dataclass(frozen=True)
class IoConfig:
    input: Optional[str] = None
    output: Optional[str] = None
    gt: Optional[str] = None
    dataset: Optional[str] = None
    gt_dir: Optional[str] = None
    out_dir: Optional[str] = None


@dataclass(frozen=True)
class RunConfig:
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    noise: Optional[NoiseSpec] = None
    eval: EvalConfig = field(default_factory=EvalConfig)
    io: IoConfig = field(default_factory=IoConfig)


# ── parsing helpers ────────────────────────────────────────────────────────

def _section(raw: Any, path: str, allowed, errs: Problems) -> Dict:
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        errs.append((path, "must be a JSON object"))
        return {}
    for key in sorted(set(raw) - set(allowed)):
        errs.append((f"{path}.{key}" if path else key, "unknown key"))
    return raw


def _number(raw: Dict, key: str, default, path: str, errs: Problems, integer: bool = False):
    if key not in raw:
        return default
    v = raw[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        errs.append((f"{path}.{key}", "must be a number"))
        return default
    if integer:
        if int(v) != v:
            errs.append((f"{path}.{key}", "must be an integer"))
            return default
        return int(v)
    return float(v)


def _string(raw: Dict, key: str, default, path: str, errs: Problems):
    if key not in raw or raw[key] is None:
        return default
    if not isinstance(raw[key], str):
        errs.append((f"{path}.{key}", "must be a string"))
        return default
    return raw[key]


def _flag(raw: Dict, key: str, default: bool, path: str, errs: Problems) -> bool:
    if key not in raw:
        return default
    if not isinstance(raw[key], bool):
        errs.append((f"{path}.{key}", "must be true or false"))
        return default
    return raw[key]


def _names(d) -> List[str]:
    return [f.name for f in fields(d)]


def _parse_gabor(raw: Any, path: str, errs: Problems) -> GaborParams:
    d = GaborParams()
    raw = _section(raw, path, _names(GaborParams), errs)
    freqs = d.frequencies
    if "frequencies" in raw:
        v = raw["frequencies"]
        if (not isinstance(v, list)
                or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in v)):
            errs.append((f"{path}.frequencies", "must be a list of numbers"))
        else:
            freqs = tuple(float(x) for x in v)
    return GaborParams(
        gamma=_number(raw, "gamma", d.gamma, path, errs),
        eta=_number(raw, "eta", d.eta, path, errs),
        frequencies=freqs,
        orientations=_number(raw, "orientations", d.orientations, path, errs, integer=True),
        truncation=_number(raw, "truncation", d.truncation, path, errs),
    )


def _parse_detector(raw: Any, path: str, errs: Problems) -> DetectorConfig:
    d = DetectorConfig()
    raw = _section(raw, path, _names(DetectorConfig), errs)
    channels = d.channels
    if "channels" in raw:
        v = raw["channels"]
        if not isinstance(v, list) or any(not isinstance(x, str) for x in v):
            errs.append((f"{path}.channels", "must be a list of channel names"))
        else:
            channels = tuple(v)
    return DetectorConfig(
        gabor=_parse_gabor(raw.get("gabor"), f"{path}.gabor", errs),
        window=_number(raw, "window", d.window, path, errs, integer=True),
        beta_low=_number(raw, "beta_low", d.beta_low, path, errs),
        beta_up=_number(raw, "beta_up", d.beta_up, path, errs),
        connectivity=_number(raw, "connectivity", d.connectivity, path, errs, integer=True),
        nms_interpolation=_string(raw, "nms_interpolation", d.nms_interpolation, path, errs),
        nms_direction=_string(raw, "nms_direction", d.nms_direction, path, errs),
        nms_junctions=_flag(raw, "nms_junctions", d.nms_junctions, path, errs),
        channels=channels,
        srgb_gamma=_flag(raw, "srgb_gamma", d.srgb_gamma, path, errs),
        convolution=_string(raw, "convolution", d.convolution, path, errs),
    )


def _parse_noise(raw: Any, path: str, errs: Problems) -> Optional[NoiseSpec]:
    if raw is None:
        return None
    d = NoiseSpec()
    raw = _section(raw, path, _names(NoiseSpec), errs)
    return NoiseSpec(
        sigma=_number(raw, "sigma", d.sigma, path, errs),
        seed=_number(raw, "seed", d.seed, path, errs, integer=True),
    )


def _parse_eval(raw: Any, path: str, errs: Problems) -> EvalConfig:
    raw = _section(raw, path, _names(EvalConfig), errs)
    tol = None
    if raw.get("tolerance") is not None:
        tol = _number(raw, "tolerance", None, path, errs, integer=True)
    grid = None
    if raw.get("grid") is not None:
        v = raw["grid"]
        ok = isinstance(v, list) and all(
            isinstance(p, list) and len(p) == 2
            and all(not isinstance(x, bool) and isinstance(x, (int, float)) for x in p)
            for p in v
        )
        if not ok:
            errs.append((f"{path}.grid", "must be a list of [beta_low, beta_up] pairs"))
        else:
            grid = tuple((float(lo), float(up)) for lo, up in v)
    return EvalConfig(tolerance=tol, grid=grid)


def _parse_io(raw: Any, path: str, errs: Problems) -> IoConfig:
    raw = _section(raw, path, _names(IoConfig), errs)
    return IoConfig(**{k: _string(raw, k, None, path, errs) for k in _names(IoConfig)})


# ── public API ─────────────────────────────────────────────────────────────

def problems(cfg: RunConfig, check_paths: bool = True) -> Problems:
    errs = cfg.detector.errors("detector")
    if cfg.noise is not None:
        errs += cfg.noise.errors("noise")
    if cfg.eval.tolerance is not None and cfg.eval.tolerance < 0:
        errs.append(("eval.tolerance", "must be >= 0"))
    if cfg.eval.grid is not None:
        try:
            validate_grid(cfg.eval.grid_list())
        except ParameterError as exc:
            errs += [(f, str(exc)) for f in exc.fields]
    if check_paths:
        for key in ("input", "gt", "dataset", "gt_dir"):
            p = getattr(cfg.io, key)
            if p is not None and not os.path.exists(p):
                errs.append((f"io.{key}", f"path does not exist: {p}"))
    return errs


def validate(cfg: RunConfig, check_paths: bool = True) -> RunConfig:
    errs = problems(cfg, check_paths)
    if errs:
        raise ParameterError(
            "invalid configuration: " + "; ".join(f"{p} {w}" for p, w in errs),
            [p for p, _ in errs],
        )
    return cfg


def config_from_dict(raw: Any, check_paths: bool = True) -> RunConfig:
    errs: Problems = []
    top = _section(raw, "", _names(RunConfig), errs)
    cfg = RunConfig(
        detector=_parse_detector(top.get("detector"), "detector", errs),
        noise=_parse_noise(top.get("noise"), "noise", errs),
        eval=_parse_eval(top.get("eval"), "eval", errs),
        io=_parse_io(top.get("io"), "io", errs),
    )
    if errs:
        raise ParameterError(
            "invalid configuration: " + "; ".join(f"{p} {w}" for p, w in errs),
            [p for p, _ in errs],
        )
    return validate(cfg, check_paths)


def load_config(path: Optional[str], check_paths: bool = True) -> RunConfig:
    """Parse and validate a JSON config; None gives the defaults."""
    if path is None:
        return validate(RunConfig(), check_paths)
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except json.JSONDecodeError as exc:
        raise ParameterError(f"{path}: malformed JSON ({exc})", ["config"]) from exc
    return config_from_dict(raw, check_paths)


def serialize_config(cfg: RunConfig) -> Dict:
    return {
        "detector": cfg.detector.to_dict(),
        "noise": None if cfg.noise is None else cfg.noise.to_dict(),
        "eval": {
            "tolerance": cfg.eval.tolerance,
            "grid": None if cfg.eval.grid is None else [list(p) for p in cfg.eval.grid],
        },
        "io": asdict(cfg.io),
    }
