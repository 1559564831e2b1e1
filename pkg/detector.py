"""
Colour Gabor edge detector.

Pipeline:
  1. RGB -> L*a*b*
  2. per channel, per scale ESM (max over orientations); fuse all of them
  3. contrast equalization against the global and local mean strength
  4. non-maxima suppression along the winning orientation, keeping the
     ridges of a competing orientation at junctions
  5. T_low / T_up from percentiles of the equalized ESM
  6. hysteresis: strong pixels (> T_up) plus candidates (> T_low) connected to them

Stages 1-4 do not depend on the thresholds, so they are exposed separately
(`edge_strength`) from 5-6 (`threshold_edges`); threshold sweeps run the
expensive half once per image.

NMS convention: theta_k is the carrier (wave vector) direction, which is the
edge normal for the orientation that wins on an edge, so neighbours are
sampled along theta_k itself ("carrier"). "carrier+90" samples across it.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import ndimage

import config
import runlog
from colorspace import LabImage, RgbImage, rgb_to_lab
from config import ParameterError
from esm import (
    EqualizedEsm,
    EsmMap,
    OrientationMap,
    contrast_equalize,
    esm_from_magnitudes,
    fuse,
    fused_orientation,
    orientation_magnitudes,
)
from gabor import GaborParams, build_bank, kernels_at_scale

NMS_INTERPOLATIONS = ("nearest", "linear")
NMS_DIRECTIONS = ("carrier", "carrier+90")
CONV_METHODS = ("direct", "fft", "auto")

# (drow, dcol) for the four compass axes, indexed by round(angle / 45deg) mod 4
_COMPASS = ((0, 1), (1, 1), (1, 0), (1, -1))

# equalized ESM with a relative spread below this is treated as flat
_FLAT_RTOL = 1e-9

# junction NMS: competing orientation response relative to the winner's
JUNCTION_RATIO = 0.5


@dataclass(frozen=True)
class DetectorConfig:
    gabor: GaborParams = field(default_factory=GaborParams)
    window: int = 7
    beta_low: float = 0.70
    beta_up: float = 0.90
    connectivity: int = 8
    nms_interpolation: str = "nearest"
    nms_direction: str = "carrier"
    nms_junctions: bool = True
    channels: Tuple[str, ...] = config.LAB_CHANNELS
    srgb_gamma: bool = False
    convolution: str = field(default_factory=lambda: config.CONV_METHOD)

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))

    def errors(self, prefix: str = "detector") -> List[Tuple[str, str]]:
        errs = self.gabor.errors(f"{prefix}.gabor")
        if int(self.window) != self.window or self.window < 3 or self.window % 2 == 0:
            errs.append((f"{prefix}.window", "must be an odd integer >= 3"))
        if not (0.0 < self.beta_low < self.beta_up < 1.0):
            errs.append((f"{prefix}.beta_low", "need 0 < beta_low < beta_up < 1"))
            errs.append((f"{prefix}.beta_up", "need 0 < beta_low < beta_up < 1"))
        if self.connectivity not in (4, 8):
            errs.append((f"{prefix}.connectivity", "must be 4 or 8"))
        if self.nms_interpolation not in NMS_INTERPOLATIONS:
            errs.append((f"{prefix}.nms_interpolation", f"must be one of {NMS_INTERPOLATIONS}"))
        if self.nms_direction not in NMS_DIRECTIONS:
            errs.append((f"{prefix}.nms_direction", f"must be one of {NMS_DIRECTIONS}"))
        if (not self.channels or len(set(self.channels)) != len(self.channels)
                or any(c not in config.LAB_CHANNELS for c in self.channels)):
            errs.append((f"{prefix}.channels", f"must be distinct names from {config.LAB_CHANNELS}"))
        if self.convolution not in CONV_METHODS:
            errs.append((f"{prefix}.convolution", f"must be one of {CONV_METHODS}"))
        return errs

    def validate(self, prefix: str = "detector") -> None:
        errs = self.errors(prefix)
        if errs:
            raise ParameterError(
                "; ".join(f"{path} {why}" for path, why in errs),
                [path for path, _ in errs],
            )

    def to_dict(self) -> Dict:
        d = asdict(self)
        d["gabor"] = self.gabor.to_dict()
        d["channels"] = list(self.channels)
        return d

    def with_thresholds(self, beta_low: float, beta_up: float) -> "DetectorConfig":
        return replace(self, beta_low=beta_low, beta_up=beta_up)


@dataclass(frozen=True)
class EdgeMap:
    edges: np.ndarray = field(repr=False)

    @property
    def height(self) -> int:
        return self.edges.shape[0]

    @property
    def width(self) -> int:
        return self.edges.shape[1]

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.edges))

    @classmethod
    def empty(cls, height: int, width: int) -> "EdgeMap":
        return cls(np.zeros((height, width), dtype=bool))


@dataclass
class StrengthResult:
    """Everything `edge_strength` computes; thresholds are applied later."""
    lab: LabImage
    esm_labels: List[Tuple[str, float]]          # (channel, frequency) per ESM
    esms: List[EsmMap]
    fused: EsmMap
    orientation: OrientationMap
    equalized: EqualizedEsm
    thinned: np.ndarray
    flat: bool

    @property
    def shape(self) -> Tuple[int, int]:
        return self.thinned.shape


# ── NMS ────────────────────────────────────────────────────────────────────

def _neighbours(
    values: np.ndarray,
    k: np.ndarray,
    orientations: int,
    interpolation: str,
    direction: str,
) -> Tuple[np.ndarray, np.ndarray]:
    """(forward, backward) samples of `values` one step along theta_k per pixel."""
    h, w = values.shape
    if interpolation == "nearest":
        # quarter turns as exact rationals: 4k/K (+2 for carrier+90)
        quarter = 4.0 * k / orientations
        if direction == "carrier+90":
            quarter = quarter + 2.0
        axis = np.rint(quarter).astype(np.int64) % 4
        padded = np.pad(values, 1, mode="symmetric")
        rows, cols = np.mgrid[0:h, 0:w]
        forward = np.empty_like(values)
        backward = np.empty_like(values)
        for a, (dr, dc) in enumerate(_COMPASS):
            sel = axis == a
            r, c = rows[sel] + 1, cols[sel] + 1
            forward[sel] = padded[r + dr, c + dc]
            backward[sel] = padded[r - dr, c - dc]
        return forward, backward

    angles = np.pi * k / orientations
    if direction == "carrier+90":
        angles = angles + np.pi / 2
    rows, cols = np.mgrid[0:h, 0:w].astype(np.float64)
    dr, dc = np.sin(angles), np.cos(angles)
    forward = ndimage.map_coordinates(values, [rows + dr, cols + dc], order=1, mode="reflect")
    backward = ndimage.map_coordinates(values, [rows - dr, cols - dc], order=1, mode="reflect")
    return forward, backward


def _junction_ridges(orient: OrientationMap, interpolation: str, direction: str) -> np.ndarray:
    """
    Pixels on the ridge of a second, clearly different orientation.

    Near a junction the stronger edge wins k_star on the first pixels of the
    weaker arm, and NMS along the stronger edge's normal removes them, which
    cuts the weaker arm off from the junction. A pixel is kept here when some
    orientation j at least 45 degrees from k_star has response >= JUNCTION_RATIO
    times the winner's and >= the image mean of the winning response, and the
    pixel is a maximum of response j along theta_j.
    """
    response, k_star, n = orient.response, orient.k_star, orient.orientations
    best = np.take_along_axis(response, k_star[None], axis=0)[0]
    level = float(np.mean(best))
    ridges = np.zeros(k_star.shape, dtype=bool)
    for j in range(n):
        gap = np.abs(k_star - j) % n
        separated = 4 * np.minimum(gap, n - gap) >= n
        plane = response[j]
        gate = separated & (plane >= JUNCTION_RATIO * best) & (plane >= level)
        if not gate.any():
            continue
        forward, backward = _neighbours(plane, np.full(k_star.shape, j), n, interpolation, direction)
        ridges |= gate & (plane > forward) & (plane >= backward)
    return ridges


def nms(
    xi_tilde: EqualizedEsm,
    orient: OrientationMap,
    interpolation: str = "nearest",
    direction: str = "carrier",
    junctions: bool = True,
) -> np.ndarray:
    """
    Keep a pixel iff it is > its forward neighbour and >= its backward one
    along theta_{k*}. With `junctions` and a per-orientation response on
    `orient`, ridge pixels of a competing orientation are kept as well.
    """
    values = xi_tilde.strength
    if values.shape != orient.k_star.shape:
        raise ParameterError(
            f"ESM shape {values.shape} != orientation shape {orient.k_star.shape}",
            ["orientation"],
        )
    if interpolation not in NMS_INTERPOLATIONS:
        raise ParameterError(f"unknown NMS interpolation {interpolation!r}", ["detector.nms_interpolation"])
    if direction not in NMS_DIRECTIONS:
        raise ParameterError(f"unknown NMS direction {direction!r}", ["detector.nms_direction"])

    forward, backward = _neighbours(values, orient.k_star, orient.orientations, interpolation, direction)
    keep = (values > forward) & (values >= backward)
    if junctions and orient.response is not None:
        if orient.response.shape != (orient.orientations,) + values.shape:
            raise ParameterError(
                f"orientation response shape {orient.response.shape} does not match "
                f"{orient.orientations} x {values.shape}",
                ["orientation"],
            )
        keep |= _junction_ridges(orient, interpolation, direction)
    return np.where(keep, values, 0.0)


# ── Thresholds ─────────────────────────────────────────────────────────────

def _rank(beta: float, n: int) -> int:
    # zero-rounding of beta*n; the epsilon absorbs 0.29*100 = 28.999...
    return min(n, max(1, int(math.floor(beta * n + 1e-9))))


def percentile_thresholds(xi_tilde: EqualizedEsm, beta_low: float, beta_up: float) -> Tuple[float, float]:
    """(T_low, T_up): values at 1-indexed ranks [beta * M*N] of the ascending sort."""
    if not (0.0 < beta_low < beta_up < 1.0):
        raise ParameterError(
            f"need 0 < beta_low < beta_up < 1, got beta_low={beta_low} beta_up={beta_up}",
            ["detector.beta_low", "detector.beta_up"],
        )
    ordered = np.sort(xi_tilde.strength, axis=None)
    n = ordered.size
    return float(ordered[_rank(beta_low, n) - 1]), float(ordered[_rank(beta_up, n) - 1])


# ── Hysteresis ─────────────────────────────────────────────────────────────

def hysteresis(thinned: np.ndarray, t_low: float, t_up: float, connectivity: int = 8) -> EdgeMap:
    if t_low > t_up:
        raise ParameterError(f"T_low {t_low} > T_up {t_up}", ["t_low", "t_up"])
    if connectivity not in (4, 8):
        raise ParameterError(f"connectivity must be 4 or 8, got {connectivity}", ["detector.connectivity"])

    strong = thinned > t_up
    candidates = thinned > t_low
    structure = ndimage.generate_binary_structure(2, 1 if connectivity == 4 else 2)
    labels, n = ndimage.label(candidates, structure=structure)
    if n == 0:
        return EdgeMap(np.zeros(thinned.shape, dtype=bool))
    linked = np.zeros(n + 1, dtype=bool)
    linked[np.unique(labels[strong])] = True
    linked[0] = False
    return EdgeMap(linked[labels])


# ── Pipeline ───────────────────────────────────────────────────────────────

def edge_strength(img: RgbImage, cfg: DetectorConfig) -> StrengthResult:
    cfg.validate()
    with runlog.Timer("lab conversion"):
        lab = rgb_to_lab(img, srgb_gamma=cfg.srgb_gamma)
    bank = build_bank(cfg.gabor)

    stacks: List[np.ndarray] = []
    labels: List[Tuple[str, float]] = []
    with runlog.Timer(f"gabor bank {len(cfg.channels)}x{len(bank)} convolutions"):
        for ch in cfg.channels:
            plane = lab.channel(ch)
            for s, f in enumerate(cfg.gabor.frequencies):
                stacks.append(orientation_magnitudes(plane, kernels_at_scale(bank, s), cfg.convolution))
                labels.append((ch, f))

    esms = [esm_from_magnitudes(m)[0] for m in stacks]
    fused = fuse(esms)
    equalized = contrast_equalize(fused, cfg.window)
    orient = fused_orientation(stacks)

    values = equalized.strength
    peak = float(np.max(np.abs(values)))
    constant_input = bool(np.all(img.data == img.data[0, 0]))
    flat = constant_input or equalized.degenerate or float(np.ptp(values)) <= _FLAT_RTOL * peak
    if flat:
        runlog.debug("equalized ESM is flat; no edges")
        thinned = np.zeros_like(values)
    else:
        thinned = nms(equalized, orient, cfg.nms_interpolation, cfg.nms_direction, cfg.nms_junctions)

    return StrengthResult(
        lab=lab,
        esm_labels=labels,
        esms=esms,
        fused=fused,
        orientation=orient,
        equalized=equalized,
        thinned=thinned,
        flat=flat,
    )


def threshold_edges(strength: StrengthResult, beta_low: float, beta_up: float, connectivity: int = 8) -> EdgeMap:
    h, w = strength.shape
    if strength.flat:
        # thresholds are still validated so a bad grid fails the same way on any image
        percentile_thresholds(strength.equalized, beta_low, beta_up)
        return EdgeMap.empty(h, w)
    t_low, t_up = percentile_thresholds(strength.equalized, beta_low, beta_up)
    edges = hysteresis(strength.thinned, t_low, t_up, connectivity)
    runlog.debug(f"T_low={t_low:.6g} T_up={t_up:.6g} edges={edges.count}")
    return edges


def detect_edges(img: RgbImage, cfg: Optional[DetectorConfig] = None) -> EdgeMap:
    cfg = cfg or DetectorConfig()
    strength = edge_strength(img, cfg)
    return threshold_edges(strength, cfg.beta_low, cfg.beta_up, cfg.connectivity)
