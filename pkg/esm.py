"""
Edge strength maps (ESMs).

Per (channel, scale): strength = max over orientations of |psi|, with the
winning orientation index kept alongside. The fused ESM is the unweighted
geometric mean of all (channel x scale) maps; zeros annihilate (no edge
energy in one map means no edge energy in the fusion).

Contrast equalization divides each pixel by s_mean + 0.5 * s_local, where
s_local is the W x W box mean of the fused ESM itself.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

import runlog
from config import ParameterError
from gabor import GaborKernel, convolve, magnitude


@dataclass(frozen=True)
class EsmMap:
    strength: np.ndarray = field(repr=False)

    @property
    def height(self) -> int:
        return self.strength.shape[0]

    @property
    def width(self) -> int:
        return self.strength.shape[1]


@dataclass(frozen=True)
class OrientationMap:
    k_star: np.ndarray = field(repr=False)
    orientations: int
    # (K, H, W) per-orientation response k_star was picked from, when known
    response: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    @property
    def height(self) -> int:
        return self.k_star.shape[0]

    @property
    def width(self) -> int:
        return self.k_star.shape[1]


@dataclass(frozen=True)
class EqualizedEsm:
    strength: np.ndarray = field(repr=False)
    global_mean: float
    window: int
    # set when the source ESM was identically zero (output is all zeros)
    degenerate: bool = False

    @property
    def height(self) -> int:
        return self.strength.shape[0]

    @property
    def width(self) -> int:
        return self.strength.shape[1]


def orientation_magnitudes(
    channel: np.ndarray,
    kernels: Sequence[GaborKernel],
    method: Optional[str] = None,
) -> np.ndarray:
    """(K, H, W) stack of |psi| for kernels sharing one scale, ordered by orientation."""
    if not kernels:
        raise ParameterError("need at least one kernel", ["gabor.orientations"])
    scales = {kern.scale_index for kern in kernels}
    if len(scales) != 1:
        raise ParameterError(f"kernels span several scales {sorted(scales)}", ["gabor.frequencies"])
    ordered = sorted(kernels, key=lambda kern: kern.orientation_index)
    return np.stack([magnitude(convolve(channel, kern, method)) for kern in ordered])


def esm_from_magnitudes(mags: np.ndarray) -> Tuple[EsmMap, OrientationMap]:
    # argmax keeps the smallest index on ties
    k_star = np.argmax(mags, axis=0)
    strength = np.take_along_axis(mags, k_star[None], axis=0)[0]
    return EsmMap(strength), OrientationMap(k_star, mags.shape[0])


def channel_esm(
    channel: np.ndarray,
    kernels: Sequence[GaborKernel],
    method: Optional[str] = None,
) -> Tuple[EsmMap, OrientationMap]:
    return esm_from_magnitudes(orientation_magnitudes(channel, kernels, method))


def fuse(esms: Sequence[EsmMap]) -> EsmMap:
    if not esms:
        raise ParameterError("fuse needs at least one ESM", ["esms"])
    shape = esms[0].strength.shape
    for i, e in enumerate(esms):
        if e.strength.shape != shape:
            raise ParameterError(
                f"ESM {i} has shape {e.strength.shape}, expected {shape}", ["esms"]
            )
        if np.any(e.strength < 0):
            raise ParameterError(f"ESM {i} has negative strength", ["esms"])

    n = len(esms)
    if n == 1:
        return EsmMap(esms[0].strength.copy())
    stack = np.stack([e.strength for e in esms])
    return EsmMap(np.prod(stack, axis=0) ** (1.0 / n))


def global_mean(esm: EsmMap) -> float:
    if esm.strength.size == 0:
        raise ParameterError("empty ESM", ["esm"])
    return float(np.mean(esm.strength))


def local_mean(esm: EsmMap, window: int) -> np.ndarray:
    if window < 3 or window % 2 == 0:
        raise ParameterError(f"window must be odd and >= 3, got {window}", ["detector.window"])
    # ndimage "reflect" is the symmetric (edge-repeating) mirror
    return ndimage.uniform_filter(esm.strength, size=window, mode="reflect")


def contrast_equalize(esm: EsmMap, window: int) -> EqualizedEsm:
    s_mean = global_mean(esm)
    s_local = local_mean(esm, window)
    if s_mean <= 0.0:
        runlog.warn("edge strength map is identically zero; contrast equalization yields zeros")
        return EqualizedEsm(np.zeros_like(esm.strength), 0.0, window, degenerate=True)
    return EqualizedEsm(esm.strength / (s_mean + 0.5 * s_local), s_mean, window)


def fused_orientation(magnitude_stacks: Sequence[np.ndarray]) -> OrientationMap:
    """argmax over k of |psi_k| summed across every channel and scale."""
    if not magnitude_stacks:
        raise ParameterError("need at least one magnitude stack", ["magnitudes"])
    shape = magnitude_stacks[0].shape
    for i, m in enumerate(magnitude_stacks):
        if m.shape != shape:
            raise ParameterError(f"magnitude stack {i} has shape {m.shape}, expected {shape}", ["magnitudes"])
    total = np.zeros(shape, dtype=np.float64)
    for m in magnitude_stacks:
        total += m
    return OrientationMap(np.argmax(total, axis=0), shape[0], response=total)
