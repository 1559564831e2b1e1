"""
Discretized multi-scale, multi-orientation complex Gabor bank.

Kernel taps sample

    g(u, v) = f^2 / (pi*gamma*eta) * exp(-(f^2/gamma^2 * u'^2 + f^2/eta^2 * v'^2)) * exp(j*2*pi*f*u')
    u' =  u*cos(theta) + v*sin(theta)
    v' = -u*sin(theta) + v*cos(theta)

at integer offsets, with u the column offset and v the row offset (rows
grow downwards). theta = 0 puts the carrier along the columns, so it
answers vertical edges.

Scales are just indices into `frequencies`; nothing else ties sigma to the
kernel.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import signal

import config
from config import ParameterError


@dataclass(frozen=True)
class GaborParams:
    gamma: float = 1.0
    eta: float = 2.0
    frequencies: Tuple[float, ...] = (0.1, 0.2)
    orientations: int = 8
    # envelope kept where exp(...) >= exp(-truncation^2 / 2)
    truncation: float = 3.0

    def __post_init__(self):
        object.__setattr__(self, "frequencies", tuple(float(f) for f in self.frequencies))

    def errors(self, prefix: str = "gabor") -> List[Tuple[str, str]]:
        """(field path, problem) pairs; empty when valid."""
        errs: List[Tuple[str, str]] = []
        if not self.gamma > 0:
            errs.append((f"{prefix}.gamma", "must be > 0"))
        if not self.eta > 0:
            errs.append((f"{prefix}.eta", "must be > 0"))
        if not self.frequencies:
            errs.append((f"{prefix}.frequencies", "needs at least one frequency"))
        elif any(not f > 0 for f in self.frequencies):
            errs.append((f"{prefix}.frequencies", "every frequency must be > 0"))
        elif any(b <= a for a, b in zip(self.frequencies, self.frequencies[1:])):
            errs.append((f"{prefix}.frequencies", "must be strictly increasing"))
        if int(self.orientations) != self.orientations or self.orientations < 1:
            errs.append((f"{prefix}.orientations", "must be an integer >= 1"))
        if not self.truncation > 0:
            errs.append((f"{prefix}.truncation", "must be > 0"))
        return errs

    def validate(self, prefix: str = "gabor") -> None:
        errs = self.errors(prefix)
        if errs:
            raise ParameterError(
                "; ".join(f"{path} {why}" for path, why in errs),
                [path for path, _ in errs],
            )

    @property
    def scales(self) -> int:
        return len(self.frequencies)

    def thetas(self) -> np.ndarray:
        return np.pi * np.arange(self.orientations) / self.orientations

    def to_dict(self) -> Dict:
        d = asdict(self)
        d["frequencies"] = list(self.frequencies)
        return d


@dataclass(frozen=True)
class GaborKernel:
    taps: np.ndarray = field(repr=False)
    half_width: int
    scale_index: int
    orientation_index: int
    frequency: float
    theta: float

    @property
    def size(self) -> int:
        return 2 * self.half_width + 1


@dataclass(frozen=True)
class ResponseMap:
    """Complex response psi(u, v; f, sigma, k), same shape as the channel."""
    data: np.ndarray

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


def kernel_half_width(f: float, gamma: float, eta: float, truncation: float) -> int:
    return int(math.ceil(truncation * max(gamma, eta) / (f * math.sqrt(2.0))))


def build_kernel(
    f: float,
    theta: float,
    gamma: float,
    eta: float,
    truncation: float = 3.0,
    *,
    scale_index: int = 0,
    orientation_index: int = 0,
    max_half_width: Optional[int] = None,
) -> GaborKernel:
    if not f > 0:
        raise ParameterError(f"frequency must be > 0, got {f}", ["gabor.frequencies"])
    if not (gamma > 0 and eta > 0):
        raise ParameterError("gamma and eta must be > 0", ["gabor.gamma", "gabor.eta"])
    if max_half_width is None:
        max_half_width = config.MAX_HALF_WIDTH

    h = kernel_half_width(f, gamma, eta, truncation)
    if h > max_half_width:
        raise ParameterError(
            f"frequency {f} needs a kernel half width of {h} > cap {max_half_width} "
            f"(raise EDGE_MAX_HALF_WIDTH or the frequency)",
            ["gabor.frequencies"],
        )

    v, u = np.mgrid[-h:h + 1, -h:h + 1].astype(np.float64)
    c, s = math.cos(theta), math.sin(theta)
    up = u * c + v * s
    vp = -u * s + v * c

    amp = f * f / (math.pi * gamma * eta)
    envelope = amp * np.exp(-((f * f) / (gamma * gamma) * up * up + (f * f) / (eta * eta) * vp * vp))
    phase = 2.0 * math.pi * f * up
    taps = envelope * np.cos(phase) + 1j * (envelope * np.sin(phase))

    return GaborKernel(
        taps=taps,
        half_width=h,
        scale_index=scale_index,
        orientation_index=orientation_index,
        frequency=f,
        theta=theta,
    )


def build_bank(params: GaborParams, max_half_width: Optional[int] = None) -> List[GaborKernel]:
    """One kernel per (scale, orientation), scale-major."""
    params.validate()
    bank: List[GaborKernel] = []
    for s, f in enumerate(params.frequencies):
        for k, theta in enumerate(params.thetas()):
            bank.append(build_kernel(
                f, float(theta), params.gamma, params.eta, params.truncation,
                scale_index=s, orientation_index=k, max_half_width=max_half_width,
            ))
    return bank


def kernels_at_scale(bank: Sequence[GaborKernel], scale_index: int) -> List[GaborKernel]:
    return sorted(
        (kern for kern in bank if kern.scale_index == scale_index),
        key=lambda kern: kern.orientation_index,
    )


def resolve_method(kernel: GaborKernel, method: Optional[str]) -> str:
    method = method or config.CONV_METHOD
    if method == "auto":
        return "direct" if kernel.half_width <= config.DIRECT_MAX_HALF_WIDTH else "fft"
    if method not in ("direct", "fft"):
        raise ParameterError(f"unknown convolution method {method!r}", ["detector.convolution"])
    return method


def convolve(channel: np.ndarray, kernel: GaborKernel, method: Optional[str] = None) -> ResponseMap:
    """2-D convolution with symmetric (mirror) padding; output has the channel's shape."""
    plane = np.asarray(channel, dtype=np.float64)
    if plane.ndim != 2 or plane.size == 0:
        raise ParameterError(f"channel must be a nonempty 2-D plane, got shape {plane.shape}", ["channel"])

    h = kernel.half_width
    padded = np.pad(plane, h, mode="symmetric")
    out = signal.convolve(padded, kernel.taps, mode="valid", method=resolve_method(kernel, method))
    return ResponseMap(out)


def magnitude(resp: ResponseMap) -> np.ndarray:
    return np.abs(resp.data)
