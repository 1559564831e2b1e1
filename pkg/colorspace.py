"""
8-bit RGB -> CIE XYZ -> CIE L*a*b* conversion.

The RGB -> XYZ matrix is applied straight to RGB/255 (no gamma
linearization unless `srgb_gamma=True`), and XYZ is scaled x100 so the
D65 reference white (95.047, 100, 108.883) is used verbatim.

Note the matrix rows sum to ~0.9503 / 1.0002 / 1.0887, so sRGB white maps
to L* ~= 100.008 rather than exactly 100.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from config import ParameterError

RGB_TO_XYZ = np.array([
    [0.4124, 0.3575, 0.1804],
    [0.2128, 0.7152, 0.0722],
    [0.0193, 0.1192, 0.9502],
], dtype=np.float64)

# D65 reference white on the 0-100 scale
X0, Y0, Z0 = 95.047, 100.0, 108.883
WHITE = np.array([X0, Y0, Z0], dtype=np.float64)

LAB_KNEE = 0.008856


@dataclass(frozen=True)
class RgbImage:
    """Row-major (height, width, 3) uint8 samples, top-left origin."""
    data: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.data)
        if d.ndim != 3 or d.shape[2] != 3 or d.shape[0] == 0 or d.shape[1] == 0:
            raise ParameterError(f"RGB image must have shape (H, W, 3), got {d.shape}", ["image"])
        if not np.issubdtype(d.dtype, np.integer):
            if not np.all(np.equal(np.mod(d, 1), 0)):
                raise ParameterError("RGB samples must be integers", ["image"])
        if d.min() < 0 or d.max() > 255:
            raise ParameterError("RGB samples must lie in [0, 255]", ["image"])
        object.__setattr__(self, "data", d.astype(np.uint8, copy=False))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @classmethod
    def filled(cls, height: int, width: int, rgb) -> "RgbImage":
        data = np.empty((height, width, 3), dtype=np.uint8)
        data[:, :] = np.asarray(rgb, dtype=np.uint8)
        return cls(data)


@dataclass(frozen=True)
class XyzImage:
    """(height, width, 3) float64 planes X, Y, Z on the 0-100 scale."""
    data: np.ndarray

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class LabImage:
    """(height, width, 3) float64 planes L*, a*, b*."""
    data: np.ndarray

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def channel(self, name: str) -> np.ndarray:
        return self.data[..., "Lab".index(name)]


def lab_nonlinearity(t: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """Cube root above the knee, 7.787 t + 4/29 at or below it."""
    arr = np.asarray(t, dtype=np.float64)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise ParameterError("lab_nonlinearity is defined for t >= 0 only", ["t"])
    out = np.where(arr > LAB_KNEE, np.cbrt(arr), 7.787 * arr + 4.0 / 29.0)
    if out.ndim == 0:
        return float(out)
    return out


def srgb_linearize(c: np.ndarray) -> np.ndarray:
    """IEC 61966-2-1 transfer function inverse, c in [0, 1]."""
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def srgb_to_xyz(img: RgbImage, srgb_gamma: bool = False) -> XyzImage:
    rgb = img.data.astype(np.float64) / 255.0
    if srgb_gamma:
        rgb = srgb_linearize(rgb)
    xyz = (rgb @ RGB_TO_XYZ.T) * 100.0
    # -0.0 from the matmul is harmless but keep the planes strictly >= 0
    np.maximum(xyz, 0.0, out=xyz)
    return XyzImage(xyz)


def xyz_to_lab(img: XyzImage) -> LabImage:
    f = lab_nonlinearity(img.data / WHITE)
    fx, fy, fz = f[..., 0], f[..., 1], f[..., 2]
    lab = np.empty_like(img.data)
    lab[..., 0] = 116.0 * fy - 16.0
    lab[..., 1] = 500.0 * (fx - fy)
    lab[..., 2] = 200.0 * (fy - fz)
    return LabImage(lab)


def rgb_to_lab(img: RgbImage, srgb_gamma: bool = False) -> LabImage:
    return xyz_to_lab(srgb_to_xyz(img, srgb_gamma=srgb_gamma))
