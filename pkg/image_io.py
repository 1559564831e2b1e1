"""
Image codecs (PNG, binary PPM/PGM via Pillow) and atomic output writes.

Every writer goes through `atomic_path`: the file is written next to its
destination under a temporary name and renamed into place, so a crashed
run never leaves a half-written PNG/CSV/JSON behind.
"""

from __future__ import annotations

import json
import os
import tempfile
from contextlib import contextmanager
from typing import Dict, Iterator, List, Tuple

import numpy as np
from PIL import Image, UnidentifiedImageError

from colorspace import RgbImage
from config import ParameterError
from detector import EdgeMap

_FORMATS = {".png": "PNG", ".ppm": "PPM", ".pgm": "PPM", ".pnm": "PPM"}


class ImageFormatError(OSError):
    """Unreadable image, or an extension we do not encode."""


def _format_for(path: str) -> str:
    ext = os.path.splitext(path)[1].lower()
    if ext not in _FORMATS:
        raise ImageFormatError(f"{path}: unsupported image type {ext!r} (use .png, .ppm or .pgm)")
    return _FORMATS[ext]


@contextmanager
def atomic_path(path: str) -> Iterator[str]:
    """Yield a temporary path in the destination directory; rename onto `path` on success."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", suffix=os.path.splitext(path)[1], dir=directory)
    os.close(fd)
    try:
        yield tmp
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_text(path: str, text: str) -> None:
    with atomic_path(path) as tmp:
        with open(tmp, "w", encoding="utf-8", newline="") as f:
            f.write(text)


def write_json(path: str, payload: Dict) -> None:
    write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _open(path: str) -> Image.Image:
    if not os.path.exists(path):
        raise FileNotFoundError(f"{path}: no such file")
    try:
        img = Image.open(path)
        img.load()
    except UnidentifiedImageError as exc:
        raise ImageFormatError(f"{path}: not a readable PNG/PPM/PGM image") from exc
    return img


def read_rgb(path: str) -> RgbImage:
    img = _open(path)
    if img.mode not in ("RGB", "L", "P", "RGBA", "LA", "1"):
        raise ImageFormatError(f"{path}: unsupported pixel mode {img.mode} (8-bit images only)")
    return RgbImage(np.asarray(img.convert("RGB"), dtype=np.uint8))


def read_edge_map(path: str) -> EdgeMap:
    """Binary edge image: any pixel with a nonzero colour sample is an edge."""
    img = _open(path)
    # palette indices and alpha say nothing about the colour
    if img.mode in ("P", "PA", "RGBA", "LA"):
        img = img.convert("RGB")
    data = np.asarray(img)
    if data.ndim == 3:
        data = data.max(axis=2)
    return EdgeMap(data != 0)


def _save(img: Image.Image, path: str) -> None:
    fmt = _format_for(path)
    with atomic_path(path) as tmp:
        img.save(tmp, format=fmt)


def write_rgb(path: str, img: RgbImage) -> None:
    _save(Image.fromarray(img.data), path)


def write_edge_map(path: str, edges: EdgeMap) -> None:
    """8-bit grayscale, 255 = edge, 0 = background."""
    _save(Image.fromarray(np.where(edges.edges, 255, 0).astype(np.uint8)), path)


def write_esm_png(path: str, strength: np.ndarray) -> float:
    """16-bit grayscale, linearly rescaled; returns the factor (pixel = value * factor)."""
    if os.path.splitext(path)[1].lower() != ".png":
        raise ParameterError(f"{path}: ESM dumps are 16-bit PNG only", ["io.out_dir"])
    peak = float(np.max(strength)) if strength.size else 0.0
    factor = 65535.0 / peak if peak > 0 else 0.0
    data = np.rint(np.clip(strength * factor, 0, 65535)).astype(np.uint16)
    _save(Image.fromarray(data), path)
    return factor


def list_dataset(image_dir: str, gt_dir: str) -> List[Tuple[str, str, str]]:
    """(name, image path, gt path) for every image in `image_dir`, sorted by name; gt paired by stem."""
    if not os.path.isdir(image_dir):
        raise FileNotFoundError(f"{image_dir}: not a directory")
    if not os.path.isdir(gt_dir):
        raise FileNotFoundError(f"{gt_dir}: not a directory")
    gts: Dict[str, str] = {}
    for fn in sorted(os.listdir(gt_dir)):
        stem, ext = os.path.splitext(fn)
        if ext.lower() in _FORMATS:
            gts.setdefault(stem, os.path.join(gt_dir, fn))

    pairs = []
    for fn in sorted(os.listdir(image_dir)):
        stem, ext = os.path.splitext(fn)
        if ext.lower() not in _FORMATS or fn.startswith("."):
            continue
        if stem not in gts:
            raise FileNotFoundError(f"{fn}: no ground truth named {stem}.* in {gt_dir}")
        pairs.append((stem, os.path.join(image_dir, fn), gts[stem]))
    return pairs
