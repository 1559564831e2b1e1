"""
Evaluation harness: tolerance matching, precision / recall / F, dataset
sweeps (ODS, OIS, AP, R50), Pratt's figure of merit, seeded noise.

Matching is greedy closest-pair-first (not the BSDS min-cost assignment):
all (detected, gt) pairs within `tol` are sorted by distance and taken
whenever both ends are still free.

Noise uses PCG64 uniforms turned into normals with Box-Muller, so a
(sigma, seed) pair reproduces the same noisy image on any platform.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import ndimage
from scipy.spatial import cKDTree

import config
import runlog
from colorspace import RgbImage
from config import ParameterError
from detector import DetectorConfig, EdgeMap, detect_edges, edge_strength, threshold_edges

Grid = List[Tuple[float, float]]

SWEEP_COLUMNS = ["beta_low", "beta_up", "precision", "recall", "f"]


@dataclass(frozen=True)
class NoiseSpec:
    sigma: float = 15.0
    seed: int = 42

    def errors(self, prefix: str = "noise") -> List[Tuple[str, str]]:
        errs = []
        if not self.sigma >= 0:
            errs.append((f"{prefix}.sigma", "must be >= 0"))
        if int(self.seed) != self.seed or not 0 <= self.seed < 2 ** 64:
            errs.append((f"{prefix}.seed", "must be an integer in [0, 2**64)"))
        return errs

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass(frozen=True)
class MatchCounts:
    n_tp: int = 0
    n_fp: int = 0
    n_mt: int = 0
    n_um: int = 0

    def __add__(self, other: "MatchCounts") -> "MatchCounts":
        return MatchCounts(
            self.n_tp + other.n_tp,
            self.n_fp + other.n_fp,
            self.n_mt + other.n_mt,
            self.n_um + other.n_um,
        )


@dataclass(frozen=True)
class PrPoint:
    beta_low: float
    beta_up: float
    precision: float
    recall: float
    f: float


@dataclass
class EvalSummary:
    f_ods: float
    f_ois: float
    ap: float
    r50: float
    ods_point: PrPoint
    per_image: List[Dict] = field(default_factory=list)
    table: pd.DataFrame = field(default_factory=lambda: pd.DataFrame(columns=SWEEP_COLUMNS))

    def to_json(self) -> Dict:
        return {
            "f_ods": self.f_ods,
            "f_ois": self.f_ois,
            "ap": self.ap,
            "r50": self.r50,
            "ods_point": asdict(self.ods_point),
            "per_image": self.per_image,
        }


# ── Noise ──────────────────────────────────────────────────────────────────

def add_gaussian_noise(img: RgbImage, spec: NoiseSpec) -> RgbImage:
    errs = spec.errors()
    if errs:
        raise ParameterError("; ".join(f"{p} {w}" for p, w in errs), [p for p, _ in errs])
    if spec.sigma == 0:
        return RgbImage(img.data.copy())

    rng = np.random.Generator(np.random.PCG64(int(spec.seed)))
    n = img.data.size
    u1 = rng.random(n)
    u2 = rng.random(n)
    z = np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * np.pi * u2)
    noisy = img.data.astype(np.float64) + spec.sigma * z.reshape(img.data.shape)
    return RgbImage(np.clip(np.rint(noisy), 0, 255).astype(np.uint8))


# ── Matching and scores ────────────────────────────────────────────────────

def default_tolerance(height: int, width: int) -> int:
    return max(1, int(math.ceil(config.TOL_FRACTION * math.hypot(height, width))))


def _check_same_shape(a: EdgeMap, b: EdgeMap) -> None:
    if a.edges.shape != b.edges.shape:
        raise ParameterError(
            f"edge maps differ in size: {a.edges.shape[::-1]} vs {b.edges.shape[::-1]}",
            ["pred", "gt"],
        )


def match_edges(detected: EdgeMap, gt: EdgeMap, tol: float) -> MatchCounts:
    _check_same_shape(detected, gt)
    if tol < 0:
        raise ParameterError(f"tolerance must be >= 0, got {tol}", ["eval.tolerance"])

    det = np.argwhere(detected.edges)
    ref = np.argwhere(gt.edges)
    if len(det) == 0 or len(ref) == 0:
        return MatchCounts(0, len(det), 0, len(ref))

    near = cKDTree(det).query_ball_tree(cKDTree(ref), r=tol)
    pi = np.fromiter((i for i, js in enumerate(near) for _ in js), dtype=np.int64)
    pj = np.fromiter((j for js in near for j in js), dtype=np.int64)
    if len(pi) == 0:
        return MatchCounts(0, len(det), 0, len(ref))
    dist = np.hypot(*(det[pi] - ref[pj]).T)

    width = detected.width
    lin_d = det[pi, 0] * width + det[pi, 1]
    lin_g = ref[pj, 0] * width + ref[pj, 1]
    # role-symmetric tie break so swapping detected/gt gives the same pairing
    order = np.lexsort((lin_d, np.maximum(lin_d, lin_g), np.minimum(lin_d, lin_g), dist))

    used_d = np.zeros(len(det), dtype=bool)
    used_g = np.zeros(len(ref), dtype=bool)
    matched = 0
    for i, j in zip(pi[order], pj[order]):
        if used_d[i] or used_g[j]:
            continue
        used_d[i] = used_g[j] = True
        matched += 1

    return MatchCounts(matched, len(det) - matched, matched, len(ref) - matched)


def precision_recall(c: MatchCounts) -> Tuple[float, float]:
    n_det = c.n_tp + c.n_fp
    n_gt = c.n_mt + c.n_um
    if n_det == 0 and n_gt == 0:
        return 1.0, 1.0
    p = c.n_tp / n_det if n_det else 0.0
    r = c.n_mt / n_gt if n_gt else 0.0
    return p, r


def f_measure(p: float, r: float) -> float:
    if not (0.0 <= p <= 1.0 and 0.0 <= r <= 1.0):
        raise ParameterError(f"precision/recall must lie in [0, 1], got {p}, {r}", ["precision", "recall"])
    if p + r == 0:
        return 0.0
    return 2.0 * p * r / (p + r)


def fom(detected: EdgeMap, gt: EdgeMap) -> float:
    """Pratt's figure of merit with scaling constant 0.25."""
    _check_same_shape(detected, gt)
    n_g = int(np.count_nonzero(gt.edges))
    n_e = int(np.count_nonzero(detected.edges))
    if n_g == 0:
        raise ParameterError("FOM needs a nonempty ground truth", ["gt"])
    if n_e == 0:
        return 0.0
    dist = ndimage.distance_transform_edt(~gt.edges)
    d = dist[detected.edges]
    return float(np.sum(1.0 / (1.0 + 0.25 * d * d)) / max(n_g, n_e))


# ── PR curve summaries ─────────────────────────────────────────────────────

def _envelope(recall: Sequence[float], precision: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    """Points sorted by recall with precision made non-increasing (max from the high-recall end)."""
    r = np.asarray(recall, dtype=np.float64)
    p = np.asarray(precision, dtype=np.float64)
    order = np.lexsort((-p, r))
    r, p = r[order], p[order]
    p_env = np.maximum.accumulate(p[::-1])[::-1]
    return r, p_env


def average_precision(recall: Sequence[float], precision: Sequence[float]) -> float:
    """Trapezoidal area under the envelope; the first envelope value is held back to recall 0."""
    if len(recall) == 0:
        return 0.0
    r, p = _envelope(recall, precision)
    area = r[0] * p[0] + float(np.sum(np.diff(r) * (p[1:] + p[:-1]) / 2.0))
    return float(min(1.0, max(0.0, area)))


def recall_at_precision(recall: Sequence[float], precision: Sequence[float], level: float = 0.5) -> float:
    if len(recall) == 0:
        return 0.0
    r, p = _envelope(recall, precision)
    above = np.nonzero(p >= level)[0]
    if len(above) == 0:
        return 0.0
    i = int(above[-1])
    if i + 1 < len(r) and p[i] > level > p[i + 1]:
        return float(r[i] + (p[i] - level) / (p[i] - p[i + 1]) * (r[i + 1] - r[i]))
    return float(r[i])


def default_grid() -> Grid:
    grid = []
    for step in range(15):
        up = round(0.70 + 0.02 * step, 2)
        grid.append((round(max(0.05, up - 0.20), 2), up))
    return grid


def validate_grid(grid: Grid) -> None:
    if not grid:
        raise ParameterError("threshold grid is empty", ["eval.grid"])
    for n, (lo, up) in enumerate(grid):
        if not (0.0 < lo < up < 1.0):
            raise ParameterError(
                f"grid point {n} ({lo}, {up}) needs 0 < beta_low < beta_up < 1",
                [f"eval.grid[{n}]"],
            )


def _pooled_f(counts: Sequence[MatchCounts]) -> float:
    pooled = MatchCounts()
    for c in counts:
        pooled = pooled + c
    return f_measure(*precision_recall(pooled))


def _ois_assignment(counts: Sequence[Sequence[MatchCounts]], start: int) -> Tuple[List[int], float]:
    """
    Per-image grid points maximizing the pooled F, by coordinate ascent.

    Starts with every image at the ODS point and moves one image at a time
    to the point giving the largest strictly better pooled F, so the result
    never falls below F_ODS. Images are visited in dataset order.
    """
    choice = [start] * len(counts)
    current = _pooled_f([per_grid[start] for per_grid in counts])
    improved = True
    while improved:
        improved = False
        for i, per_grid in enumerate(counts):
            others = [counts[j][choice[j]] for j in range(len(counts)) if j != i]
            for g, c in enumerate(per_grid):
                f = _pooled_f(others + [c])
                if f > current:
                    choice[i], current, improved = g, f, True
    return choice, current


def summarize(counts: Sequence[Sequence[MatchCounts]], grid: Grid, names: Optional[Sequence[str]] = None) -> EvalSummary:
    """counts[i][g]: image i thresholded at grid point g."""
    validate_grid(grid)
    if not counts:
        raise ParameterError("dataset is empty", ["io.dataset"])
    names = list(names) if names is not None else [str(i) for i in range(len(counts))]

    rows = []
    for g, (lo, up) in enumerate(grid):
        pooled = MatchCounts()
        for per_image in counts:
            pooled = pooled + per_image[g]
        p, r = precision_recall(pooled)
        rows.append({"beta_low": lo, "beta_up": up, "precision": p, "recall": r, "f": f_measure(p, r)})
    table = pd.DataFrame(rows, columns=SWEEP_COLUMNS)

    best = int(table["f"].idxmax())
    ods = PrPoint(**table.iloc[best].to_dict())

    choice, f_ois = _ois_assignment(counts, best)
    per_image = []
    for name, per_grid, g in zip(names, counts, choice):
        p, r = precision_recall(per_grid[g])
        per_image.append({
            "image": name, "beta_low": grid[g][0], "beta_up": grid[g][1],
            "precision": p, "recall": r, "f": f_measure(p, r),
        })

    return EvalSummary(
        f_ods=float(ods.f),
        f_ois=float(f_ois),
        ap=average_precision(table["recall"], table["precision"]),
        r50=recall_at_precision(table["recall"], table["precision"], 0.5),
        ods_point=ods,
        per_image=per_image,
        table=table,
    )


# ── Sweeps ─────────────────────────────────────────────────────────────────

def _sweep_one(img: RgbImage, gt: EdgeMap, grid: Grid, cfg: DetectorConfig, tol: Optional[float]) -> List[MatchCounts]:
    strength = edge_strength(img, cfg)
    t = tol if tol is not None else default_tolerance(img.height, img.width)
    return [match_edges(threshold_edges(strength, lo, up, cfg.connectivity), gt, t) for lo, up in grid]


def pr_sweep(
    dataset: Sequence[Tuple[RgbImage, EdgeMap]],
    grid: Grid,
    cfg: DetectorConfig,
    tol: Optional[float] = None,
    jobs: int = 1,
    names: Optional[Sequence[str]] = None,
) -> EvalSummary:
    validate_grid(grid)
    if not dataset:
        raise ParameterError("dataset is empty", ["io.dataset"])
    cfg.validate()
    for n, (img, gt) in enumerate(dataset):
        if (img.height, img.width) != gt.edges.shape:
            raise ParameterError(f"image {n} and its ground truth differ in size", ["io.gt_dir"])

    names = list(names) if names is not None else [str(i) for i in range(len(dataset))]
    total = len(dataset)
    results: Dict[int, List[MatchCounts]] = {}
    start = time.time()

    def progress(idx: int) -> None:
        done = len(results)
        elapsed = time.time() - start
        eta = elapsed / done * (total - done) if done else 0.0
        runlog.log(f"{done}/{total}: {names[idx]} | elapsed {elapsed:.1f}s | ETA {eta:.1f}s")

    if jobs <= 1:
        for idx, (img, gt) in enumerate(dataset):
            results[idx] = _sweep_one(img, gt, grid, cfg, tol)
            progress(idx)
    else:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            futures = {
                ex.submit(_sweep_one, img, gt, grid, cfg, tol): idx
                for idx, (img, gt) in enumerate(dataset)
            }
            for fut in as_completed(futures):
                idx = futures[fut]
                results[idx] = fut.result()
                progress(idx)

    # reassemble in dataset order; the summary never sees completion order
    return summarize([results[i] for i in range(total)], grid, names)


# ── Noise benchmark ────────────────────────────────────────────────────────

@dataclass(frozen=True)
class BenchVariant:
    name: str
    cfg: DetectorConfig


def default_variants(cfg: DetectorConfig) -> List[BenchVariant]:
    """The configured (fused) detector plus one single-scale variant per frequency."""
    variants = [BenchVariant("fused", cfg)]
    if cfg.gabor.scales > 1:
        for f in cfg.gabor.frequencies:
            variants.append(BenchVariant(f"f={f:g}", replace(cfg, gabor=replace(cfg.gabor, frequencies=(f,)))))
    return variants


def noise_benchmark(
    shapes: Sequence[Tuple[str, RgbImage, EdgeMap]],
    variants: Sequence[BenchVariant],
    noise: NoiseSpec,
    tol: Optional[float] = None,
) -> pd.DataFrame:
    """FOM and P/R/F of each variant on each noisy shape, scored against the clean ground truth."""
    rows = []
    for shape_name, img, gt in shapes:
        noisy = add_gaussian_noise(img, noise)
        t = tol if tol is not None else default_tolerance(img.height, img.width)
        for v in variants:
            edges = detect_edges(noisy, v.cfg)
            p, r = precision_recall(match_edges(edges, gt, t))
            rows.append({
                "shape": shape_name, "variant": v.name, "fom": fom(edges, gt),
                "precision": p, "recall": r, "f": f_measure(p, r),
            })
        runlog.log(f"noise-bench {shape_name}: {len(variants)} variants scored")
    return pd.DataFrame(rows, columns=["shape", "variant", "fom", "precision", "recall", "f"])
