from dataclasses import replace

import numpy as np
import pytest
from scipy import ndimage

import synthetic
from colorspace import RgbImage
from config import ParameterError
from detector import (
    DetectorConfig,
    EdgeMap,
    detect_edges,
    edge_strength,
    hysteresis,
    nms,
    percentile_thresholds,
    threshold_edges,
)
from esm import EqualizedEsm, OrientationMap
from gabor import GaborParams

STEP_COLUMN = 32
MARGIN = 4


def equalized(values):
    return EqualizedEsm(np.asarray(values, dtype=np.float64), 1.0, 3)


def orientation(shape, k=0, orientations=8):
    return OrientationMap(np.full(shape, k, dtype=np.int64), orientations)


@pytest.fixture(scope="module")
def step_edges(step_image):
    img, _ = step_image
    return detect_edges(img)


# ── NMS ────────────────────────────────────────────────────────────────────

@pytest.mark.parametrize("interpolation, k", [("nearest", 3), ("nearest", 0), ("linear", 0)])
def test_nms_constant_map_is_empty(interpolation, k):
    out = nms(equalized(np.full((6, 6), 2.0)), orientation((6, 6), k=k), interpolation)
    np.testing.assert_array_equal(out, 0.0)


@pytest.mark.parametrize("interpolation", ["nearest", "linear"])
def test_nms_keeps_ridge_center(interpolation):
    values = np.tile([1.0, 3.0, 1.0], (5, 1))
    out = nms(equalized(values), orientation(values.shape), interpolation)
    np.testing.assert_array_equal(out, np.tile([0.0, 3.0, 0.0], (5, 1)))


def test_nms_plateau_keeps_one_pixel():
    values = np.tile([1.0, 2.0, 2.0, 1.0], (3, 1))
    out = nms(equalized(values), orientation(values.shape))
    np.testing.assert_array_equal(out, np.tile([0.0, 0.0, 2.0, 0.0], (3, 1)))


def test_nms_across_direction_suppresses_ridge():
    values = np.tile([1.0, 3.0, 1.0], (5, 1))
    out = nms(equalized(values), orientation(values.shape), direction="carrier+90")
    np.testing.assert_array_equal(out, 0.0)


def test_nms_diagonal_axis():
    values = np.eye(5) * 4.0 + 1.0
    # k=6 of 8 is 135 degrees: steps (1, -1), across the main diagonal
    out = nms(equalized(values), orientation(values.shape, k=6))
    np.testing.assert_array_equal(np.diag(out), 5.0)
    assert np.count_nonzero(out) == 5


@pytest.mark.parametrize("interpolation", ["nearest", "linear"])
@pytest.mark.parametrize("direction", ["carrier", "carrier+90"])
def test_nms_only_zeroes_pixels(rng, interpolation, direction):
    for _ in range(20):
        values = rng.uniform(0, 4, (12, 14))
        values[rng.random(values.shape) < 0.3] = 0.0
        response = rng.uniform(0, 4, (8, 12, 14))
        orient = OrientationMap(np.argmax(response, axis=0), 8, response=response)
        out = nms(equalized(values), orient, interpolation, direction)
        kept = out != 0
        assert np.all(values[kept] != 0)
        np.testing.assert_array_equal(out[kept], values[kept])


def test_nms_rejects_mismatched_shapes():
    with pytest.raises(ParameterError):
        nms(equalized(np.ones((3, 3))), orientation((3, 4)))


def junction_cross(size=11, centre=5):
    """A weak vertical line (k=0) through a strong horizontal one (k=4) whose
    response spills one row either side and wins k_star there."""
    response = np.full((8, size, size), 0.1)
    response[0] = 1.0
    response[0][:, centre] = 2.0
    response[4] = 0.5
    response[4][centre - 1:centre + 2] = 3.0
    response[4][centre] = 4.0
    values = np.maximum(response[0], response[4])
    orient = OrientationMap(np.argmax(response, axis=0), 8, response=response)
    return equalized(values), orient


def test_plain_nms_cuts_the_weak_arm_at_a_junction():
    xi, orient = junction_cross()
    out = nms(xi, orient, junctions=False)
    assert out[4, 5] == 0.0 and out[6, 5] == 0.0
    np.testing.assert_array_equal(out[5], 4.0)
    edges = hysteresis(out, 1.5, 3.5)
    assert edges.count == 11
    assert not edges.edges[0:4, 5].any()


def test_junction_nms_keeps_the_weak_arm_connected():
    xi, orient = junction_cross()
    out = nms(xi, orient)
    assert out[4, 5] == 3.0 and out[6, 5] == 3.0
    # only the two gap pixels are added
    assert np.count_nonzero(out) == np.count_nonzero(nms(xi, orient, junctions=False)) + 2
    edges = hysteresis(out, 1.5, 3.5)
    assert edges.edges[:, 5].all() and edges.edges[5].all()
    assert edges.count == 21


def test_junction_nms_needs_the_response():
    xi, orient = junction_cross()
    bare = OrientationMap(orient.k_star, 8)
    np.testing.assert_array_equal(nms(xi, bare), nms(xi, orient, junctions=False))
    with pytest.raises(ParameterError):
        nms(xi, OrientationMap(orient.k_star, 8, response=orient.response[:4]))


def test_x_junction_lower_arm_is_detected():
    img, _ = synthetic.shape("x_junction", 64)
    edges = detect_edges(img).edges
    for row in range(40, 61):
        assert edges[row, 31:34].any(), row


# ── Thresholds ─────────────────────────────────────────────────────────────

def test_percentile_thresholds_on_four_values():
    xi = equalized([[1.0, 2.0], [3.0, 4.0]])
    assert percentile_thresholds(xi, 0.25, 0.75) == (1.0, 3.0)


def test_percentile_rank_absorbs_float_error():
    xi = equalized(np.arange(1.0, 101.0).reshape(10, 10))
    t_low, t_up = percentile_thresholds(xi, 0.29, 0.57)
    assert (t_low, t_up) == (29.0, 57.0)


def test_tiny_beta_uses_first_rank():
    xi = equalized([[5.0, 6.0], [7.0, 8.0]])
    assert percentile_thresholds(xi, 0.01, 0.02) == (5.0, 5.0)


@pytest.mark.parametrize("lo, up", [(0.9, 0.7), (0.5, 0.5), (0.0, 0.5), (0.5, 1.0)])
def test_percentile_rejects_bad_order(lo, up):
    with pytest.raises(ParameterError) as exc:
        percentile_thresholds(equalized(np.ones((2, 2))), lo, up)
    assert set(exc.value.fields) == {"detector.beta_low", "detector.beta_up"}


# ── Hysteresis ─────────────────────────────────────────────────────────────

def test_hysteresis_chains_to_strong_pixel():
    edges = hysteresis(np.array([[10.0, 5.0, 5.0]]), 4.0, 8.0)
    np.testing.assert_array_equal(edges.edges, [[True, True, True]])


def test_hysteresis_drops_isolated_candidate():
    edges = hysteresis(np.array([[10.0, 0.0, 0.0, 0.0, 5.0]]), 4.0, 8.0)
    np.testing.assert_array_equal(edges.edges, [[True, False, False, False, False]])


def test_hysteresis_below_low_is_empty():
    assert hysteresis(np.full((4, 4), 3.0), 4.0, 8.0).count == 0


def test_hysteresis_connectivity():
    thinned = np.array([[10.0, 0.0], [0.0, 5.0]])
    assert hysteresis(thinned, 4.0, 8.0, connectivity=8).count == 2
    assert hysteresis(thinned, 4.0, 8.0, connectivity=4).count == 1


def test_hysteresis_strong_needs_strictly_above():
    assert hysteresis(np.array([[8.0, 5.0]]), 4.0, 8.0).count == 0


def test_raising_t_low_only_removes_edges(rng):
    for _ in range(20):
        thinned = rng.uniform(0, 10, (16, 16)) * (rng.random((16, 16)) < 0.5)
        previous = hysteresis(thinned, 0.0, 8.0).edges
        for t_low in np.linspace(0.5, 8.0, 12):
            current = hysteresis(thinned, t_low, 8.0).edges
            assert not np.any(current & ~previous)
            previous = current


@pytest.mark.parametrize("connectivity", [4, 8])
def test_every_edge_reaches_a_strong_pixel(rng, connectivity):
    structure = ndimage.generate_binary_structure(2, 1 if connectivity == 4 else 2)
    for _ in range(20):
        thinned = rng.uniform(0, 10, (16, 16)) * (rng.random((16, 16)) < 0.5)
        edges = hysteresis(thinned, 3.0, 8.0, connectivity).edges
        assert np.all(thinned[edges] > 3.0)
        labels, n = ndimage.label(edges, structure=structure)
        for component in range(1, n + 1):
            assert np.any(thinned[labels == component] > 8.0)


def test_hysteresis_rejects_inverted_thresholds():
    with pytest.raises(ParameterError):
        hysteresis(np.ones((2, 2)), 5.0, 4.0)


# ── Config ─────────────────────────────────────────────────────────────────

def test_default_config_is_valid():
    cfg = DetectorConfig()
    cfg.validate()
    assert (cfg.window, cfg.beta_low, cfg.beta_up, cfg.connectivity) == (7, 0.70, 0.90, 8)
    assert cfg.gabor.orientations == 8
    assert cfg.gabor.frequencies == (0.1, 0.2)


@pytest.mark.parametrize("changes, field", [
    ({"window": 4}, "detector.window"),
    ({"beta_low": 0.95}, "detector.beta_low"),
    ({"connectivity": 6}, "detector.connectivity"),
    ({"nms_interpolation": "cubic"}, "detector.nms_interpolation"),
    ({"nms_direction": "sideways"}, "detector.nms_direction"),
    ({"channels": ("L", "L")}, "detector.channels"),
    ({"channels": ("R",)}, "detector.channels"),
    ({"convolution": "winograd"}, "detector.convolution"),
    ({"gabor": GaborParams(eta=0.0)}, "detector.gabor.eta"),
])
def test_config_validation_names_field(changes, field):
    with pytest.raises(ParameterError) as exc:
        replace(DetectorConfig(), **changes).validate()
    assert field in exc.value.fields


# ── Pipeline ───────────────────────────────────────────────────────────────

def test_constant_image_has_no_edges():
    edges = detect_edges(RgbImage.filled(48, 48, (90, 170, 70)))
    assert edges.count == 0
    assert (edges.height, edges.width) == (48, 48)


def test_staged_api_matches_detect(step_image):
    img, _ = step_image
    cfg = DetectorConfig()
    strength = edge_strength(img, cfg)
    staged = threshold_edges(strength, cfg.beta_low, cfg.beta_up, cfg.connectivity)
    np.testing.assert_array_equal(staged.edges, detect_edges(img, cfg).edges)
    assert len(strength.esms) == 6
    assert strength.esm_labels[0] == ("L", 0.1)
    assert strength.shape == (64, 64)
    assert not strength.flat


def test_channel_subset_limits_the_esms(step_image):
    img, _ = step_image
    cfg = replace(DetectorConfig(), channels=("a", "b"), gabor=GaborParams(frequencies=(0.2,)))
    strength = edge_strength(img, cfg)
    assert strength.esm_labels == [("a", 0.2), ("b", 0.2)]


def test_step_is_localized(step_edges):
    rows = range(MARGIN, 64 - MARGIN)
    good = 0
    for row in rows:
        near = np.nonzero(step_edges.edges[row, STEP_COLUMN - 1:STEP_COLUMN + 2])[0]
        good += len(near) == 1
    assert good >= 0.95 * len(rows)


def test_step_ridge_is_thin(step_image):
    img, _ = step_image
    thinned = edge_strength(img, DetectorConfig()).thinned
    rows = range(MARGIN, 64 - MARGIN)
    thin = sum(np.count_nonzero(thinned[row, STEP_COLUMN - 2:STEP_COLUMN + 2]) == 1 for row in rows)
    assert thin >= 0.95 * len(rows)


def test_rotated_step_gives_rotated_edges(step_image, step_edges):
    img, _ = step_image
    rotated = detect_edges(RgbImage(np.rot90(img.data).copy()))
    expected = np.rot90(step_edges.edges)
    inner = (slice(MARGIN, -MARGIN), slice(MARGIN, -MARGIN))
    a, b = rotated.edges[inner], expected[inner]
    union = np.count_nonzero(a | b)
    assert union > 0
    assert np.count_nonzero(a & b) / union >= 0.95


@pytest.mark.parametrize("scale", [0.25, 8.0, 1024.0])
def test_edges_ignore_the_scale_of_the_equalized_map(step_image, scale):
    img, _ = step_image
    cfg = DetectorConfig()
    strength = edge_strength(img, cfg)
    eq = strength.equalized
    scaled_eq = replace(eq, strength=eq.strength * scale)
    scaled = replace(strength, equalized=scaled_eq, thinned=nms(scaled_eq, strength.orientation))
    np.testing.assert_array_equal(scaled.thinned, strength.thinned * scale)
    np.testing.assert_array_equal(
        threshold_edges(scaled, cfg.beta_low, cfg.beta_up).edges,
        threshold_edges(strength, cfg.beta_low, cfg.beta_up).edges,
    )


def test_edge_map_helpers():
    empty = EdgeMap.empty(3, 5)
    assert (empty.height, empty.width, empty.count) == (3, 5, 0)
