import os

import numpy as np
import pytest

import image_io
import synthetic
from colorspace import rgb_to_lab


def test_boundary_marks_label_changes():
    labels = np.array([
        [0, 0, 1],
        [0, 0, 1],
        [2, 2, 2],
    ])
    expected = np.array([
        [False, False, True],
        [False, False, True],
        [True, True, True],
    ])
    np.testing.assert_array_equal(synthetic.boundary(labels), expected)


def test_step_ground_truth_is_one_column():
    img, gt = synthetic.shape("step", 32)
    assert np.all(gt.edges[:, 16])
    assert gt.count == 32
    assert np.all(img.data[:, :16] == img.data[0, 0])


@pytest.mark.parametrize("name, regions", [
    ("step", 2), ("angular", 2), ("y_junction", 3), ("x_junction", 4), ("star", 2),
])
def test_shapes_have_expected_regions(name, regions):
    labels = synthetic.SHAPES[name](48)
    assert len(np.unique(labels)) == regions
    img, gt = synthetic.shape(name, 48)
    assert (img.height, img.width) == (48, 48)
    assert 0 < gt.count < 48 * 48 // 4


def test_palette_colours_differ_in_lab():
    lab = rgb_to_lab(synthetic.render(np.arange(12).reshape(3, 4), synthetic.PALETTE)[0]).data
    flat = lab.reshape(-1, 3)
    dists = np.linalg.norm(flat[:, None, :] - flat[None, :, :], axis=2)
    assert np.all(dists[~np.eye(12, dtype=bool)] > 5.0)


def test_two_tone_column():
    img, gt = synthetic.two_tone(20, (255, 0, 0), (0, 0, 255), column=5)
    assert tuple(img.data[3, 4]) == (255, 0, 0)
    assert tuple(img.data[3, 5]) == (0, 0, 255)
    assert np.all(gt.edges[:, 5]) and gt.count == 20


def test_scenes_are_seeded():
    a_img, a_gt = synthetic.make_scene(5, 40)
    b_img, b_gt = synthetic.make_scene(5, 40)
    c_img, _ = synthetic.make_scene(6, 40)
    np.testing.assert_array_equal(a_img.data, b_img.data)
    np.testing.assert_array_equal(a_gt.edges, b_gt.edges)
    assert not np.array_equal(a_img.data, c_img.data)


def test_write_dataset_round_trips(tmp_path):
    names = synthetic.write_dataset(str(tmp_path), count=2, seed=9, size=32)
    assert names == ["scene_00", "scene_01"]
    pairs = image_io.list_dataset(str(tmp_path / "images"), str(tmp_path / "gt"))
    assert [p[0] for p in pairs] == names
    img, gt = synthetic.make_scene(10, 32)
    np.testing.assert_array_equal(image_io.read_rgb(pairs[1][1]).data, img.data)
    np.testing.assert_array_equal(image_io.read_edge_map(pairs[1][2]).edges, gt.edges)


def test_list_dataset_needs_ground_truth(tmp_path):
    synthetic.write_dataset(str(tmp_path), count=2, size=32)
    os.remove(tmp_path / "gt" / "scene_01.png")
    with pytest.raises(FileNotFoundError):
        image_io.list_dataset(str(tmp_path / "images"), str(tmp_path / "gt"))
