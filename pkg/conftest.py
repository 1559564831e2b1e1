"""Shared pytest fixtures: seeded generators and synthetic colour images."""

import numpy as np
import pytest

import runlog
import synthetic

STEP_LEFT = (200, 60, 50)
STEP_RIGHT = (40, 110, 190)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: acceptance-scale runs (deselect with -m 'not slow')")


@pytest.fixture(autouse=True)
def quiet_log():
    runlog.set_context("test")
    runlog.set_verbose(False)
    yield


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(1234))


@pytest.fixture(scope="session")
def step_image():
    """64x64 vertical two-tone step; the right colour starts at column 32."""
    return synthetic.two_tone(64, STEP_LEFT, STEP_RIGHT)


@pytest.fixture
def write_png(tmp_path):
    import image_io

    def _write(name, img):
        path = str(tmp_path / name)
        image_io.write_rgb(path, img)
        return path

    return _write
