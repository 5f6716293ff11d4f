import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from lumisep.defaults import default_bases, default_response


@pytest.fixture(scope="session")
def response():
    return default_response()


@pytest.fixture(scope="session")
def bases():
    return default_bases()


@pytest.fixture(scope="session")
def refl_basis(bases):
    return bases[0]


@pytest.fixture(scope="session")
def illum_basis(bases):
    return bases[1]


@pytest.fixture(scope="session")
def rendered_two_light(bases, response):
    """A small noiseless two-light scene with its ground truth."""
    from lumisep import synth

    scene = synth.make_pure_pixel_scene(2, 25.0, size=128, seed=11)
    gt = synth.render(scene, bases[0], bases[1], response)
    return scene, gt


def random_unit_vectors(rng, count):
    v = rng.normal(size=(count, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)
