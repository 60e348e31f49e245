import pytest

from pelab.numerics import Rng, make_encoder
from pelab.worlds import (make_bernoulli_uv_world, make_rotation_world,
                          make_six_nine_world)


@pytest.fixture
def rng():
    return Rng(1234)


@pytest.fixture
def rotation_world():
    return make_rotation_world()


@pytest.fixture
def unit_circle_world():
    # degenerate radius distribution: every sample lies on the unit circle
    return make_rotation_world(r_min=1.0, r_max=1.0)


@pytest.fixture
def bernoulli_world():
    return make_bernoulli_uv_world()


@pytest.fixture
def six_nine_world():
    return make_six_nine_world()


def random_encoder(rng, arch=None, d_z=None, d_hidden=None):
    arch = arch or ("mlp1" if rng.uniform() < 0.5 else "linear")
    d_z = d_z or int(rng.integers(2, 6))
    d_hidden = d_hidden or int(rng.integers(3, 9))
    return make_encoder(arch, 2, d_z, d_hidden, rng)


def assert_close(a, b, tol=1e-9, msg=""):
    assert abs(a - b) <= tol, f"{msg}: {a} vs {b} (tol {tol})"
