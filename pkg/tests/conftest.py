import math

import numpy as np
import pytest

from nvbmesh import initial_mesh, preset_poisson_corner

OMEGA_L = 1.5 * math.pi  # reentrant corner of the L-shaped domain


@pytest.fixture
def l_mesh():
    return initial_mesh("l_shape")


@pytest.fixture
def square_mesh():
    return initial_mesh("square")


@pytest.fixture
def corner_term():
    # r**(2/3) * sin(2*theta/3) at the reentrant corner
    return preset_poisson_corner(OMEGA_L)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def sector_points(rng, n, omega=OMEGA_L, rmin=0.05, rmax=0.9, pad=0.05):
    """Random points strictly inside the sector (away from its boundary rays)."""
    r = rng.uniform(rmin, rmax, n)
    t = rng.uniform(pad, omega - pad, n)
    return r * np.cos(t), r * np.sin(t)
