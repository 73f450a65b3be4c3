import numpy as np
import pytest

from glwire.grids import PhysicalParams, build_strip_domain
from glwire.config import smooth_contact_profile


@pytest.fixture(scope="session")
def unit_square_32():
    return build_strip_domain(1.0, 1.0, 32, 32)


@pytest.fixture(scope="session")
def symmetric_params():
    # constant current, kappa = sigma = 1: B_n and phi_n are exactly linear
    return PhysicalParams(kappa=1.0, sigma=1.0, h=1.0, h_ref=0.0,
                          jr_magnitude=1.0)


@pytest.fixture(scope="session")
def smooth_params_factory():
    def make(dom, magnitude=2.0, kappa=1.0, sigma=1.0, h=1.0, h_ref=0.0):
        return PhysicalParams(kappa=kappa, sigma=sigma, h=h, h_ref=h_ref,
                              jr_table=smooth_contact_profile(dom, magnitude))
    return make


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240901)
