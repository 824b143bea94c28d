import numpy as np
import pytest

from nullcontrol.geometry import BoxDomain, Rect
from nullcontrol.weights import auto_ell_clamp, build_setup


@pytest.fixture(scope="session")
def square_domain():
    """The reference geometry: Omega = ]0,3[^2, omega = ]0.5,2.5[^2, T = 1."""
    return BoxDomain(a=3.0, b=3.0, T=1.0, omega=Rect(0.5, 2.5, 0.5, 2.5))


@pytest.fixture(scope="session")
def setup12(square_domain):
    """Default Carleman setup matched to a 12-slab time grid."""
    return build_setup(square_domain, ell_clamp=auto_ell_clamp(1.0, 12))


@pytest.fixture()
def rng():
    return np.random.default_rng(20260810)
