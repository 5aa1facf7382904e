import numpy as np
import pytest
from hypothesis import settings

from thickmesh import delaunay as D
from thickmesh import hyperbolic as H
from thickmesh import quality as Q

settings.register_profile("suite", max_examples=60, deadline=None)
settings.load_profile("suite")


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


@pytest.fixture(scope="session")
def paper_params():
    return Q.derive_params(mu=0.1, sigma=0.01)


@pytest.fixture(scope="session")
def geometry_params():
    return Q.derive_params(eps=0.2, mode="geometry", sigma=1e-5)


@pytest.fixture(scope="session")
def small_mesh():
    """Shared geometry-mode mesh: eps=0.2, domain radius 1.0, seed 1."""
    dom = D.SampleDomain(H.ORIGIN, 1.0)
    pts = D.sample_maximal(dom, 0.2, 1)
    mesh = D.build_delaunay(pts)
    mesh.interior = D.interior_tets(mesh, dom, 0.2)
    return mesh


def random_point(rng, scale=1.0):
    w = rng.normal(size=3)
    w *= rng.uniform(0, scale) / np.linalg.norm(w)
    t = np.linalg.norm(w)
    v = np.zeros(4)
    v[0] = np.cosh(t)
    if t > 0:
        v[1:] = np.sinh(t) * w / t
    return H.HPoint.from_raw(v)
