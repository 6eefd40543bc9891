import numpy as np
import pytest

from mcflab.curvature import compute_curvature
from mcflab.domain import build_domain
from mcflab.scenarios import (make_circle, make_dumbbell, make_ellipse,
                              make_grim_reaper, make_limacon, make_sphere)
from mcflab.tracing import Tracer


@pytest.fixture(scope="session")
def circle256():
    sc = make_circle(1.0, 256)
    return sc, compute_curvature(sc.surface)


@pytest.fixture(scope="session")
def circle_domain():
    sc = make_circle(1.0, 256)
    cd = compute_curvature(sc.surface)
    dc = build_domain(sc.surface, sc.domain_hints)
    return sc, cd, dc, Tracer(dc)


@pytest.fixture(scope="session")
def sphere4():
    sc = make_sphere(1.0, 4)
    return sc, compute_curvature(sc.surface)


@pytest.fixture(scope="session")
def sphere3():
    sc = make_sphere(1.0, 3)
    return sc, compute_curvature(sc.surface)


@pytest.fixture(scope="session")
def limacon():
    sc = make_limacon()
    return sc, compute_curvature(sc.surface)


@pytest.fixture(scope="session")
def limacon_domain(limacon):
    sc, cd = limacon
    dc = build_domain(sc.surface, sc.domain_hints)
    return sc, cd, dc, Tracer(dc)


@pytest.fixture(scope="session")
def dumbbell():
    sc = make_dumbbell()
    return sc, compute_curvature(sc.surface)


@pytest.fixture(scope="session")
def dumbbell_small():
    sc = make_dumbbell(n_axial=44, n_phi=40)
    return sc, compute_curvature(sc.surface)


@pytest.fixture(scope="session")
def ellipse256():
    sc = make_ellipse(2.0, 1.0, 256)
    return sc, compute_curvature(sc.surface)


@pytest.fixture(scope="session")
def grim_reaper():
    sc = make_grim_reaper()
    return sc, compute_curvature(sc.surface)
