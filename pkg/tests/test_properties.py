import numpy as np
from hypothesis import given, settings, strategies as st

from mcflab.curvature import compute_curvature
from mcflab.mesh import DiscreteHypersurface
from mcflab.noncollapse import double_point_Z
from mcflab.remesh import enforce_edge_band
from mcflab.scenarios import make_circle


def star_curve(coeffs, n=64):
    """Star-shaped closed curve r(t) = 1 + sum a_k cos(k t) + b_k sin(k t)."""
    t = np.linspace(0, 2 * np.pi, n, endpoint=False)
    r = np.ones_like(t)
    for k, (a, b) in enumerate(coeffs, start=1):
        r += a * np.cos(k * t) + b * np.sin(k * t)
    return DiscreteHypersurface(1, np.stack([r * np.cos(t), r * np.sin(t)], axis=1))


small = st.floats(-0.08, 0.08, allow_nan=False)
coeff_lists = st.lists(st.tuples(small, small), min_size=1, max_size=4)


@given(coeff_lists)
@settings(max_examples=25, deadline=None)
def test_double_point_identity(coeffs):
    surf = star_curve(coeffs)
    data = compute_curvature(surf)
    n = surf.n_vertices
    for x, y in ((0, n // 2), (5, 40), (17, 60)):
        dp = double_point_Z(surf, data, x, y)
        lhs = dp.z * dp.chord ** 2 / 2
        rhs = np.dot(surf.vertices[x] - surf.vertices[y], data.normals[x])
        assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(rhs))


@given(coeff_lists, st.floats(0.2, 5.0))
@settings(max_examples=25, deadline=None)
def test_scale_covariance_of_Z(coeffs, lam):
    surf = star_curve(coeffs)
    data = compute_curvature(surf)
    scaled = surf.with_vertices(surf.vertices * lam)
    data2 = compute_curvature(scaled)
    for x, y in ((0, 30), (11, 50)):
        z1 = double_point_Z(surf, data, x, y).z
        z2 = double_point_Z(scaled, data2, x, y).z
        assert abs(z2 * lam - z1) < 1e-9 * max(1.0, abs(z1))


@given(coeff_lists)
@settings(max_examples=25, deadline=None)
def test_orientation_flip_negates(coeffs):
    surf = star_curve(coeffs)
    d1 = compute_curvature(surf)
    d2 = compute_curvature(surf.flipped())
    assert np.allclose(d1.mean, -d2.mean)
    assert np.allclose(d1.normals, -d2.normals)
    assert np.allclose(d1.norm_A_sq, d2.norm_A_sq)


@given(st.floats(0.02, 0.08), coeff_lists)
@settings(max_examples=20, deadline=None)
def test_remesh_band_property(lmin, coeffs):
    surf = star_curve(coeffs, n=48)
    band = (lmin, 2 * lmin)
    new, _ = enforce_edge_band(surf, band)
    el = new.edge_lengths()
    assert el.max() <= band[1] * (1 + 1e-9)
    assert new.closed and new.n_vertices >= 4
    # the curve stays near the original (vertices on or between old vertices)
    assert abs(new.enclosed_area() - surf.enclosed_area()) < 0.2 * abs(surf.enclosed_area())


@given(st.integers(16, 200), st.floats(0.3, 3.0))
@settings(max_examples=20, deadline=None)
def test_circle_curvature_scales(n, r):
    sc = make_circle(r, max(16, n))
    data = compute_curvature(sc.surface)
    assert np.abs(data.mean - 1 / r).max() < 2e-2 / r
