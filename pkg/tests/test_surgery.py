import numpy as np
import pytest

from mcflab.curvature import compute_curvature
from mcflab.errors import GuardViolated
from mcflab.mesh import validate_surface
from mcflab.scenarios import make_capsule, make_sphere
from mcflab.surgery import (SurgeryConfig, detect_neck, h1_scale_guard,
                            perform_surgery)


def test_guard_arithmetic_exact():
    # H1 r0 > 1e6 L0 Theta with L0=10, Theta=2, r0=0.1
    cfg = SurgeryConfig(h1=1e9, h2=2e9, h3=4e9, l0=10, theta=2)
    ok, margin = h1_scale_guard(cfg, 0.1)
    assert ok and abs(margin - 5.0) < 1e-12
    cfg2 = SurgeryConfig(h1=1e7, h2=2e7, h3=4e7, l0=10, theta=2)
    ok2, margin2 = h1_scale_guard(cfg2, 0.1)
    assert (not ok2) and abs(margin2 - 0.05) < 1e-12


def test_guard_lab_override_passes():
    cfg = SurgeryConfig(h1=3.0, h2=6.0, h3=12.0, guard_factor=0.002)
    ok, margin = h1_scale_guard(cfg, 0.05)
    assert ok and margin > 1.0


def test_thresholds_validated():
    with pytest.raises(ValueError):
        SurgeryConfig(h1=10.0, h2=5.0, h3=20.0)


def test_detect_neck_cylinder():
    cap = make_capsule(rho=0.1, length=0.6)
    cd = compute_curvature(cap.surface)
    cfg = SurgeryConfig(h1=5.0, h2=9.0, h3=18.0, eps_neck=0.35)
    necks = detect_neck(cap.surface, cd, cfg)
    assert len(necks) == 1
    assert abs(necks[0].rho - 0.1) < 1e-3
    assert necks[0].quality < 1e-6


def test_detect_neck_sphere_none(sphere3):
    sc, cd = sphere3
    cfg = SurgeryConfig(h1=0.5, h2=1.0, h3=2.0, eps_neck=0.35)
    assert detect_neck(sc.surface, cd, cfg) == []


def test_capsule_cut_and_cap():
    cap = make_capsule(rho=0.1, length=0.6)
    cd = compute_curvature(cap.surface)
    cfg = SurgeryConfig(h1=5.0, h2=9.0, h3=18.0, eps_neck=0.35)
    necks = detect_neck(cap.surface, cd, cfg)
    new = perform_surgery(cap.surface, necks[0], cfg, data=cd)
    validate_surface(new)
    comps = new.connected_components()
    assert len(comps) == 2
    cdn = compute_curvature(new)
    assert cdn.mean.min() > 0
    f = new.faces
    for comp in comps:
        mask = np.zeros(new.n_vertices, bool)
        mask[comp] = True
        fs = f[mask[f].all(axis=1)]
        ed = np.unique(np.sort(np.concatenate(
            [fs[:, [0, 1]], fs[:, [1, 2]], fs[:, [2, 0]]]), axis=1), axis=0)
        assert len(comp) - len(ed) + len(fs) == 2  # Euler characteristic


def test_surgery_requires_trigger(sphere3):
    sc, cd = sphere3
    cfg = SurgeryConfig(h1=5.0, h2=9.0, h3=18.0)
    from mcflab.surgery import NeckRegion
    fake = NeckRegion(np.arange(10), np.zeros(3), np.array([1.0, 0, 0]),
                      0.1, 4.0, 0.0, 0.2)
    with pytest.raises(GuardViolated):
        perform_surgery(sc.surface, fake, cfg, data=cd)


def test_guard_containment_enforced():
    # guard passes arithmetically but the neck does not fit in an r0-ball
    cap = make_capsule(rho=0.1, length=0.6)
    cd = compute_curvature(cap.surface)
    cfg = SurgeryConfig(h1=5.0, h2=9.0, h3=18.0, guard_factor=1e-6)
    necks = detect_neck(cap.surface, cd, cfg)
    assert h1_scale_guard(cfg, 0.01)[0]
    with pytest.raises(GuardViolated):
        perform_surgery(cap.surface, necks[0], cfg, r0=0.01, data=cd)
