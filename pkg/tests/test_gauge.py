import math

import numpy as np
import pytest

from hypmass import DerivativeScheme, Point
from hypmass.backgrounds import build_background, builtin_metric, nb_basis
from hypmass.errors import DomainError
from hypmass.gauge import (
    LorentzMap,
    apply_radial_gauge,
    decay_report,
    gauge_monotonicity_bound,
    loglog_slope,
    lorentz_act,
    predicted_gauge_mass,
    radial_reparametrize,
)
from hypmass.mass import MomentumCovector, classify_covector, momentum_vector

SCHEME = DerivativeScheme()
RADII = [10.0, 31.6227766, 100.0, 316.227766, 1000.0]


def test_lorentz_validation():
    with pytest.raises(DomainError):
        LorentzMap(np.diag([2.0, 1.0, 1.0]))
    with pytest.raises(DomainError):
        LorentzMap(-np.eye(3))  # non-orthochronous


def test_boost_and_rotation_factories():
    B = LorentzMap.boost(3, 1, 0.5)
    assert B.matrix[0, 0] == pytest.approx(math.cosh(0.5))
    R = LorentzMap.rotation(3, 1, 2, 0.3)
    assert R.matrix[0, 0] == 1.0
    assert np.allclose(R.matrix[1:, 1:] @ R.matrix[1:, 1:].T, np.eye(2), atol=1e-14)


def test_lorentz_action_preserves_norm_and_class():
    rng = np.random.default_rng(42)
    p = MomentumCovector(components=[3.0, 1.0, -0.5, 0.2])
    for _ in range(50):
        L = LorentzMap.random(4, rng)
        q = lorentz_act(L, p)
        assert q.eta_norm2 == pytest.approx(p.eta_norm2, abs=1e-12)
        assert classify_covector(q.components) == classify_covector(p.components)


def test_radial_reparametrize_identity():
    bg = build_background(1, 2)
    g = radial_reparametrize(bg.b, lambda r: r, lambda r: 1.0, lambda r: 0.0)
    p = Point(3.0, (0.4,))
    assert np.allclose(g.at(p), bg.b.at(p), atol=1e-15)
    assert np.allclose(g.d_at(p), bg.b.d_at(p), atol=1e-15)


def test_radial_reparametrize_scaling_oracle():
    # pulling b back through rbar = 2r gives g_rr = 4/(4r^2+1), g_AB = 4r^2 h
    bg = build_background(1, 2)
    g = radial_reparametrize(bg.b, lambda r: 2 * r, lambda r: 2.0, lambda r: 0.0)
    p = Point(3.0, (0.4,))
    assert g.at(p)[0, 0] == pytest.approx(4.0 / 37.0, rel=1e-14)
    assert g.at(p)[1, 1] == pytest.approx(36.0, rel=1e-14)


def test_gauge_zero_gamma_is_identity():
    bg = build_background(1, 3)
    g0 = builtin_metric("hyperbolic", bg)
    g = apply_radial_gauge(g0, 0.0, 3)
    p = Point(4.0, (1.0, 1.0))
    assert np.allclose(g.at(p), g0.at(p), atol=1e-15)


def test_gauge_monotonicity_bound():
    assert gauge_monotonicity_bound(2, 1.0) == 0.0
    assert gauge_monotonicity_bound(2, -1.5) == 1.5
    assert gauge_monotonicity_bound(4, 1.0) == pytest.approx(1.0)
    assert gauge_monotonicity_bound(3, -0.5) == pytest.approx(0.5 ** (2.0 / 3.0))


def test_predicted_gauge_mass_values():
    # n = 2: (1/4)*10*2*1*gamma^2*2pi = 5 gamma^2 * 2pi
    assert predicted_gauge_mass(2, 1.0) == pytest.approx(10 * math.pi)
    assert predicted_gauge_mass(3, 1.0) == pytest.approx(0.25 * 11 * 6 * 4 * math.pi)
    with pytest.raises(DomainError):
        predicted_gauge_mass(1, 1.0)


def test_gauge_deformation_mass_n2():
    bg = build_background(1, 2)
    g = apply_radial_gauge(builtin_metric("hyperbolic", bg), 1.0, 2)
    p = momentum_vector(g, bg, SCHEME, radii=RADII, potentials=nb_basis(bg)[:1], rtol=1e-3)
    assert p.components[0] == pytest.approx(10 * math.pi, rel=1e-3)


def test_loglog_slope_recovers_power():
    x = np.array([1.0, 2.0, 4.0, 8.0, 16.0])
    slope, se = loglog_slope(x, 3.0 * x**-2.5)
    assert slope == pytest.approx(-2.5, abs=1e-12)
    assert se < 1e-12


def test_decay_report_verdicts():
    bg = build_background(1, 3)
    g = builtin_metric("schwarzschild_ads", bg, m_param=0.5)
    rep = decay_report(g, bg, nb_basis(bg), RADII)
    assert rep.all_pass
    gd = apply_radial_gauge(builtin_metric("hyperbolic", bg), 1.0, 3)
    repd = decay_report(gd, bg, nb_basis(bg), RADII)
    # critical-rate deformation sits exactly at the threshold
    assert repd.m5["verdict"] != "pass"


def test_decay_report_needs_five_radii():
    bg = build_background(1, 2)
    g = builtin_metric("hyperbolic", bg)
    with pytest.raises(DomainError):
        decay_report(g, bg, nb_basis(bg), [10.0, 100.0])
