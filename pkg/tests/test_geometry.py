import math

import numpy as np
import pytest

from hypmass import DerivativeScheme, MetricField, Point
from hypmass.backgrounds import build_background, nb_basis
from hypmass.errors import DegenerateMetricError, DomainError
from hypmass.geometry import (
    christoffel,
    christoffel_from_partials,
    covariant_hessian,
    metric_partials,
    ricci_and_scalar,
)


def polar_flat():
    # flat plane in polar coordinates
    def ev(p):
        return np.diag([1.0, p.r**2])

    def dev(p):
        d = np.zeros((2, 2, 2))
        d[0, 1, 1] = 2.0 * p.r
        return d

    return MetricField(2, ev, dev, name="polar-flat")


def test_point_rejects_nonpositive_radius():
    with pytest.raises(DomainError):
        Point(0.0)
    with pytest.raises(DomainError):
        Point(-3.0, (0.1,))


def test_point_shift_and_coords():
    p = Point(2.0, (0.3, 0.7))
    q = p.shifted(2, 0.1)
    assert q.r == 2.0
    assert q.angles == pytest.approx((0.3, 0.8))
    assert np.allclose(Point.from_coords(p.coords).coords, p.coords)


def test_scheme_validation():
    with pytest.raises(DomainError):
        DerivativeScheme("symbolic")
    with pytest.raises(DomainError):
        DerivativeScheme("fd", h0=0.0)


def test_scheme_radial_step_scales_with_r():
    s = DerivativeScheme("fd", h0=1e-4)
    h = s.steps(Point(50.0, (0.2,)), 2)
    assert h[0] == pytest.approx(5e-3)
    assert h[1] == pytest.approx(1e-4)


def test_christoffel_hyperbolic_radial_value():
    # b = dr^2/(r^2+1) + r^2 dphi^2: Gamma^r_phiphi = -r(r^2+1)
    bg = build_background(1, 2)
    gam = christoffel(bg.b, DerivativeScheme(), Point(2.0, (0.5,)))
    assert gam[0, 1, 1] == pytest.approx(-2.0 * 5.0, rel=1e-12)
    # Gamma^phi_rphi = 1/r
    assert gam[1, 0, 1] == pytest.approx(0.5, rel=1e-12)


def test_polar_flat_is_ricci_flat():
    g = polar_flat()
    ric, scal = ricci_and_scalar(g, DerivativeScheme(), Point(1.7, (0.4,)))
    # the Christoffel derivative layer is an FD; expect ~1e-8 noise
    assert np.max(np.abs(ric)) < 1e-7
    assert abs(scal) < 1e-7


def test_fd_partials_match_analytic():
    bg = build_background(1, 3)
    p = Point(3.0, (1.1, 0.6))
    da = metric_partials(bg.b, DerivativeScheme("analytic"), p)
    df = metric_partials(bg.b, DerivativeScheme("fd", 1e-5), p)
    assert np.max(np.abs(da - df)) < 1e-7


def test_fd_partials_second_order():
    # halving h should cut the FD error by ~4
    bg = build_background(1, 2)
    p = Point(2.0, (0.8,))
    exact = metric_partials(bg.b, DerivativeScheme("analytic"), p)
    errs = []
    for h in (1e-2, 5e-3):
        d = metric_partials(bg.b, DerivativeScheme("fd", h), p)
        errs.append(np.max(np.abs(d - exact)))
    ratio = errs[0] / errs[1]
    assert 3.5 < ratio < 4.5


@pytest.mark.parametrize("n", [2, 3, 4])
def test_background_scalar_curvature(n):
    bg = build_background(1, n)
    _, scal = ricci_and_scalar(bg.b, DerivativeScheme(), Point(2.3, (0.7,) * (n - 1)))
    assert scal == pytest.approx(-n * (n - 1), abs=5e-6)


def test_degenerate_metric_raises():
    g = MetricField(2, lambda p: np.diag([1.0, -1.0]))
    with pytest.raises(DegenerateMetricError):
        christoffel_from_partials(g.at(Point(1.0, (0.0,))), np.zeros((2, 2, 2)), Point(1.0, (0.0,)))


def test_covariant_hessian_of_cosmological_potential():
    # V = sqrt(r^2+1) solves Hess V = V b on the hyperbolic background
    bg = build_background(1, 2)
    V = nb_basis(bg)[0]
    p = Point(1.9, (0.3,))
    hess = covariant_hessian(bg.b, DerivativeScheme(), V, p)
    assert np.max(np.abs(hess - V.value(p) * bg.b.at(p))) < 1e-10


def test_metric_shape_check():
    g = MetricField(3, lambda p: np.eye(2))
    with pytest.raises(DomainError):
        g.at(Point(1.0, (0.0, 0.0)))
