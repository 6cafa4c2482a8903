import math

import numpy as np
import pytest

from hypmass import DerivativeScheme, Point
from hypmass.backgrounds import (
    build_background,
    builtin_metric,
    bump_perturbation_metric,
    nb_basis,
    tensor_perturbation_metric,
    verify_static,
)
from hypmass.errors import DomainError, UnknownBasisError


@pytest.mark.parametrize("k,n", [(1, 2), (1, 3), (0, 3), (-1, 3), (1, 4)])
def test_background_metric_block_structure(k, n, ):
    bg = build_background(k, n)
    p = Point(3.0, tuple(bg.boundary.nodes[0]))
    b = bg.b.at(p)
    assert b[0, 0] == pytest.approx(1.0 / (9.0 + k), rel=1e-14)
    assert np.max(np.abs(b[0, 1:])) == 0.0
    assert np.allclose(b[1:, 1:], 9.0 * bg.boundary.h_at(p.angles), rtol=1e-13)


def test_background_deviation_is_zero():
    bg = build_background(1, 3)
    p = Point(4.0, tuple(bg.boundary.nodes[5]))
    assert bg.b.has_deviation
    assert np.max(np.abs(bg.b.e_at(p))) == 0.0
    assert np.max(np.abs(bg.b.e_d_at(p))) == 0.0


def test_basis_sizes():
    assert len(nb_basis(build_background(1, 3))) == 4
    assert len(nb_basis(build_background(0, 3))) == 1
    assert len(nb_basis(build_background(-1, 3))) == 1


@pytest.mark.parametrize("n", [2, 3, 4])
def test_static_system_analytic(n):
    bg = build_background(1, n)
    pts = [Point(r, tuple(bg.boundary.nodes[0])) for r in (2.0, 5.0, 11.0)]
    for V in nb_basis(bg):
        rep = verify_static(bg.b, V, -n, pts, bg=bg)
        assert rep["passed"], rep
        assert rep["max_residual"] < 1e-8


def test_static_system_rejects_linear_potential():
    from hypmass.geometry import ScalarField

    bg = build_background(1, 3)
    V = ScalarField(
        value=lambda p: p.r,
        gradient=lambda p: np.array([1.0, 0.0, 0.0]),
        hessian=lambda p: np.zeros((3, 3)),
    )
    pts = [Point(r, tuple(bg.boundary.nodes[0])) for r in (2.0, 5.0)]
    rep = verify_static(bg.b, V, -3, pts, bg=bg)
    assert not rep["passed"]
    assert rep["max_residual"] > 1e-2


def test_kottler_at_minus_one_is_hyperbolic():
    # eta = -1 is the massless member of the family
    bg = build_background(1, 2)
    g = builtin_metric("kottler2d", bg, eta=-1.0)
    p = Point(3.3, (1.0,))
    assert np.allclose(g.at(p), bg.b.at(p), atol=1e-15)
    assert np.max(np.abs(g.e_at(p))) == 0.0


def test_kottler_deviation_matches_subtraction():
    bg = build_background(1, 2)
    g = builtin_metric("kottler2d", bg, eta=2.0)
    p = Point(4.0, (0.3,))
    assert np.allclose(g.e_at(p), g.at(p) - bg.b.at(p), atol=1e-14)
    assert np.allclose(g.e_d_at(p), g.d_at(p) - bg.b.d_at(p), atol=1e-14)


def test_sads_deviation_matches_subtraction():
    bg = build_background(1, 3)
    g = builtin_metric("schwarzschild_ads", bg, m_param=0.7)
    p = Point(5.0, (1.2, 0.4))
    assert np.allclose(g.e_at(p), g.at(p) - bg.b.at(p), atol=1e-13)
    assert np.allclose(g.e_d_at(p), g.d_at(p) - bg.b.d_at(p), atol=1e-13)


def test_sads_rejects_points_inside_horizon():
    bg = build_background(1, 3)
    g = builtin_metric("schwarzschild_ads", bg, m_param=1.0)
    r_h = float(g.params["r_min"])
    assert r_h > 0
    with pytest.raises(DomainError):
        g.at(Point(0.5 * r_h, (1.0, 1.0)))


def test_unknown_family_raises():
    bg = build_background(1, 2)
    with pytest.raises(DomainError):
        builtin_metric("euclidean", bg)


def test_basis_unavailable_for_torus_vector_slots():
    bg = build_background(0, 3)
    # only V0 exists; asking for it should work, anything else is an error
    pots = nb_basis(bg)
    assert [V.label for V in pots] == [0]


def test_perturbation_deviation_consistency():
    bg = build_background(1, 3)
    S = np.array([[0.3, 0.1, 0.0], [0.1, -0.2, 0.05], [0.0, 0.05, 0.4]])
    gt = tensor_perturbation_metric(bg, S, eps=0.01, power=3.0)
    gb = bump_perturbation_metric(bg, seed=11, eps=0.02)
    for g in (gt, gb):
        assert g.has_deviation
        for r, ang in [(2.5, (1.0, 0.7)), (3.5, (2.0, 4.0))]:
            p = Point(r, ang)
            assert np.allclose(g.e_at(p), g.at(p) - bg.b.at(p), atol=1e-13)
            assert np.allclose(g.e_d_at(p), g.d_at(p) - bg.b.d_at(p), atol=1e-13)


def test_bump_perturbation_vanishes_off_annulus():
    bg = build_background(1, 3)
    g = bump_perturbation_metric(bg, seed=3, eps=0.05, r_lo=2.0, r_hi=4.0)
    for r in (1.5, 4.5, 30.0):
        p = Point(r, (1.0, 1.0))
        assert np.max(np.abs(g.e_at(p))) == 0.0


def test_bump_perturbation_fd_matches_analytic_derivatives():
    bg = build_background(1, 3)
    g = bump_perturbation_metric(bg, seed=5, eps=0.01)
    from hypmass.geometry import metric_partials

    p = Point(3.1, (0.9, 2.2))
    da = metric_partials(g, DerivativeScheme("analytic"), p)
    df = metric_partials(g, DerivativeScheme("fd", 1e-5), p)
    assert np.max(np.abs(da - df)) < 1e-6
