import math

import numpy as np
import pytest

from hypmass.boundary import (
    circle_boundary,
    flat_torus_boundary,
    hyperbolic_patch_boundary,
    sphere_boundary,
    sphere_volume,
)
from hypmass.geometry import Point


def test_sphere_volume_values():
    assert sphere_volume(1) == pytest.approx(2 * math.pi)
    assert sphere_volume(2) == pytest.approx(4 * math.pi)
    assert sphere_volume(3) == pytest.approx(2 * math.pi**2)


def test_circle_quadrature_volume():
    bnd = circle_boundary(64)
    assert bnd.dim == 1
    vol = sum(w for w in bnd.weights)
    assert vol == pytest.approx(2 * math.pi, rel=1e-13)


@pytest.mark.parametrize("m", [2, 3])
def test_sphere_quadrature_volume(m):
    bnd = sphere_boundary(m)
    vols = sum(
        w * bnd.sqrt_det_h(a) / bnd.sqrt_det_h(a) for a, w in zip(bnd.nodes, bnd.weights)
    )
    # weights already include sqrt(det h)
    assert sum(bnd.weights) == pytest.approx(sphere_volume(m), rel=1e-10)


def test_circle_integrates_low_harmonics_exactly():
    bnd = circle_boundary(32)
    val = sum(w * (1.0 + math.cos(3 * a[0]) + math.sin(5 * a[0])) for a, w in zip(bnd.nodes, bnd.weights))
    assert val == pytest.approx(2 * math.pi, abs=1e-12)


def test_sphere_embedding_identities():
    bnd = sphere_boundary(2)
    for ang in bnd.nodes[::97]:
        n, dn, d2n = bnd.embedding(ang)
        assert np.linalg.norm(n) == pytest.approx(1.0, rel=1e-13)
        # tangency: n . d_A n = 0
        assert np.max(np.abs(dn @ n)) < 1e-12
        # first fundamental form reproduces the round metric
        assert np.allclose(dn @ dn.T, bnd.h_at(ang), atol=1e-12)


def test_metric_field_view_pads_radial_slot():
    bnd = sphere_boundary(2)
    mf = bnd.metric_field()
    ang = tuple(bnd.nodes[10])
    g = mf.at(Point(1.0, ang))
    assert g.shape == (3, 3)
    assert g[0, 0] == 1.0  # padded radial slot keeps the matrix invertible
    assert np.allclose(g[1:, 1:], bnd.h_at(ang))


def test_flat_torus_metric_is_constant():
    bnd = flat_torus_boundary(2)
    assert sum(bnd.weights) == pytest.approx(bnd.volume, rel=1e-12)
    h0 = bnd.h_at(tuple(bnd.nodes[0]))
    for ang in bnd.nodes[1:: len(bnd.nodes) // 5]:
        assert np.allclose(bnd.h_at(tuple(ang)), h0, atol=1e-15)
        assert np.max(np.abs(bnd.dh_at(tuple(ang)))) == 0.0


def test_hyperbolic_patch_is_radial_only():
    bnd = hyperbolic_patch_boundary(2)
    assert bnd.exact_for_radial_only
    assert sum(bnd.weights) == pytest.approx(bnd.volume, rel=1e-10)
