"""Boundary manifolds (N, h) with quadrature, charts and embeddings.

Sphere charts are the recursive product chart (theta_1, ..., theta_{m-1},
phi) with h = d theta_1^2 + sin^2(theta_1) h_{S^{m-1}}; poles are excluded
from all node sets.  Quadrature weights approximate the Riemannian measure
d mu_h, so Sum(weights) = Vol(N).
"""

from __future__ import annotations

import math
from typing import Callable, Optional

import numpy as np

from .errors import DomainError
from .geometry import MetricField, Point

__all__ = [
    "BoundaryManifold",
    "circle_boundary",
    "sphere_boundary",
    "flat_torus_boundary",
    "hyperbolic_patch_boundary",
    "sphere_embedding",
    "sphere_volume",
]


def sphere_volume(m: int) -> float:
    """Volume of the unit round sphere S^m."""
    return 2.0 * math.pi ** ((m + 1) / 2.0) / math.gamma((m + 1) / 2.0)


# ---------------------------------------------------------------------------
# recursive round-sphere chart: metric, derivatives, embedding

def _sphere_metric(angles) -> np.ndarray:
    m = len(angles)
    if m == 1:
        return np.array([[1.0]])
    sub = _sphere_metric(angles[1:])
    h = np.zeros((m, m))
    h[0, 0] = 1.0
    h[1:, 1:] = math.sin(angles[0]) ** 2 * sub
    return h


def _sphere_metric_d(angles) -> np.ndarray:
    """dh[a, A, B] = d_a h_AB for the recursive sphere chart."""
    m = len(angles)
    dh = np.zeros((m, m, m))
    if m == 1:
        return dh
    th = angles[0]
    sub = _sphere_metric(angles[1:])
    dsub = _sphere_metric_d(angles[1:])
    dh[0, 1:, 1:] = 2.0 * math.sin(th) * math.cos(th) * sub
    for a in range(1, m):
        dh[a, 1:, 1:] = math.sin(th) ** 2 * dsub[a - 1]
    return dh


def sphere_embedding(angles):
    """Unit-sphere embedding n(v) in R^{m+1} with first and second derivatives.

    Returns (n, dn, d2n) with dn[a] = d_a n and d2n[a, b] = d_a d_b n.
    """
    m = len(angles)
    if m == 1:
        phi = angles[0]
        n = np.array([math.cos(phi), math.sin(phi)])
        dn = np.array([[-math.sin(phi), math.cos(phi)]])
        d2n = np.empty((1, 1, 2))
        d2n[0, 0] = -n
        return n, dn, d2n
    th = angles[0]
    ns, dns, d2ns = sphere_embedding(angles[1:])
    s, c = math.sin(th), math.cos(th)
    n = np.concatenate([s * ns, [c]])
    dn = np.zeros((m, m + 1))
    dn[0] = np.concatenate([c * ns, [-s]])
    dn[1:, :-1] = s * dns
    d2n = np.zeros((m, m, m + 1))
    d2n[0, 0] = -n
    for a in range(1, m):
        d2n[0, a, :-1] = c * dns[a - 1]
        d2n[a, 0] = d2n[0, a]
        for b in range(1, m):
            d2n[a, b, :-1] = s * d2ns[a - 1, b - 1]
    return n, dn, d2n


class BoundaryManifold:
    """Compact boundary manifold descriptor with quadrature.

    weights integrate the Riemannian measure d mu_h; the coarse node set
    backs the node-doubling quadrature-error estimate.
    """

    def __init__(
        self,
        name: str,
        dim: int,
        h_eval: Callable,
        h_d_eval: Callable,
        nodes: np.ndarray,
        weights: np.ndarray,
        coarse_nodes: np.ndarray,
        coarse_weights: np.ndarray,
        volume: float,
        scalar_curvature: float,
        embedding: Optional[Callable] = None,
        exact_for_radial_only: bool = False,
    ):
        self.name = name
        self.dim = int(dim)
        self.h_eval = h_eval
        self.h_d_eval = h_d_eval
        self.nodes = np.atleast_2d(np.asarray(nodes, dtype=float))
        self.weights = np.asarray(weights, dtype=float)
        self.coarse_nodes = np.atleast_2d(np.asarray(coarse_nodes, dtype=float))
        self.coarse_weights = np.asarray(coarse_weights, dtype=float)
        self.volume = float(volume)
        self.scalar_curvature = float(scalar_curvature)
        self.embedding = embedding
        self.exact_for_radial_only = exact_for_radial_only
        if abs(self.weights.sum() - self.volume) > 1e-10 * max(1.0, self.volume):
            raise DomainError(
                f"quadrature weights sum to {self.weights.sum()}, "
                f"expected volume {self.volume}"
            )

    def h_at(self, angles) -> np.ndarray:
        return np.asarray(self.h_eval(tuple(angles)), dtype=float)

    def dh_at(self, angles) -> np.ndarray:
        return np.asarray(self.h_d_eval(tuple(angles)), dtype=float)

    def sqrt_det_h(self, angles) -> float:
        return float(np.sqrt(np.linalg.det(self.h_at(angles))))

    def metric_field(self) -> MetricField:
        """The boundary metric as a MetricField over the angle chart.

        The radial slot of the Point is a dummy coordinate; only
        curvature checks of h use this view (dim >= 2).
        """
        if self.dim < 2:
            raise DomainError("metric_field needs dim >= 2")

        def ev(p: Point):
            return self.h_at(p.angles)

        def dev(p: Point):
            d = np.zeros((self.dim + 1, self.dim + 1, self.dim + 1))
            dang = self.dh_at(p.angles)
            d[1:, 1:, 1:] = dang
            # pad the dummy radial slot with an identity block so the
            # (dim+1)-matrix stays invertible
            return d

        def ev_padded(p: Point):
            h = np.eye(self.dim + 1)
            h[1:, 1:] = self.h_at(p.angles)
            return h

        return MetricField(self.dim + 1, ev_padded, dev, name=f"h[{self.name}]")


def _circle_nodes(num: int):
    # offset grid keeps phi = 0 out of the node set
    phi = (np.arange(num) + 0.5) * 2.0 * math.pi / num
    w = np.full(num, 2.0 * math.pi / num)
    return phi[:, None], w


def circle_boundary(num_nodes: int = 128) -> BoundaryManifold:
    """Unit circle of circumference 2*pi (the n = 2, k = 1 boundary)."""
    nodes, w = _circle_nodes(num_nodes)
    cnodes, cw = _circle_nodes(max(4, num_nodes // 2))

    def h_eval(angles):
        return np.array([[1.0]])

    def h_d_eval(angles):
        return np.zeros((1, 1, 1))

    def emb(angles):
        return sphere_embedding(angles)

    return BoundaryManifold(
        "circle", 1, h_eval, h_d_eval, nodes, w, cnodes, cw,
        volume=2.0 * math.pi, scalar_curvature=0.0, embedding=emb,
    )


def _sphere_quadrature(dim: int, sizes):
    """Recursive product quadrature on S^dim for the measure d mu_h."""
    if dim == 1:
        return _circle_nodes(sizes[0])
    size = sizes[0]
    p = dim - 1  # sin^p(theta) factor at this level
    if p == 1:
        u, wu = np.polynomial.legendre.leggauss(size)
        theta = np.arccos(u)
        wt = wu
    else:
        t, wt0 = np.polynomial.legendre.leggauss(size)
        theta = 0.5 * math.pi * (t + 1.0)
        wt = 0.5 * math.pi * wt0 * np.sin(theta) ** p
    sub_nodes, sub_w = _sphere_quadrature(dim - 1, sizes[1:])
    nodes = []
    weights = []
    for th, w1 in zip(theta, wt):
        for sn, w2 in zip(sub_nodes, sub_w):
            nodes.append(np.concatenate([[th], sn]))
            weights.append(w1 * w2)
    return np.array(nodes), np.array(weights)


def sphere_boundary(dim: int, sizes=None) -> BoundaryManifold:
    """Unit round sphere S^dim in the recursive product chart."""
    if dim < 1:
        raise DomainError("sphere dimension must be >= 1")
    if dim == 1:
        return circle_boundary(sizes[0] if sizes else 128)
    if sizes is None:
        sizes = [32, 64] if dim == 2 else [12] * (dim - 1) + [24]
    if len(sizes) != dim:
        raise DomainError(f"need {dim} quadrature sizes for S^{dim}")
    nodes, w = _sphere_quadrature(dim, sizes)
    csizes = [max(4, s // 2) for s in sizes]
    cnodes, cw = _sphere_quadrature(dim, csizes)
    R = (dim) * (dim - 1)  # scalar curvature of the unit S^dim

    return BoundaryManifold(
        f"sphere{dim}", dim, _sphere_metric, _sphere_metric_d,
        nodes, w, cnodes, cw,
        volume=sphere_volume(dim), scalar_curvature=float(R),
        embedding=sphere_embedding,
    )


def _grid(dim, counts, lo, hi):
    axes = [(np.arange(c) + 0.5) * (hi - lo) / c + lo for c in counts]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def flat_torus_boundary(dim: int, counts=None) -> BoundaryManifold:
    """Unit-volume flat torus [0,1)^dim (the normalized k = 0 boundary)."""
    if counts is None:
        counts = [16] * dim
    nodes = _grid(dim, counts, 0.0, 1.0)
    w = np.full(len(nodes), 1.0 / len(nodes))
    ccounts = [max(2, c // 2) for c in counts]
    cnodes = _grid(dim, ccounts, 0.0, 1.0)
    cw = np.full(len(cnodes), 1.0 / len(cnodes))

    def h_eval(angles):
        return np.eye(dim)

    def h_d_eval(angles):
        return np.zeros((dim, dim, dim))

    return BoundaryManifold(
        "flat-torus", dim, h_eval, h_d_eval, nodes, w, cnodes, cw,
        volume=1.0, scalar_curvature=0.0,
    )


def hyperbolic_patch_boundary(dim: int = 2, counts=None, volume=None) -> BoundaryManifold:
    """Local model of a compact hyperbolic boundary (the k = -1 case).

    Chart: upper-half-space metric h = (sum dxi^2)/zeta^2 on a coordinate
    box, with weights rescaled so they sum to the declared total volume
    (default 4*pi, a genus-2 surface for dim = 2).  The node set samples
    the local geometry exactly; integrals are exact only for integrands
    constant over N, which covers every built-in radial metric family.
    """
    if dim < 2:
        raise DomainError("hyperbolic patch needs dim >= 2")
    if volume is None:
        volume = 4.0 * math.pi if dim == 2 else 1.0
    if counts is None:
        counts = [8] * dim

    def make(counts_):
        nodes = _grid(dim, counts_, 0.0, 1.0)
        nodes[:, -1] += 1.0  # zeta in [1, 2]
        w = nodes[:, -1] ** (-dim)
        w *= volume / w.sum()
        return nodes, w

    nodes, w = make(counts)
    cnodes, cw = make([max(2, c // 2) for c in counts])

    def h_eval(angles):
        return np.eye(dim) / angles[-1] ** 2

    def h_d_eval(angles):
        d = np.zeros((dim, dim, dim))
        d[-1] = -2.0 * np.eye(dim) / angles[-1] ** 3
        return d

    return BoundaryManifold(
        "hyperbolic-patch", dim, h_eval, h_d_eval, nodes, w, cnodes, cw,
        volume=volume, scalar_curvature=float(-dim * (dim - 1)),
        exact_for_radial_only=True,
    )
