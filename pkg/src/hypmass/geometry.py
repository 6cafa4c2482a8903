"""Chart-based tensor calculus on the product chart [R, inf) x N.

Coordinates are ordered (r, v^1, ..., v^{n-1}) with the radial coordinate
first.  Metrics are represented by `MetricField` objects returning the full
n x n coordinate-component matrix at a point; first derivatives come either
from an analytic callback or from central finite differences, second
derivatives always from differencing the first-derivative layer.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DegenerateMetricError, DomainError

__all__ = [
    "Point",
    "MetricField",
    "DerivativeScheme",
    "ScalarField",
    "metric_partials",
    "christoffel",
    "christoffel_from_partials",
    "ricci_and_scalar",
    "covariant_hessian",
]


@dataclass(frozen=True)
class Point:
    """A point (r, v^1..v^{n-1}) on the asymptotic end chart."""

    r: float
    angles: tuple = ()

    def __post_init__(self):
        if not self.r > 0.0:
            raise DomainError(f"radial coordinate must be positive, got r={self.r}")
        object.__setattr__(self, "angles", tuple(float(a) for a in self.angles))

    @property
    def coords(self) -> np.ndarray:
        return np.array((self.r,) + self.angles)

    def shifted(self, axis: int, delta: float) -> "Point":
        """Point displaced by delta along one coordinate axis."""
        c = list((self.r,) + self.angles)
        c[axis] += delta
        return Point(c[0], tuple(c[1:]))

    @staticmethod
    def from_coords(x) -> "Point":
        x = np.asarray(x, dtype=float)
        return Point(float(x[0]), tuple(x[1:]))


class MetricField:
    """Map Point -> symmetric coordinate-component matrix.

    `d_eval`, when given, must return the array dg[a, i, j] = d_a g_ij.

    `e_eval`/`e_d_eval` optionally give the deviation e = g - b from the
    reference metric (and its partials) in closed form.  Flux integrands
    consume these when present: at large r the subtraction g - b loses
    most of its significant digits, while a closed-form e does not.
    """

    def __init__(self, dim, eval_fn, d_eval=None, name="", params=None,
                 e_eval=None, e_d_eval=None):
        self.dim = int(dim)
        self._eval = eval_fn
        self._d_eval = d_eval
        self._e_eval = e_eval
        self._e_d_eval = e_d_eval
        self.name = name
        self.params = dict(params or {})

    @property
    def has_analytic_derivatives(self) -> bool:
        return self._d_eval is not None

    @property
    def has_deviation(self) -> bool:
        return self._e_eval is not None and self._e_d_eval is not None

    def e_at(self, p: Point) -> np.ndarray:
        return np.asarray(self._e_eval(p), dtype=float)

    def e_d_at(self, p: Point) -> np.ndarray:
        return np.asarray(self._e_d_eval(p), dtype=float)

    def at(self, p: Point) -> np.ndarray:
        g = np.asarray(self._eval(p), dtype=float)
        if g.shape != (self.dim, self.dim):
            raise DomainError(
                f"metric eval returned shape {g.shape}, expected {(self.dim, self.dim)}"
            )
        return g

    def d_at(self, p: Point) -> np.ndarray:
        if self._d_eval is None:
            raise DomainError(f"metric '{self.name}' has no analytic derivative callback")
        return np.asarray(self._d_eval(p), dtype=float)

    def __repr__(self):
        return f"MetricField({self.name or 'anonymous'}, dim={self.dim})"


@dataclass(frozen=True)
class ScalarField:
    """Scalar field with value/gradient callbacks (coordinate components).

    `hessian`, when present, returns the plain coordinate second partials
    d_i d_j V (not the covariant Hessian).
    """

    value: Callable[[Point], float]
    gradient: Callable[[Point], np.ndarray]
    hessian: Optional[Callable[[Point], np.ndarray]] = None


@dataclass(frozen=True)
class DerivativeScheme:
    """Differentiation mode plus the relative step rule h = h0 * max(1, r).

    The radial step is scaled with r because the angular metric components
    grow like r^2; angular coordinates keep the bare step h0.
    """

    mode: str = "analytic"
    h0: float = 1e-4

    def __post_init__(self):
        if self.mode not in ("analytic", "fd"):
            raise DomainError(f"unknown derivative mode '{self.mode}'")
        if not self.h0 > 0:
            raise DomainError("h0 must be positive")

    def steps(self, p: Point, dim: int) -> np.ndarray:
        h = np.full(dim, self.h0)
        h[0] = self.h0 * max(1.0, p.r)
        return h

    def outer_steps(self, p: Point, dim: int) -> np.ndarray:
        # Nested differencing offsets the outer step by sqrt(2) in FD mode
        # so the two levels do not share stencil points.
        s = self.steps(p, dim)
        return s * np.sqrt(2.0) if self.mode == "fd" else s


def metric_partials(g: MetricField, scheme: DerivativeScheme, p: Point) -> np.ndarray:
    """First partials dg[a, i, j] = d_a g_ij."""
    if scheme.mode == "analytic" and g.has_analytic_derivatives:
        return g.d_at(p)
    n = g.dim
    h = scheme.steps(p, n)
    dg = np.empty((n, n, n))
    for a in range(n):
        gp = g.at(p.shifted(a, +h[a]))
        gm = g.at(p.shifted(a, -h[a]))
        dg[a] = (gp - gm) / (2.0 * h[a])
    return dg


def _inverse(gmat: np.ndarray, p: Point) -> np.ndarray:
    sign, logdet = np.linalg.slogdet(gmat)
    if sign <= 0 or not np.isfinite(logdet):
        raise DegenerateMetricError(p)
    return np.linalg.inv(gmat)


def christoffel_from_partials(gmat: np.ndarray, dg: np.ndarray, p: Point) -> np.ndarray:
    ginv = _inverse(gmat, p)
    # Gamma^k_ij = 1/2 g^{kl} (d_i g_jl + d_j g_il - d_l g_ij)
    term = np.einsum("ijl->lij", dg) + np.einsum("jil->lij", dg) - dg
    return 0.5 * np.einsum("kl,lij->kij", ginv, term)


def christoffel(g: MetricField, scheme: DerivativeScheme, p: Point) -> np.ndarray:
    """Christoffel symbols Gamma[k, i, j] of g at p."""
    return christoffel_from_partials(g.at(p), metric_partials(g, scheme, p), p)


def ricci_and_scalar(g: MetricField, scheme: DerivativeScheme, p: Point):
    """Ricci tensor and scalar curvature of g at p.

    The Christoffel derivative is a central difference of the (analytic or
    FD) first-derivative layer, with the outer step offset in FD mode.
    """
    n = g.dim
    H = scheme.outer_steps(p, n)
    gam = christoffel(g, scheme, p)
    dgam = np.empty((n, n, n, n))  # dgam[a, k, i, j] = d_a Gamma^k_ij
    for a in range(n):
        gp = christoffel(g, scheme, p.shifted(a, +H[a]))
        gm = christoffel(g, scheme, p.shifted(a, -H[a]))
        dgam[a] = (gp - gm) / (2.0 * H[a])
    ric = (
        np.einsum("kkij->ij", dgam)
        - np.einsum("ikkj->ij", dgam)
        + np.einsum("kkl,lij->ij", gam, gam)
        - np.einsum("kil,lkj->ij", gam, gam)
    )
    ric = 0.5 * (ric + ric.T)
    ginv = _inverse(g.at(p), p)
    return ric, float(np.einsum("ij,ij->", ginv, ric))


def covariant_hessian(
    b: MetricField, scheme: DerivativeScheme, V: ScalarField, p: Point
) -> np.ndarray:
    """Covariant Hessian D_i D_j V with respect to the metric b."""
    n = b.dim
    if scheme.mode == "analytic" and V.hessian is not None:
        ddV = np.asarray(V.hessian(p), dtype=float)
    else:
        H = scheme.outer_steps(p, n)
        ddV = np.empty((n, n))
        for a in range(n):
            dp = np.asarray(V.gradient(p.shifted(a, +H[a])), dtype=float)
            dm = np.asarray(V.gradient(p.shifted(a, -H[a])), dtype=float)
            ddV[a] = (dp - dm) / (2.0 * H[a])
        ddV = 0.5 * (ddV + ddV.T)
    gam = christoffel(b, scheme, p)
    dV = np.asarray(V.gradient(p), dtype=float)
    hess = ddV - np.einsum("kij,k->ij", gam, dV)
    return 0.5 * (hess + hess.T)
