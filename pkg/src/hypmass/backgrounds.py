"""Reference backgrounds, static potentials and built-in metric families.

The reference metric on the end chart is the block form

    b = dr^2 / (r^2 + k) + r^2 h ,

with (N, h) a compact boundary manifold whose scalar curvature is
normalised to (n-1)(n-2) k.  All built-in boundaries are space forms, so
b is Einstein with Ric(b) = -(n-1) b; that identity is used wherever an
analytic Ricci tensor of the background is needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np

from .boundary import (
    BoundaryManifold,
    circle_boundary,
    flat_torus_boundary,
    hyperbolic_patch_boundary,
    sphere_boundary,
)
from .errors import BoundaryMismatchError, DomainError, UnknownBasisError
from .geometry import (
    DerivativeScheme,
    MetricField,
    Point,
    ScalarField,
    covariant_hessian,
    ricci_and_scalar,
)

__all__ = [
    "StaticPotential",
    "Background",
    "build_background",
    "default_boundary",
    "asymptotic_frame",
    "nb_basis",
    "verify_static",
    "builtin_metric",
    "radial_diagonal_metric",
    "tensor_perturbation_metric",
    "bump_perturbation_metric",
]


@dataclass(frozen=True)
class StaticPotential(ScalarField):
    """Element of the static-potential space of a background, with label mu."""

    label: int = 0


class Background:
    """Reference geometry: k, dimension n, boundary manifold and metric b."""

    def __init__(self, k: int, n: int, boundary: BoundaryManifold, b: MetricField):
        self.k = int(k)
        self.n = int(n)
        self.boundary = boundary
        self.b = b

    def ricci_b(self, p: Point) -> np.ndarray:
        """Analytic Ricci tensor of b (Einstein: Ric = -(n-1) b)."""
        return -(self.n - 1) * self.b.at(p)

    def __repr__(self):
        return f"Background(k={self.k}, n={self.n}, boundary={self.boundary.name})"


def default_boundary(k: int, n: int, **kwargs) -> BoundaryManifold:
    """The built-in boundary manifold matching (k, n)."""
    if n == 2:
        return circle_boundary(kwargs.get("num_nodes", 128))
    if k == 1:
        return sphere_boundary(n - 1, kwargs.get("sizes"))
    if k == 0:
        return flat_torus_boundary(n - 1, kwargs.get("counts"))
    return hyperbolic_patch_boundary(n - 1, kwargs.get("counts"))


def _check_boundary_curvature(boundary: BoundaryManifold, k: int, n: int):
    expected = (n - 1) * (n - 2) * k if n > 2 else 0.0
    if abs(boundary.scalar_curvature - expected) > 1e-8:
        raise BoundaryMismatchError(
            f"boundary/k mismatch: R_h = {boundary.scalar_curvature}, "
            f"need (n-1)(n-2)k = {expected}"
        )
    if boundary.dim >= 2:
        scheme = DerivativeScheme("analytic", h0=3e-5)
        hfield = boundary.metric_field()
        # sample where the chart is best conditioned (away from poles)
        order = sorted(
            range(len(boundary.nodes)),
            key=lambda i: -boundary.sqrt_det_h(boundary.nodes[i]),
        )
        for angles in (boundary.nodes[i] for i in order[:5]):
            p = Point(1.0, tuple(angles))
            _, R = ricci_and_scalar(hfield, scheme, p)
            if abs(R - expected) > 1e-8 * max(1.0, abs(expected)):
                raise BoundaryMismatchError(
                    f"boundary scalar curvature {R} at {angles} != {expected}"
                )


def build_background(k: int, n: int, boundary: Optional[BoundaryManifold] = None) -> Background:
    """Construct the reference background b = dr^2/(r^2+k) + r^2 h."""
    if k not in (-1, 0, 1):
        raise DomainError(f"k must be in {{-1, 0, +1}}, got {k}")
    if n < 2:
        raise DomainError("dimension n must be >= 2")
    if n == 2 and k != 1:
        raise DomainError("n = 2 requires the normalisation k = 1")
    if boundary is None:
        boundary = default_boundary(k, n)
    if boundary.dim != n - 1:
        raise DomainError(f"boundary has dim {boundary.dim}, expected {n - 1}")
    _check_boundary_curvature(boundary, k, n)

    def ev(p: Point) -> np.ndarray:
        g = np.zeros((n, n))
        g[0, 0] = 1.0 / (p.r**2 + k)
        g[1:, 1:] = p.r**2 * boundary.h_at(p.angles)
        return g

    def dev(p: Point) -> np.ndarray:
        d = np.zeros((n, n, n))
        h = boundary.h_at(p.angles)
        dh = boundary.dh_at(p.angles)
        d[0, 0, 0] = -2.0 * p.r / (p.r**2 + k) ** 2
        d[0, 1:, 1:] = 2.0 * p.r * h
        d[1:, 1:, 1:] = p.r**2 * dh
        return d

    b = MetricField(
        n, ev, dev, name="background", params={"k": k, "n": n},
        e_eval=lambda p: np.zeros((n, n)),
        e_d_eval=lambda p: np.zeros((n, n, n)),
    )
    return Background(k, n, boundary, b)


def asymptotic_frame(bg: Background, p: Point) -> np.ndarray:
    """b-orthonormal frame; rows 0..n-2 angular (eps_A / r), row n-1 radial.

    The angular frame eps_A comes from Gram-Schmidt (Cholesky) of the
    coordinate basis with respect to h at the node.
    """
    n = bg.n
    frame = np.zeros((n, n))
    h = bg.boundary.h_at(p.angles)
    L = np.linalg.cholesky(h)
    eps = np.linalg.inv(L).T  # columns are h-orthonormal vectors
    frame[: n - 1, 1:] = eps.T / p.r
    frame[n - 1, 0] = math.sqrt(p.r**2 + bg.k)
    return frame


def _v0_potential(k: int) -> StaticPotential:
    def value(p: Point):
        return math.sqrt(p.r**2 + k)

    def gradient(p: Point):
        g = np.zeros(len(p.angles) + 1)
        g[0] = p.r / math.sqrt(p.r**2 + k)
        return g

    def hessian(p: Point):
        n = len(p.angles) + 1
        H = np.zeros((n, n))
        H[0, 0] = k / (p.r**2 + k) ** 1.5
        return H

    return StaticPotential(value=value, gradient=gradient, hessian=hessian, label=0)


def _vi_potential(boundary: BoundaryManifold, i: int) -> StaticPotential:
    # V_(i) = r * n^i, the restriction of the Cartesian coordinate x^i
    def value(p: Point):
        n, _, _ = boundary.embedding(p.angles)
        return p.r * n[i]

    def gradient(p: Point):
        n, dn, _ = boundary.embedding(p.angles)
        g = np.empty(len(p.angles) + 1)
        g[0] = n[i]
        g[1:] = p.r * dn[:, i]
        return g

    def hessian(p: Point):
        m = len(p.angles)
        _, dn, d2n = boundary.embedding(p.angles)
        H = np.zeros((m + 1, m + 1))
        H[0, 1:] = dn[:, i]
        H[1:, 0] = dn[:, i]
        H[1:, 1:] = p.r * d2n[:, :, i]
        return H

    return StaticPotential(value=value, gradient=gradient, hessian=hessian, label=i + 1)


def nb_basis(bg: Background) -> List[StaticPotential]:
    """Basis of the static-potential space of the background.

    k <= 0: the single potential sqrt(r^2 + k).  k = 1 with a round-sphere
    boundary: V_(0) = sqrt(r^2 + 1) plus the n Cartesian restrictions.
    """
    if bg.k in (0, -1):
        return [_v0_potential(bg.k)]
    if bg.boundary.embedding is None:
        raise UnknownBasisError(
            "basis unknown for this k = 1 boundary; supply potentials explicitly"
        )
    pots = [_v0_potential(bg.k)]
    pots += [_vi_potential(bg.boundary, i) for i in range(bg.n)]
    return pots


def verify_static(
    b: MetricField,
    V: ScalarField,
    lam: float,
    points,
    bg: Optional[Background] = None,
    scheme: Optional[DerivativeScheme] = None,
    tol: float = 1e-8,
) -> dict:
    """Residuals of the static system at the given points.

    Per point: r1 = |Delta_b V + lam V| and r2 = ||Hess V - V (Ric - lam b)||_F.
    When a Background is supplied its analytic (Einstein) Ricci tensor is
    used; otherwise Ric(b) is computed numerically.
    """
    if lam >= 0:
        raise DomainError("static system requires lam < 0")
    scheme = scheme or DerivativeScheme("analytic")
    rows = []
    for p in points:
        gmat = b.at(p)
        ginv = np.linalg.inv(gmat)
        hess = covariant_hessian(b, scheme, V, p)
        ric = bg.ricci_b(p) if bg is not None else ricci_and_scalar(b, scheme, p)[0]
        v = V.value(p)
        lap = float(np.einsum("ij,ij->", ginv, hess))
        r1 = abs(lap + lam * v)
        r2 = float(np.linalg.norm(hess - v * (ric - lam * gmat)))
        rows.append({"point": (p.r,) + p.angles, "laplace": r1, "hessian": r2})
    max_res = max((max(row["laplace"], row["hessian"]) for row in rows), default=0.0)
    return {"residuals": rows, "max_residual": max_res, "tol": tol, "passed": max_res <= tol}


def radial_diagonal_metric(
    bg: Background,
    F: Callable[[float], float],
    dF: Callable[[float], float],
    C: Callable[[float], float] = lambda r: 1.0,
    dC: Callable[[float], float] = lambda r: 0.0,
    name: str = "radial-diagonal",
    params=None,
    domain_check: Optional[Callable[[float], None]] = None,
    eF: Optional[Callable[[float], float]] = None,
    deF: Optional[Callable[[float], float]] = None,
    eC: Optional[Callable[[float], float]] = None,
    deC: Optional[Callable[[float], float]] = None,
) -> MetricField:
    """Diagonal family g = F(r) dr^2 + C(r) r^2 h with analytic derivatives.

    eF = F - 1/(r^2+k) and eC = C - 1 (with derivatives), when supplied in
    closed form, give the flux pipeline a cancellation-free deviation.
    """
    n = bg.n
    boundary = bg.boundary

    def ev(p: Point):
        if domain_check is not None:
            domain_check(p.r)
        g = np.zeros((n, n))
        g[0, 0] = F(p.r)
        g[1:, 1:] = C(p.r) * p.r**2 * boundary.h_at(p.angles)
        return g

    def dev(p: Point):
        if domain_check is not None:
            domain_check(p.r)
        d = np.zeros((n, n, n))
        h = boundary.h_at(p.angles)
        dh = boundary.dh_at(p.angles)
        d[0, 0, 0] = dF(p.r)
        d[0, 1:, 1:] = (dC(p.r) * p.r**2 + 2.0 * p.r * C(p.r)) * h
        d[1:, 1:, 1:] = C(p.r) * p.r**2 * dh
        return d

    e_eval = e_d_eval = None
    if eF is not None and deF is not None:
        _eC = eC or (lambda r: 0.0)
        _deC = deC or (lambda r: 0.0)

        def e_eval(p: Point):
            if domain_check is not None:
                domain_check(p.r)
            e = np.zeros((n, n))
            e[0, 0] = eF(p.r)
            e[1:, 1:] = _eC(p.r) * p.r**2 * boundary.h_at(p.angles)
            return e

        def e_d_eval(p: Point):
            if domain_check is not None:
                domain_check(p.r)
            d = np.zeros((n, n, n))
            h = boundary.h_at(p.angles)
            dh = boundary.dh_at(p.angles)
            d[0, 0, 0] = deF(p.r)
            d[0, 1:, 1:] = (_deC(p.r) * p.r**2 + 2.0 * p.r * _eC(p.r)) * h
            d[1:, 1:, 1:] = _eC(p.r) * p.r**2 * dh
            return d

    return MetricField(n, ev, dev, name=name, params=params,
                       e_eval=e_eval, e_d_eval=e_d_eval)


def _sads_horizon(n: int, m_param: float, k: int) -> float:
    """Largest root of r^2 + k - 2 m r^(2-n), or 0 if none on r > 0."""
    if m_param <= 0 and k >= 0:
        return 0.0

    def f(r):
        return r**2 + k - 2.0 * m_param * r ** (2 - n)

    hi = 2.0 + 2.0 * abs(m_param) + 2.0 * abs(k)
    while f(hi) <= 0:
        hi *= 2.0
    lo = hi
    while lo > 1e-12 and f(lo * 0.5) > 0:
        lo *= 0.5
    if lo <= 1e-12:
        return 0.0
    from scipy.optimize import brentq

    return float(brentq(f, lo * 0.5, hi, xtol=1e-14, rtol=1e-15))


def builtin_metric(family: str, bg: Background, **params) -> MetricField:
    """Built-in metric families on a background chart.

    families: hyperbolic; kottler2d(eta); schwarzschild_ads(m_param);
    diagonal_ansatz(g_nn, c, dg_nn, dc).
    """
    if family == "hyperbolic":
        return bg.b
    if family == "kottler2d":
        if bg.n != 2 or bg.k != 1:
            raise DomainError("kottler2d needs the n = 2, k = 1 background")
        eta = float(params["eta"])
        r_min = math.sqrt(max(eta, 0.0))

        def check(r):
            if r <= r_min:
                raise DomainError(
                    f"domain excludes metric singularity: need r > {r_min}"
                )

        # F - b_rr = (1+eta) / ((r^2-eta)(r^2+1)) in closed form
        def _eF(r):
            return (1.0 + eta) / ((r**2 - eta) * (r**2 + 1.0))

        def _deF(r):
            D = (r**2 - eta) * (r**2 + 1.0)
            return -(1.0 + eta) * 2.0 * r * (2.0 * r**2 + 1.0 - eta) / D**2

        return radial_diagonal_metric(
            bg,
            F=lambda r: 1.0 / (r**2 - eta),
            dF=lambda r: -2.0 * r / (r**2 - eta) ** 2,
            name="kottler2d",
            params={"eta": eta, "r_min": r_min},
            domain_check=check,
            eF=_eF,
            deF=_deF,
        )
    if family == "schwarzschild_ads":
        m_param = float(params["m_param"])
        n, k = bg.n, bg.k
        r_h = _sads_horizon(n, m_param, k)

        def f(r):
            return r**2 + k - 2.0 * m_param * r ** (2 - n)

        def df(r):
            return 2.0 * r - 2.0 * (2 - n) * m_param * r ** (1 - n)

        def check(r):
            if r <= r_h or f(r) <= 0:
                raise DomainError(
                    f"domain excludes metric singularity: need r > {r_h}"
                )

        def s(r):
            return 2.0 * m_param * r ** (2 - n)

        def ds(r):
            return 2.0 * m_param * (2 - n) * r ** (1 - n)

        # F - b_rr = s / ((r^2+k-s)(r^2+k)) in closed form
        def _eF(r):
            return s(r) / (f(r) * (r**2 + k))

        def _deF(r):
            w = r**2 + k
            return (ds(r) * f(r) * w - s(r) * (df(r) * w + f(r) * 2.0 * r)) / (
                f(r) * w
            ) ** 2

        return radial_diagonal_metric(
            bg,
            F=lambda r: 1.0 / f(r),
            dF=lambda r: -df(r) / f(r) ** 2,
            name="schwarzschild_ads",
            params={"m_param": m_param, "k": k, "n": n, "r_min": r_h},
            domain_check=check,
            eF=_eF,
            deF=_deF,
        )
    if family == "diagonal_ansatz":
        g_nn, dg_nn = params["g_nn"], params["dg_nn"]
        c, dc = params["c"], params["dc"]
        k = bg.k

        def F(r):
            gnn = g_nn(r)
            if gnn <= 0:
                raise DomainError("g_nn must be positive")
            return gnn / (r**2 + k)

        def dF(r):
            return dg_nn(r) / (r**2 + k) - 2.0 * r * g_nn(r) / (r**2 + k) ** 2

        def Cw(r):
            cv = c(r)
            if cv <= 0:
                raise DomainError("c must be positive")
            return cv

        return radial_diagonal_metric(
            bg, F=F, dF=dF, C=Cw, dC=dc, name="diagonal_ansatz"
        )
    raise DomainError(f"unknown metric family '{family}'")


def tensor_perturbation_metric(
    bg: Background, S: np.ndarray, eps: float, power: float, name: str = "tensor-perturbation"
) -> MetricField:
    """Sphere background plus an angularly dependent decaying perturbation.

    With n(v) the unit-sphere embedding and q = n^T S n:

        g_rr = b_rr (1 + eps q / r^power),
        g_AB = b_AB + eps r^(2-power) (d_A n)^T S (d_B n).

    Rotating the chart by Q in O(n) is equivalent to replacing S by
    Q^T S Q, which makes this family a clean covariance fixture.
    """
    if bg.boundary.embedding is None:
        raise DomainError("tensor perturbation needs a sphere boundary")
    S = np.asarray(S, dtype=float)
    S = 0.5 * (S + S.T)
    n = bg.n
    k = bg.k

    def pieces(p: Point):
        nv, dn, _ = bg.boundary.embedding(p.angles)
        q = float(nv @ S @ nv)
        P = dn @ S @ dn.T
        dq = 2.0 * dn @ S @ nv
        return nv, dn, q, P, dq

    def e_ev(p: Point):
        _, _, q, P, _ = pieces(p)
        e = np.zeros((n, n))
        e[0, 0] = eps * q / (p.r**power * (p.r**2 + k))
        e[1:, 1:] = eps * p.r ** (2.0 - power) * P
        return e

    def e_dev(p: Point):
        nv, dn, q, P, dq = pieces(p)
        _, _, d2n = bg.boundary.embedding(p.angles)
        brr = 1.0 / (p.r**2 + k)
        dbrr = -2.0 * p.r / (p.r**2 + k) ** 2
        d = np.zeros((n, n, n))
        d[0, 0, 0] = eps * q * (dbrr / p.r**power - power * brr / p.r ** (power + 1.0))
        d[0, 1:, 1:] = (2.0 - power) * eps * p.r ** (1.0 - power) * P
        for a in range(1, n):
            d[a, 0, 0] = brr * eps * dq[a - 1] / p.r**power
            dP = d2n[a - 1] @ S @ dn.T
            d[a, 1:, 1:] = eps * p.r ** (2.0 - power) * (dP + dP.T)
        return d

    def ev(p: Point):
        return bg.b.at(p) + e_ev(p)

    def dev(p: Point):
        return bg.b.d_at(p) + e_dev(p)

    return MetricField(
        n, ev, dev, name=name, params={"eps": eps, "power": power},
        e_eval=e_ev, e_d_eval=e_dev,
    )


def bump_perturbation_metric(
    bg: Background,
    seed: int,
    eps: float,
    r_lo: float = 2.0,
    r_hi: float = 4.0,
) -> MetricField:
    """b plus a seeded random symmetric field supported on an annulus.

    e_ij = eps * chi(r) * (M1 + sin(sum v) M2)_ij * sqrt(b_ii b_jj) with a
    C^3 bump chi; the sqrt(b_ii b_jj) scaling keeps the relative size of
    the perturbation uniform so g stays nondegenerate for moderate eps.
    """
    n = bg.n
    rng = np.random.default_rng(seed)
    M1 = rng.normal(size=(n, n))
    M1 = 0.5 * (M1 + M1.T)
    M2 = rng.normal(size=(n, n))
    M2 = 0.5 * (M2 + M2.T)

    def chi(r):
        if not (r_lo < r < r_hi):
            return 0.0, 0.0
        t = (2.0 * r - (r_lo + r_hi)) / (r_hi - r_lo)
        return (1 - t * t) ** 4, 4 * (1 - t * t) ** 3 * (-2 * t) * 2.0 / (r_hi - r_lo)

    def q(ang):
        return math.sin(sum(ang)), math.cos(sum(ang))

    def parts(p):
        b = bg.b.at(p)
        db = bg.b.d_at(p)
        w = np.sqrt(np.diag(b))
        dw = np.stack([np.diagonal(db[a]) / (2.0 * w) for a in range(n)])
        return b, db, w, dw

    def e_ev(p: Point):
        c, _ = chi(p.r)
        s, _ = q(p.angles)
        _, _, w, _ = parts(p)
        return eps * c * (M1 + s * M2) * np.outer(w, w)

    def e_dev(p: Point):
        c, dc = chi(p.r)
        s, ds = q(p.angles)
        _, db, w, dw = parts(p)
        M = M1 + s * M2
        W = np.outer(w, w)
        d = np.zeros((n, n, n))
        d[0] = eps * dc * M * W
        for a in range(n):
            dW = np.outer(dw[a], w) + np.outer(w, dw[a])
            d[a] += eps * c * M * dW
            if a >= 1:
                d[a] += eps * c * ds * M2 * W
        return d

    def ev(p: Point):
        return bg.b.at(p) + e_ev(p)

    def dev(p: Point):
        return bg.b.d_at(p) + e_dev(p)

    return MetricField(n, ev, dev, name="annulus-bump",
                       params={"seed": seed, "eps": eps},
                       e_eval=e_ev, e_d_eval=e_dev)
