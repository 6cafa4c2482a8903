"""Flux densities, mass integrals and the invariant mass.

The flux convention: for a level set {r = R} the integral is
int_N U^r dv^1 ... dv^{n-1} over the coordinate measure of the boundary
chart; U is a vector density (it carries sqrt(det)) so no further area
factor appears.  Both the defining integrand and the alternative
contravariant form are linear in (V, dV); per-node linear coefficients are
shared across potentials when assembling the momentum covector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .backgrounds import Background, asymptotic_frame, nb_basis
from .errors import DivergentMassError, DomainError
from .geometry import (
    DerivativeScheme,
    MetricField,
    Point,
    ScalarField,
    christoffel_from_partials,
    covariant_hessian,
    metric_partials,
    ricci_and_scalar,
)

__all__ = [
    "FluxSample",
    "ExtrapolationResult",
    "MomentumCovector",
    "MassResult",
    "mass_integrand",
    "alt_mass_integrand",
    "flux_at_radius",
    "flux_samples",
    "mass_limit",
    "linearized_mass",
    "ansatz_flux",
    "momentum_vector",
    "invariant_mass",
    "classify_covector",
    "identity_residual",
]

DEFAULT_RADII = tuple(10.0 ** (1.0 + 0.5 * i) for i in range(5))  # 10 .. 10^3
ZERO_TOL = 1e-9


@dataclass(frozen=True)
class FluxSample:
    R: float
    value: float
    quad_err: float


@dataclass(frozen=True)
class ExtrapolationResult:
    value: float
    coefficients: tuple
    residual: float
    drift: float
    converged: bool
    diverging: bool


@dataclass(frozen=True)
class MomentumCovector:
    """Components p_mu under the Minkowski pairing eta = diag(+, -, ..., -)."""

    components: np.ndarray
    diagnostics: tuple = ()

    def __post_init__(self):
        object.__setattr__(
            self, "components", np.asarray(self.components, dtype=float)
        )

    @property
    def eta_norm2(self) -> float:
        p = self.components
        return float(p[0] ** 2 - np.sum(p[1:] ** 2))

    @property
    def classification(self) -> str:
        return classify_covector(self.components)


@dataclass(frozen=True)
class MassResult:
    m2: float
    m: Optional[float]
    classification: str
    momentum: MomentumCovector
    case: str


def _integrand_coefficients(g, bg, scheme, p, which="standard"):
    """Linear decomposition U^i = V * A^i + C^{il} d_l V at a point."""
    bmat = bg.b.at(p)
    db = metric_partials(bg.b, scheme, p)
    gam_b = christoffel_from_partials(bmat, db, p)
    if scheme.mode == "analytic" and g.has_deviation:
        # closed-form deviation: avoids the loss of significance in g - b
        # when |e| << |g| at large radius
        e = g.e_at(p)
        de = g.e_d_at(p)
        gmat = bmat + e
        dg = db + de
    else:
        gmat = g.at(p)
        dg = metric_partials(g, scheme, p)
        e = gmat - bmat
        de = dg - db
    sign, logdet = np.linalg.slogdet(gmat)
    if sign <= 0:
        from .errors import DegenerateMetricError

        raise DegenerateMetricError(p)
    ginv = np.linalg.inv(gmat)
    binv = np.linalg.inv(bmat)

    if which == "standard":
        sqg = math.exp(0.5 * logdet)
        # D-ring g = D-ring e, assembled from the partials of e directly;
        # round-tripping through dg - db would reintroduce the large-r
        # loss of significance the deviation callbacks exist to avoid
        Dg = (
            de
            - np.einsum("mjk,ml->jkl", gam_b, e)
            - np.einsum("mjl,km->jkl", gam_b, e)
        )
        S1 = np.einsum("ik,jl,jkl->i", ginv, ginv, Dg)
        S2 = np.einsum("ij,kl,jkl->i", ginv, ginv, Dg)
        A = sqg * (S1 - S2)
        tr_ge = float(np.einsum("jk,jk->", ginv, e))
        C = sqg * (tr_ge * ginv - ginv @ e @ ginv)
        return A, C
    if which == "alt":
        sqb = math.sqrt(np.linalg.det(bmat))
        # same cancellation guard: w = g^{-1} - b^{-1} = -b^{-1} e g^{-1}
        # exactly, and its partials split so only e/de enter differences
        w = -binv @ e @ ginv
        dW = (
            -np.einsum("kl,jlm,mn->jkn", ginv, de, ginv)
            - np.einsum("kl,jlm,mn->jkn", w, db, ginv)
            - np.einsum("kl,jlm,mn->jkn", binv, db, w)
        )
        DW = (
            dW
            + np.einsum("kjm,ml->jkl", gam_b, w)
            + np.einsum("ljm,km->jkl", gam_b, w)
        )
        A = sqb * (
            -np.einsum("jij->i", DW)
            + np.einsum("ij,kl,jkl->i", binv, bmat, DW)
        )
        tr_be = float(np.einsum("jk,jk->", binv, e))
        C = sqb * (tr_be * binv - binv @ e @ binv)
        return A, C
    raise DomainError(f"unknown integrand '{which}'")


def mass_integrand(g, bg, V: ScalarField, scheme, p: Point, which="standard") -> np.ndarray:
    """The coordinate vector density U^i(V) at a point."""
    A, C = _integrand_coefficients(g, bg, scheme, p, which)
    return V.value(p) * A + C @ np.asarray(V.gradient(p), dtype=float)


def alt_mass_integrand(g, bg, V: ScalarField, scheme, p: Point) -> np.ndarray:
    """The alternative contravariant-form density (same flux limit)."""
    return mass_integrand(g, bg, V, scheme, p, which="alt")


def _flux_over_nodes(g, bg, potentials, scheme, R, nodes, weights, which):
    vals = np.empty((len(potentials), len(nodes)))
    for idx, (angles, w) in enumerate(zip(nodes, weights)):
        p = Point(R, tuple(angles))
        A, C = _integrand_coefficients(g, bg, scheme, p, which)
        factor = w / bg.boundary.sqrt_det_h(angles)
        for j, V in enumerate(potentials):
            dV = np.asarray(V.gradient(p), dtype=float)
            vals[j, idx] = (V.value(p) * A[0] + C[0] @ dV) * factor
    return np.sum(vals, axis=1)


def _flux_multi(g, bg, potentials, scheme, R, which):
    bnd = bg.boundary
    full = _flux_over_nodes(g, bg, potentials, scheme, R, bnd.nodes, bnd.weights, which)
    coarse = _flux_over_nodes(
        g, bg, potentials, scheme, R, bnd.coarse_nodes, bnd.coarse_weights, which
    )
    return full, np.abs(full - coarse)


def flux_at_radius(g, bg, V, scheme, R, which="standard") -> FluxSample:
    """Flux of U(V) through {r = R}, with a node-doubling error estimate."""
    values, errs = _flux_multi(g, bg, [V], scheme, R, which)
    return FluxSample(R=float(R), value=float(values[0]), quad_err=float(errs[0]))


def flux_samples(g, bg, V, scheme, radii, which="standard") -> List[FluxSample]:
    return [flux_at_radius(g, bg, V, scheme, R, which) for R in radii]


def mass_limit(
    samples: Sequence[FluxSample],
    atol: float = 1e-6,
    rtol: float = 1e-6,
    weight_power: float = 4.0,
) -> ExtrapolationResult:
    """Extrapolate flux samples to R -> infinity.

    Fits value(R) = a0 + a1/R + a2/R^2 by least squares; samples are
    weighted by (R/R_max)^weight_power so the fit is anchored at the tail,
    where the model error of the truncated expansion is smallest.
    """
    if len(samples) < 3:
        raise DomainError("mass_limit needs at least 3 flux samples")
    samples = sorted(samples, key=lambda s: s.R)
    R = np.array([s.R for s in samples])
    v = np.array([s.value for s in samples])
    w = (R / R[-1]) ** weight_power

    def fit(Rs, vs, ws):
        X = np.stack([np.ones_like(Rs), 1.0 / Rs, 1.0 / Rs**2], axis=1)
        sw = np.sqrt(ws)
        coef, *_ = np.linalg.lstsq(X * sw[:, None], vs * sw, rcond=None)
        resid = X @ coef - vs
        return coef, math.sqrt(float(np.sum(ws * resid**2) / np.sum(ws)))

    coef, residual = fit(R, v, w)
    a0 = float(coef[0])
    if len(samples) > 3:
        coef_tail, _ = fit(R[1:], v[1:], w[1:])
        drift = abs(a0 - float(coef_tail[0]))
    else:
        drift = abs(v[-1] - a0)
    tol = atol + rtol * abs(a0)
    tail_diffs = np.abs(np.diff(v))
    diverging = bool(
        len(tail_diffs) >= 2
        and tail_diffs[-1] > tail_diffs[-2]
        and tail_diffs[-1] > tol
    )
    converged = (residual <= tol) and (drift <= tol) and not diverging
    return ExtrapolationResult(
        value=a0,
        coefficients=tuple(float(c) for c in coef),
        residual=residual,
        drift=drift,
        converged=bool(converged),
        diverging=diverging,
    )


def frame_components(g, bg, p: Point) -> np.ndarray:
    """Metric components in the asymptotic orthonormal frame of b."""
    F = asymptotic_frame(bg, p)
    return F @ g.at(p) @ F.T


def linearized_mass(g, bg, R: float, scheme: Optional[DerivativeScheme] = None) -> float:
    """Finite-R evaluation of the explicit linearized mass-integral formula.

    Uses the frame deviation e_ab = g(f_a, f_b) - delta_ab; the radial
    frame derivative is a central difference in r.
    """
    scheme = scheme or DerivativeScheme("analytic")
    n = bg.n
    k = bg.k
    bnd = bg.boundary
    h = scheme.h0 * max(1.0, R)
    total = np.empty(len(bnd.nodes))
    for idx, (angles, w) in enumerate(zip(bnd.nodes, bnd.weights)):
        ang = tuple(angles)

        def e_frame(r):
            return frame_components(g, bg, Point(r, ang)) - np.eye(n)

        e = e_frame(R)
        de = (e_frame(R + h) - e_frame(R - h)) / (2.0 * h)
        ang_sum = 0.0
        for i in range(n - 1):
            ang_sum += de[i, i] + k * e[i, i] / (R * (R**2 + k))
        integrand = -ang_sum + (n - 1) * e[n - 1, n - 1] / R
        # measure of the induced metric on {r = R}
        g_ang = g.at(Point(R, ang))[1:, 1:]
        mu = math.sqrt(np.linalg.det(g_ang)) / bnd.sqrt_det_h(angles)
        total[idx] = integrand * mu * w
    return float((R**2 + k) * np.sum(total))


def ansatz_flux(g_nn, c, dc, V: ScalarField, R: float, bg: Background, a=None) -> float:
    """Closed-form flux for metrics in diagonal-ansatz form.

    g = g_nn(r) a(r)^2 dr^2 + c(r) r^2 h with a(r) = 1/sqrt(r^2+k) by
    default; serves as the independent oracle for flux_at_radius.
    """
    n = bg.n
    k = bg.k
    if a is None:
        a = lambda r: 1.0 / math.sqrt(r**2 + k)
    gnn = g_nn(R)
    cv = c(R)
    dcv = dc(R)
    if gnn <= 0 or cv <= 0:
        raise DomainError("ansatz requires positive g_nn and c")
    common = (n - 1) * cv ** ((n - 3) / 2.0) * R ** (n - 2) / (a(R) * math.sqrt(gnn))
    vals = np.empty(len(bg.boundary.nodes))
    for idx, (angles, w) in enumerate(zip(bg.boundary.nodes, bg.boundary.weights)):
        p = Point(R, tuple(angles))
        v = V.value(p)
        dvr = float(V.gradient(p)[0])
        braces = v * (gnn - 1.0 - R * dcv) + (R * dvr - v) * (cv - 1.0)
        vals[idx] = common * braces * w
    return float(np.sum(vals))


def momentum_vector(
    g,
    bg,
    scheme,
    radii=DEFAULT_RADII,
    potentials=None,
    which="standard",
    atol: float = 1e-6,
    rtol: float = 1e-6,
    strict: bool = True,
) -> MomentumCovector:
    """Assemble p_mu = H(V_mu) over the potential basis of the background."""
    if potentials is None:
        potentials = nb_basis(bg)
    radii = sorted(float(R) for R in radii)
    values = np.empty((len(potentials), len(radii)))
    errs = np.empty_like(values)
    for col, R in enumerate(radii):
        values[:, col], errs[:, col] = _flux_multi(g, bg, potentials, scheme, R, which)
    diagnostics = []
    comps = []
    for j in range(len(potentials)):
        samples = [
            FluxSample(R, values[j, col], errs[j, col]) for col, R in enumerate(radii)
        ]
        res = mass_limit(samples, atol=atol, rtol=rtol)
        diagnostics.append(res)
        comps.append(res.value)
    if strict and not all(d.converged for d in diagnostics):
        raise DivergentMassError(diagnostics)
    return MomentumCovector(components=np.array(comps), diagnostics=tuple(diagnostics))


def classify_covector(components, zero_tol: float = ZERO_TOL) -> str:
    p = np.asarray(components, dtype=float)
    norm = float(np.linalg.norm(p))
    tol = zero_tol * (1.0 + norm)
    if np.all(np.abs(p) <= tol):
        return "zero"
    q = float(p[0] ** 2 - np.sum(p[1:] ** 2))
    qtol = zero_tol * (1.0 + norm) ** 2
    if abs(q) <= qtol:
        return "null-future" if p[0] > 0 else "null-past"
    if q > 0:
        return "timelike-future" if p[0] > 0 else "timelike-past"
    return "spacelike"


def invariant_mass(p: MomentumCovector, k: int, case: Optional[str] = None) -> MassResult:
    """Invariant mass and causal class of a momentum covector.

    Cases: A (k = -1, Ricci-negative boundary) and B (k = 0, normalized
    flat boundary) have a single component with m = p_(0); case C (k = 1,
    sphere) carries the full Lorentz-covariant covector.
    """
    if case is None:
        case = {-1: "A", 0: "B", 1: "C"}[int(k)]
    comps = p.components
    cls = classify_covector(comps)
    if case in ("A", "B"):
        if len(comps) != 1:
            raise DomainError(f"case {case} expects a single component")
        m = float(comps[0])
        return MassResult(m2=m * m, m=m, classification=cls, momentum=p, case=case)
    q = p.eta_norm2
    m2 = abs(q)
    if cls in ("timelike-future", "timelike-past"):
        m = math.copysign(math.sqrt(m2), comps[0])
    elif cls in ("null-future", "null-past", "zero"):
        m = 0.0
    else:
        m = None  # spacelike: no signed mass convention
    return MassResult(m2=m2, m=m, classification=cls, momentum=p, case=case)


# ---------------------------------------------------------------------------
# first-order expansion identity

def _rho_density(g, bg, V, scheme, p) -> float:
    """The linear-remainder term contracted against e, times sqrt(det g)."""
    gmat = g.at(p)
    bmat = bg.b.at(p)
    binv = np.linalg.inv(bmat)
    ginv = np.linalg.inv(gmat)
    e = gmat - bmat
    hess = covariant_hessian(bg.b, scheme, V, p)
    lap = float(np.einsum("ij,ij->", binv, hess))
    ric_b = bg.ricci_b(p)
    v = V.value(p)
    rho_ij = -v * ric_b + hess - lap * bmat
    rho = float(np.einsum("ij,ik,jl,kl->", rho_ij, ginv, ginv, e))
    return math.sqrt(np.linalg.det(gmat)) * rho


def identity_residual(
    g,
    bg: Background,
    V: ScalarField,
    scheme: DerivativeScheme,
    r_lo: float,
    r_hi: float,
    n_radial: int = 16,
    which: str = "standard",
) -> float:
    """Integral over an annulus of the expansion-identity defect.

    Integrates sqrt(det g) V (R_g - R_b) - d_i U^i - sqrt(det g) rho over
    [r_lo, r_hi] x N in the coordinate measure.  For g = b + eps * e_hat
    with e_hat supported in the annulus the result scales as O(eps^2),
    since the remaining term is quadratic in the deviation.
    """
    t, wt = np.polynomial.legendre.leggauss(n_radial)
    r_nodes = 0.5 * (r_hi - r_lo) * t + 0.5 * (r_hi + r_lo)
    r_weights = 0.5 * (r_hi - r_lo) * wt
    bnd = bg.boundary
    vals = []
    for r, wr in zip(r_nodes, r_weights):
        for angles, wa in zip(bnd.nodes, bnd.weights):
            p = Point(float(r), tuple(angles))
            gmat = g.at(p)
            sqg = math.sqrt(np.linalg.det(gmat))
            _, Rg = ricci_and_scalar(g, scheme, p)
            _, Rb = ricci_and_scalar(bg.b, scheme, p)
            lhs = sqg * V.value(p) * (Rg - Rb)
            divU = 0.0
            h = scheme.steps(p, bg.n)
            for a in range(bg.n):
                up = mass_integrand(g, bg, V, scheme, p.shifted(a, +h[a]), which)
                um = mass_integrand(g, bg, V, scheme, p.shifted(a, -h[a]), which)
                divU += (up[a] - um[a]) / (2.0 * h[a])
            rho = _rho_density(g, bg, V, scheme, p)
            coord_w = wr * wa / bnd.sqrt_det_h(angles)
            # pointwise absolute value: the signed defect can cancel over
            # the annulus and mask the quadratic scaling
            vals.append(abs(lhs - divU - rho) * coord_w)
    return float(np.sum(np.array(vals)))
