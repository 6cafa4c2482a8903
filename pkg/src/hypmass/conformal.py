"""Conformally compactified presentation of the end and its mass.

The defining coordinate x relates to the radial chart by
x = 2 / (r + sqrt(r^2 + k)), r = (1 - k x^2/4) / x.  Conformal data is the
family h_x of boundary metrics in the geodesic gauge |d Omega| = 1; the
mass is computed by rebuilding the r-chart metric

    g = x^{-2} (dx^2 + h_x),  g_rr = 1/(r^2 + k),  g_AB = x^{-2} (h_x)_AB

and delegating to the flux pipeline.
"""

from __future__ import annotations

import math
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .backgrounds import Background, build_background, nb_basis
from .boundary import BoundaryManifold
from .errors import DomainError
from .geometry import DerivativeScheme, MetricField, Point, ricci_and_scalar
from .mass import DEFAULT_RADII, MassResult, invariant_mass, momentum_vector
from .gauge import _exponent_verdict, loglog_slope

__all__ = [
    "compactify",
    "decompactify",
    "conformal_background",
    "pull_to_r_chart",
    "ConformalData",
    "conformal_data_from_metric",
    "boundary_conditions_check",
    "mass_from_conformal",
]


def compactify(r: float, k: int) -> float:
    """x = 2 / (r + sqrt(r^2 + k))."""
    if r <= 0.0 or r < math.sqrt(max(-k, 0.0)):
        raise DomainError(f"r = {r} outside the chart for k = {k}")
    return 2.0 / (r + math.sqrt(r**2 + k))


def decompactify(x: float, k: int) -> float:
    """r = (1 - k x^2 / 4) / x, the exact inverse of compactify."""
    if x <= 0.0 or (k == 1 and x >= 2.0) or (k == -1 and x > 2.0):
        raise DomainError(f"x = {x} outside (0, x_max) for k = {k}")
    return (1.0 - k * x**2 / 4.0) / x


def conformal_background(n: int, k: int, boundary: BoundaryManifold) -> MetricField:
    """The background in x-coordinates: x^{-2}(dx^2 + (1 - k x^2/4)^2 h0)."""

    def ev(p: Point):
        x = p.r
        g = np.zeros((n, n))
        g[0, 0] = 1.0 / x**2
        g[1:, 1:] = ((1.0 - k * x**2 / 4.0) / x) ** 2 * boundary.h_at(p.angles)
        return g

    def dev(p: Point):
        x = p.r
        h = boundary.h_at(p.angles)
        dh = boundary.dh_at(p.angles)
        w = (1.0 - k * x**2 / 4.0) / x  # this is r(x)
        dw = -1.0 / x**2 - k / 4.0
        d = np.zeros((n, n, n))
        d[0, 0, 0] = -2.0 / x**3
        d[0, 1:, 1:] = 2.0 * w * dw * h
        d[1:, 1:, 1:] = w**2 * dh
        return d

    return MetricField(n, ev, dev, name="conformal-background", params={"k": k})


def pull_to_r_chart(metric_x: MetricField, k: int) -> MetricField:
    """Pull an x-chart metric back to the radial chart via x = compactify(r)."""
    from .gauge import radial_reparametrize

    def xr(r):
        return compactify(r, k)

    def dxr(r):
        return -xr(r) / math.sqrt(r**2 + k)

    def d2xr(r):
        return 2.0 / (r**2 + k) ** 1.5

    return radial_reparametrize(
        metric_x, xr, dxr, d2xr,
        name=f"r-chart[{metric_x.name}]",
        r_min=math.sqrt(max(-k, 0.0)),
    )


class ConformalData:
    """Family h_x of boundary metrics with x- and angular-derivative callbacks.

    hx_eval(x, angles) -> (n-1, n-1); hx_dx likewise; hx_dang returns the
    array d[a, A, B] of angular partials.  h0_eval defaults to the boundary
    metric (the normalized x -> 0 limit).
    """

    def __init__(
        self,
        n: int,
        k: int,
        boundary: BoundaryManifold,
        hx_eval: Callable,
        hx_dx: Callable,
        hx_dang: Callable,
        x_max: float,
        h0_eval: Optional[Callable] = None,
        ex_eval: Optional[Callable] = None,
        ex_dx: Optional[Callable] = None,
        ex_dang: Optional[Callable] = None,
    ):
        self.n = int(n)
        self.k = int(k)
        self.boundary = boundary
        self.hx_eval = hx_eval
        self.hx_dx = hx_dx
        self.hx_dang = hx_dang
        self.x_max = float(x_max)
        self.h0_eval = h0_eval or (lambda angles: boundary.h_at(angles))
        # optional closed-form family ex = h_x - (1 - k x^2/4)^2 h0; when
        # present the reconstructed metric exposes its deviation from the
        # background without large-radius cancellation
        self.ex_eval = ex_eval
        self.ex_dx = ex_dx
        self.ex_dang = ex_dang

    @property
    def has_deviation(self) -> bool:
        return (
            self.ex_eval is not None
            and self.ex_dx is not None
            and self.ex_dang is not None
        )

    def rescaled(self, c: float) -> "ConformalData":
        """Replace the defining function Omega by Omega * c (x -> c x)."""
        if c <= 0:
            raise DomainError("scale must be positive")
        return ConformalData(
            self.n,
            self.k,
            self.boundary,
            hx_eval=lambda x, a: c**2 * np.asarray(self.hx_eval(x / c, a)),
            hx_dx=lambda x, a: c * np.asarray(self.hx_dx(x / c, a)),
            hx_dang=lambda x, a: c**2 * np.asarray(self.hx_dang(x / c, a)),
            x_max=c * self.x_max,
            h0_eval=lambda a: c**2 * np.asarray(self.h0_eval(a)),
        )

    def measured_scale(self) -> float:
        """Scale factor of h0 against the normalized boundary metric,
        recovered from the boundary volume."""
        m = self.boundary.dim
        vol = 0.0
        for angles, w in zip(self.boundary.nodes, self.boundary.weights):
            h0 = np.asarray(self.h0_eval(tuple(angles)), dtype=float)
            vol += w * math.sqrt(np.linalg.det(h0)) / self.boundary.sqrt_det_h(angles)
        return (vol / self.boundary.volume) ** (1.0 / m)

    def renormalized(self) -> "ConformalData":
        """Undo a constant conformal rescaling, restoring the curvature gauge."""
        return self.rescaled(1.0 / self.measured_scale())


def metric_from_conformal(data: ConformalData) -> MetricField:
    """The r-chart metric g = x^{-2}(dx^2 + h_x) with x = compactify(r)."""
    n, k = data.n, data.k

    def ev(p: Point):
        x = compactify(p.r, k)
        if x > data.x_max * (1.0 + 1e-12):
            raise DomainError(f"r = {p.r} below the conformal chart (x > x_max)")
        g = np.zeros((n, n))
        g[0, 0] = 1.0 / (p.r**2 + k)
        g[1:, 1:] = np.asarray(data.hx_eval(x, p.angles), dtype=float) / x**2
        return g

    def dev(p: Point):
        x = compactify(p.r, k)
        dxdr = -x / math.sqrt(p.r**2 + k)
        hx = np.asarray(data.hx_eval(x, p.angles), dtype=float)
        dhx = np.asarray(data.hx_dx(x, p.angles), dtype=float)
        dang = np.asarray(data.hx_dang(x, p.angles), dtype=float)
        d = np.zeros((n, n, n))
        d[0, 0, 0] = -2.0 * p.r / (p.r**2 + k) ** 2
        d[0, 1:, 1:] = dxdr * (dhx / x**2 - 2.0 * hx / x**3)
        d[1:, 1:, 1:] = dang / x**2
        return d

    e_eval = e_d_eval = None
    if data.has_deviation:
        # g_rr equals the background radial component exactly in this
        # chart, so the deviation sits entirely in the angular block
        def e_eval(p: Point):
            x = compactify(p.r, k)
            e = np.zeros((n, n))
            e[1:, 1:] = np.asarray(data.ex_eval(x, p.angles), dtype=float) / x**2
            return e

        def e_d_eval(p: Point):
            x = compactify(p.r, k)
            dxdr = -x / math.sqrt(p.r**2 + k)
            ex = np.asarray(data.ex_eval(x, p.angles), dtype=float)
            dex = np.asarray(data.ex_dx(x, p.angles), dtype=float)
            dang = np.asarray(data.ex_dang(x, p.angles), dtype=float)
            d = np.zeros((n, n, n))
            d[0, 1:, 1:] = dxdr * (dex / x**2 - 2.0 * ex / x**3)
            d[1:, 1:, 1:] = dang / x**2
            return d

    return MetricField(n, ev, dev, name="conformal-data", params={"k": k},
                       e_eval=e_eval, e_d_eval=e_d_eval)


def conformal_data_from_metric(g: MetricField, bg: Background) -> ConformalData:
    """Geodesic-gauge conformal data of a radial metric family.

    Solves d log x / dr = -sqrt(g_rr) with x ~ 2/(r + sqrt(r^2+k)) at
    infinity; h_x = x^2 g_AB along the inverted coordinate.  Requires
    g_rA = 0 and g_rr independent of the angles (all built-in families).
    """
    k, n = bg.k, bg.n
    ref_angles = tuple(bg.boundary.nodes[0])
    has_dev = g.has_deviation

    def sqrt_grr(r):
        gm = g.at(Point(r, ref_angles))
        if np.max(np.abs(gm[0, 1:])) > 1e-12:
            raise DomainError("conformal conversion needs g_rA = 0")
        return math.sqrt(gm[0, 0])

    def defect(s):
        # sqrt(g_rr) - sqrt(b_rr); rationalized through the deviation
        # callback so the integrand keeps full relative precision
        w = s**2 + k
        if has_dev:
            q = w * float(g.e_at(Point(s, ref_angles))[0, 0])
            return q / (math.sqrt(w) * (1.0 + math.sqrt(1.0 + q)))
        return sqrt_grr(s) - 1.0 / math.sqrt(w)

    @lru_cache(maxsize=8192)
    def tail(r: float) -> float:
        # substitute u = 1/s: finite interval, pure relative tolerance, so
        # tiny tails keep full relative precision
        val, _ = quad(
            lambda u: defect(1.0 / u) / u**2 if u > 0 else 0.0,
            0.0,
            1.0 / r,
            epsabs=0.0,
            epsrel=1e-12,
            limit=200,
        )
        return val

    @lru_cache(maxsize=8192)
    def x_of_r(r: float) -> float:
        return compactify(r, k) * math.exp(-tail(r))

    r_floor = float(g.params.get("r_min", math.sqrt(max(-k, 0.0)))) + 1e-9

    @lru_cache(maxsize=4096)
    def r_of_x(x: float) -> float:
        r0 = max(decompactify(x, k), r_floor * 1.5)
        lo, hi = r0, r0
        while x_of_r(lo) < x:
            nxt = lo * 0.5
            if nxt <= r_floor:
                lo = r_floor + (lo - r_floor) * 0.5
            else:
                lo = nxt
        while x_of_r(hi) > x:
            hi *= 2.0
        if lo == hi:
            return lo
        return float(brentq(lambda r: x_of_r(r) - x, lo, hi, xtol=1e-14, rtol=8.9e-16))

    def hx_eval(x, angles):
        r = r_of_x(float(x))
        return x**2 * g.at(Point(r, tuple(angles)))[1:, 1:]

    def hx_dx(x, angles):
        r = r_of_x(float(x))
        p = Point(r, tuple(angles))
        gab = g.at(p)[1:, 1:]
        dgab = g.d_at(p)[0, 1:, 1:]
        drdx = -1.0 / (x * sqrt_grr(r))
        return 2.0 * x * gab + x**2 * dgab * drdx

    def hx_dang(x, angles):
        r = r_of_x(float(x))
        return x**2 * g.d_at(Point(r, tuple(angles)))[1:, 1:, 1:]

    ex_eval = ex_dx = ex_dang = None
    if has_dev:
        # ex = h_x - (1 - k x^2/4)^2 h0 = x^2 [ e_AB + (r^2 - r_x^2) h0 ]
        # with r = r(x) the source radius and r_x = decompactify(x); the
        # difference r - r_x is evaluated through expm1 of the tail
        # integral so no large-radius cancellation occurs
        def _geom(x):
            r = r_of_x(float(x))
            t = tail(r)
            x0 = compactify(r, k)
            r_x = decompactify(float(x), k)
            dr = -math.expm1(t) / x0 + k * x0 * math.expm1(-t) / 4.0
            return r, t, x0, r_x, dr

        def ex_eval(x, angles):
            r, _, _, r_x, dr = _geom(x)
            h0 = bg.boundary.h_at(angles)
            eAB = g.e_at(Point(r, tuple(angles)))[1:, 1:]
            return x**2 * (eAB + dr * (r + r_x) * h0)

        def ex_dx(x, angles):
            r, t, x0, r_x, dr = _geom(x)
            p = Point(r, tuple(angles))
            h0 = bg.boundary.h_at(angles)
            eAB = g.e_at(p)[1:, 1:]
            deAB = g.e_d_at(p)[0, 1:, 1:]
            w = r**2 + k
            sqw = math.sqrt(w)
            q = w * float(g.e_at(p)[0, 0])
            sq1q = math.sqrt(1.0 + q)
            drdx = -sqw / (x * sq1q)
            # r'(x) - r_x'(x) without cancellation
            delta_u = -q / (sq1q * (1.0 + sq1q))
            diff = (
                math.expm1(2.0 * t) / x0**2
                - sqw * math.expm1(t) / x0
                - (sqw / x) * delta_u
            )
            ddr2 = 2.0 * (dr * drdx + r_x * diff)  # d(r^2 - r_x^2)/dx
            psi = eAB + dr * (r + r_x) * h0
            dpsi = deAB * drdx + ddr2 * h0
            return 2.0 * x * psi + x**2 * dpsi

        def ex_dang(x, angles):
            r, _, _, r_x, dr = _geom(x)
            p = Point(r, tuple(angles))
            dh0 = bg.boundary.dh_at(angles)
            de_ang = g.e_d_at(p)[1:, 1:, 1:]
            return x**2 * (de_ang + dr * (r + r_x) * dh0)

    x_max = x_of_r(max(2.0 * r_floor, 1.0 + r_floor))
    return ConformalData(
        n, k, bg.boundary, hx_eval, hx_dx, hx_dang, x_max=x_max,
        ex_eval=ex_eval, ex_dx=ex_dx, ex_dang=ex_dang,
    )


def boundary_conditions_check(
    data: ConformalData,
    n_samples: int = 6,
    x_start: Optional[float] = None,
    sample_nodes: int = 4,
) -> dict:
    """Fitted leading exponents for the two boundary conditions at x -> 0.

    Condition one: h_x approaches (1 - k x^2/4)^2 h0 faster than
    x^floor(n/2) (strict).  Condition two: the scalar-curvature defect
    R_g + n(n-1) is O(x^(n-1)).
    """
    n, k = data.n, data.k
    x0 = x_start or min(0.25, 0.5 * data.x_max)
    xs = np.array([x0 * 2.0**-j for j in range(n_samples)])
    angles_list = [tuple(a) for a in data.boundary.nodes[:: max(1, len(data.boundary.nodes) // sample_nodes)][:sample_nodes]]

    diffs = []
    for x in xs:
        worst = 0.0
        for ang in angles_list:
            if data.has_deviation:
                dev = np.asarray(data.ex_eval(x, ang), dtype=float)
            else:
                hx = np.asarray(data.hx_eval(x, ang), dtype=float)
                h0 = np.asarray(data.h0_eval(ang), dtype=float)
                dev = hx - (1.0 - k * x**2 / 4.0) ** 2 * h0
            worst = max(worst, float(np.linalg.norm(dev)))
        diffs.append(worst)
    critical_c1 = float(math.floor(n / 2))
    if max(diffs) < 1e-12:
        c1 = {"verdict": "pass", "exponent": math.inf, "values": diffs}
    else:
        slope, se = loglog_slope(xs, diffs)
        c1 = {
            "verdict": _exponent_verdict(slope, se, critical_c1),
            "exponent": slope,
            "stderr": se,
            "critical": critical_c1,
            "values": diffs,
        }

    gfield = metric_from_conformal(data)
    scheme = DerivativeScheme("analytic")
    defects = []
    for x in xs:
        r = decompactify(float(x), k)
        worst = 0.0
        for ang in angles_list:
            _, Rg = ricci_and_scalar(gfield, scheme, Point(r, ang))
            worst = max(worst, abs(Rg + n * (n - 1)))
        defects.append(worst)
    if max(defects) < 1e-6:
        c2 = {"verdict": "pass", "exponent": math.inf, "values": defects}
    else:
        slope, se = loglog_slope(xs, defects)
        verdict = "pass" if slope >= (n - 1) - max(se, 0.05) else "fail"
        c2 = {"verdict": verdict, "exponent": slope, "stderr": se,
              "critical": float(n - 1), "values": defects}
    return {"c1": c1, "c2": c2}


def mass_from_conformal(
    data: ConformalData,
    radii=DEFAULT_RADII,
    scheme: Optional[DerivativeScheme] = None,
    check: bool = True,
    potentials=None,
    atol: float = 1e-6,
    rtol: float = 1e-6,
):
    """Mass of the end described by conformal data; returns (MassResult, report)."""
    scheme = scheme or DerivativeScheme("analytic")
    report = boundary_conditions_check(data) if check else None
    if check:
        failed = [name for name, d in report.items() if d["verdict"] == "fail"]
        if failed:
            raise DomainError(
                f"boundary conditions {failed} fail; the mass is not defined "
                "for this conformal data"
            )
    bg = build_background(data.k, data.n, data.boundary)
    gfield = metric_from_conformal(data)
    p = momentum_vector(
        gfield, bg, scheme, radii=radii, potentials=potentials, atol=atol, rtol=rtol
    )
    return invariant_mass(p, data.k), report
