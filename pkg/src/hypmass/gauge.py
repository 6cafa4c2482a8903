"""Radial gauge deformations, the Lorentz action on momenta, decay checks.

The deformation rbar = r + gamma * r^(1 - n/2) sits exactly at the critical
decay rate, so it changes the mass integral by the closed-form amount
(n+8) n (n-1) gamma^2 Vol(S^{n-1}) / 4 while never passing the strict
pointwise decay condition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .backgrounds import Background
from .boundary import sphere_volume
from .errors import DomainError
from .geometry import DerivativeScheme, MetricField, Point, ricci_and_scalar
from .mass import MomentumCovector, frame_components

__all__ = [
    "LorentzMap",
    "lorentz_act",
    "radial_reparametrize",
    "apply_radial_gauge",
    "predicted_gauge_mass",
    "DecayReport",
    "decay_report",
    "loglog_slope",
]


class LorentzMap:
    """An element of O+(n,1) acting on the (n+1)-dimensional momentum space."""

    def __init__(self, matrix, tol: float = 1e-10):
        L = np.asarray(matrix, dtype=float)
        if L.ndim != 2 or L.shape[0] != L.shape[1]:
            raise DomainError("Lorentz matrix must be square")
        eta = np.diag([1.0] + [-1.0] * (L.shape[0] - 1))
        defect = np.max(np.abs(L.T @ eta @ L - eta))
        if defect > tol:
            raise DomainError(f"not a Lorentz matrix: defect {defect:.3e}")
        if L[0, 0] <= 0:
            raise DomainError("matrix is not orthochronous")
        self.matrix = L
        self.eta = eta

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @staticmethod
    def identity(size: int) -> "LorentzMap":
        return LorentzMap(np.eye(size))

    @staticmethod
    def boost(size: int, axis: int, rapidity: float) -> "LorentzMap":
        if not 1 <= axis < size:
            raise DomainError(f"boost axis must be in 1..{size - 1}")
        L = np.eye(size)
        ch, sh = math.cosh(rapidity), math.sinh(rapidity)
        L[0, 0] = L[axis, axis] = ch
        L[0, axis] = L[axis, 0] = sh
        return LorentzMap(L)

    @staticmethod
    def rotation(size: int, i: int, j: int, angle: float) -> "LorentzMap":
        if not 1 <= i < j < size:
            raise DomainError("rotation needs spatial axes 1 <= i < j")
        L = np.eye(size)
        c, s = math.cos(angle), math.sin(angle)
        L[i, i] = L[j, j] = c
        L[i, j] = -s
        L[j, i] = s
        return LorentzMap(L)

    @staticmethod
    def random(size: int, rng: np.random.Generator, n_factors: int = 6) -> "LorentzMap":
        """Random product of rotations and moderate boosts."""
        L = np.eye(size)
        for _ in range(n_factors):
            if size > 2 and rng.random() < 0.5:
                i, j = sorted(rng.choice(range(1, size), size=2, replace=False))
                F = LorentzMap.rotation(size, int(i), int(j), rng.uniform(0, 2 * math.pi))
            else:
                axis = int(rng.integers(1, size))
                # keep total rapidity small enough that eta-norms survive
                # cancellation at ~1e-14 relative accuracy
                F = LorentzMap.boost(size, axis, rng.uniform(-0.4, 0.4))
            L = L @ F.matrix
        return LorentzMap(L)

    def __matmul__(self, other: "LorentzMap") -> "LorentzMap":
        return LorentzMap(self.matrix @ other.matrix)


def lorentz_act(L: LorentzMap, p: MomentumCovector) -> MomentumCovector:
    """Covariant (inverse-transpose) action on a momentum covector."""
    comps = p.components
    if len(comps) != L.dim:
        raise DomainError(f"dimension mismatch: p has {len(comps)}, Lambda {L.dim}")
    return MomentumCovector(components=L.eta @ L.matrix @ L.eta @ comps)


def radial_reparametrize(
    g: MetricField,
    rbar: Callable[[float], float],
    drbar: Callable[[float], float],
    d2rbar: Callable[[float], float],
    name: str = "reparametrized",
    params=None,
    r_min: float = 0.0,
) -> MetricField:
    """Pullback of g under (r, v) -> (rbar(r), v), with chain-rule derivatives."""
    n = g.dim

    def check(r):
        if r <= r_min:
            raise DomainError(f"reparametrization domain requires r > {r_min}")

    def ev(p: Point):
        check(p.r)
        q = Point(rbar(p.r), p.angles)
        J = drbar(p.r)
        out = g.at(q).copy()
        out[0, 0] *= J * J
        out[0, 1:] *= J
        out[1:, 0] *= J
        return out

    def dev(p: Point):
        check(p.r)
        q = Point(rbar(p.r), p.angles)
        J = drbar(p.r)
        J2 = d2rbar(p.r)
        gq = g.at(q)
        dgq = g.d_at(q)
        d = np.empty((n, n, n))
        # radial derivative
        d[0] = J * dgq[0]
        d[0, 0, 0] = 2.0 * J * J2 * gq[0, 0] + J**3 * dgq[0, 0, 0]
        d[0, 0, 1:] = J2 * gq[0, 1:] + J * J * dgq[0, 0, 1:]
        d[0, 1:, 0] = d[0, 0, 1:]
        # angular derivatives
        for a in range(1, n):
            d[a] = dgq[a].copy()
            d[a, 0, 0] *= J * J
            d[a, 0, 1:] *= J
            d[a, 1:, 0] *= J
        return d

    return MetricField(n, ev, dev, name=name, params=params)


def gauge_monotonicity_bound(n: int, gamma: float) -> float:
    """Lower radial bound keeping r -> r + gamma r^(1-n/2) monotone and positive."""
    if n == 2:
        return max(0.0, -gamma)
    bound = 0.0
    if gamma > 0:
        bound = (gamma * (n / 2.0 - 1.0)) ** (2.0 / n)
    elif gamma < 0:
        bound = (-gamma) ** (2.0 / n)
    return bound


def apply_radial_gauge(g: MetricField, gamma: float, n: Optional[int] = None) -> MetricField:
    """Pullback of g under the critical-rate radial shift rbar = r + gamma r^(1-n/2)."""
    n = n or g.dim
    a = 1.0 - n / 2.0
    bound = gauge_monotonicity_bound(n, gamma)

    def rbar(r):
        return r + gamma * r**a

    def drbar(r):
        return 1.0 + gamma * a * r ** (a - 1.0)

    def d2rbar(r):
        return gamma * a * (a - 1.0) * r ** (a - 2.0)

    return radial_reparametrize(
        g,
        rbar,
        drbar,
        d2rbar,
        name=f"gauge[{g.name}]",
        params={"gamma": gamma, "r_min": bound, **g.params},
        r_min=bound,
    )


def predicted_gauge_mass(n: int, gamma: float) -> float:
    """Closed-form mass of the gamma-deformed hyperbolic metric."""
    if n < 2:
        raise DomainError("n must be >= 2")
    return 0.25 * (n + 8) * n * (n - 1) * gamma**2 * sphere_volume(n - 1)


# ---------------------------------------------------------------------------
# decay diagnostics

def loglog_slope(x, y):
    """Least-squares slope of log y vs log x, with its standard error.

    Returns (slope, stderr); stderr is 0 when fewer than 3 points or the
    fit is exact.
    """
    x = np.asarray(x, dtype=float)
    y = np.maximum(np.asarray(y, dtype=float), 1e-300)
    lx, ly = np.log(x), np.log(y)
    A = np.stack([lx, np.ones_like(lx)], axis=1)
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = A @ coef - ly
    dof = len(x) - 2
    if dof <= 0:
        return float(coef[0]), 0.0
    s2 = float(np.sum(resid**2)) / dof
    cov = s2 * np.linalg.inv(A.T @ A)
    return float(coef[0]), float(math.sqrt(max(cov[0, 0], 0.0)))


@dataclass(frozen=True)
class DecayReport:
    m3a: dict
    m3b: dict
    m0: dict
    m5: dict
    vcondition: dict

    def as_dict(self) -> dict:
        return {
            "m3a": self.m3a,
            "m3b": self.m3b,
            "m0": self.m0,
            "m5": self.m5,
            "vcondition": self.vcondition,
        }

    @property
    def all_pass(self) -> bool:
        return all(
            d["verdict"] == "pass"
            for d in (self.m3a, self.m3b, self.m0, self.m5, self.vcondition)
        )


def _sample_angles(bg: Background, count: int = 6):
    nodes = bg.boundary.nodes
    step = max(1, len(nodes) // count)
    return [tuple(a) for a in nodes[::step][:count]]


def _pointwise_decay(g, bg, scheme, r, angles_list):
    """max over nodes of sum |e_ab| + sum |f_k(e_ab)| in the b-frame."""
    n = bg.n
    worst = 0.0
    for ang in angles_list:
        p = Point(r, ang)

        def comps(q):
            return frame_components(g, bg, q) - np.eye(n)

        e = comps(p)
        h = scheme.steps(p, n)
        de = np.empty((n, n, n))
        for a in range(n):
            de[a] = (comps(p.shifted(a, +h[a])) - comps(p.shifted(a, -h[a]))) / (2 * h[a])
        # frame directional derivatives f_k = F[k, a] d_a
        from .backgrounds import asymptotic_frame

        F = asymptotic_frame(bg, p)
        fd = np.einsum("ka,aij->kij", F, de)
        worst = max(worst, float(np.sum(np.abs(e)) + np.sum(np.abs(fd))))
    return worst


def _exponent_verdict(slope, stderr, critical, strict=True, band=0.05):
    gap = slope - critical
    if abs(gap) <= max(stderr, band):
        return "borderline"
    if gap > 0:
        return "pass"
    if not strict and gap == 0:
        return "pass"
    return "fail"


def decay_report(
    g: MetricField,
    bg: Background,
    potentials,
    radii,
    scheme: Optional[DerivativeScheme] = None,
    sample_count: int = 6,
) -> DecayReport:
    """Fitted decay exponents and integral-tail estimates for the boundary
    conditions governing convergence and invariance of the mass integrals."""
    scheme = scheme or DerivativeScheme("analytic")
    radii = sorted(float(R) for R in radii)
    if len(radii) < 5:
        raise DomainError("decay_report needs >= 5 radii")
    n = bg.n
    angles_list = _sample_angles(bg, sample_count)

    # pointwise decay (m5): fit on the 3 largest radii
    qvals = [_pointwise_decay(g, bg, scheme, r, angles_list) for r in radii]
    critical = n / 2.0 if n > 2 else 1.0
    if max(qvals) < 1e-13:
        m5 = {"verdict": "pass", "exponent": math.inf, "stderr": 0.0, "values": qvals}
    else:
        slope, se = loglog_slope(radii[-3:], qvals[-3:])
        exponent = -slope
        m5 = {
            "verdict": _exponent_verdict(exponent, se, critical),
            "exponent": exponent,
            "stderr": se,
            "critical": critical,
            "values": qvals,
        }

    # uniform equivalence (m0)
    C = 1.0
    for r in radii:
        for ang in angles_list:
            p = Point(r, ang)
            lam = np.linalg.eigvalsh(np.linalg.solve(bg.b.at(p), g.at(p)))
            C = max(C, float(lam.max()), float(1.0 / lam.min()))
    m0 = {"verdict": "pass" if np.isfinite(C) else "fail", "constant": C}

    # potential growth (Vcondition)
    vc = {"potentials": []}
    worst = "pass"
    for V in potentials:
        vmax = []
        dvmax = []
        for r in radii:
            vv, dvv = 0.0, 0.0
            for ang in angles_list:
                p = Point(r, ang)
                vv = max(vv, abs(V.value(p)))
                binv = np.linalg.inv(bg.b.at(p))
                dV = np.asarray(V.gradient(p), dtype=float)
                dvv = max(dvv, math.sqrt(max(float(dV @ binv @ dV), 0.0)))
            vmax.append(vv)
            dvmax.append(dvv)
        sv, sev = loglog_slope(radii, vmax)
        sdv, sedv = loglog_slope(radii, dvmax)
        ok = sv <= 1.0 + max(sev, 0.05) and sdv <= 1.0 + max(sedv, 0.05)
        vc["potentials"].append(
            {"label": getattr(V, "label", None), "value_exponent": sv, "gradient_exponent": sdv}
        )
        if not ok:
            worst = "fail"
    vc["verdict"] = worst

    # integral tails (m3a, m3b) over nested annuli
    t3, w3 = np.polynomial.legendre.leggauss(3)
    curvature_floor = 1e-6  # below the second-derivative noise of R_g

    def annulus_integrals(lo, hi):
        rr = 0.5 * (hi - lo) * t3 + 0.5 * (hi + lo)
        ww = 0.5 * (hi - lo) * w3
        ia = ib = 0.0
        for r, wr in zip(rr, ww):
            qa = qb = 0.0
            for ang in angles_list:
                p = Point(float(r), ang)
                h = scheme.steps(p, n)
                de = np.empty((n, n, n))

                def comps(q):
                    return frame_components(g, bg, q) - np.eye(n)

                e = comps(p)
                for a in range(n):
                    de[a] = (
                        comps(p.shifted(a, +h[a])) - comps(p.shifted(a, -h[a]))
                    ) / (2 * h[a])
                from .backgrounds import asymptotic_frame

                F = asymptotic_frame(bg, p)
                fd = np.einsum("ka,aij->kij", F, de)
                density = float(np.sum(e**2) + np.sum(fd**2))
                _, Rg = ricci_and_scalar(g, scheme, p)
                defect = max(abs(Rg + n * (n - 1)) - curvature_floor, 0.0)
                sqg = math.sqrt(np.linalg.det(g.at(p)))
                sqh = bg.boundary.sqrt_det_h(ang)
                qa += density * r * sqg / sqh
                qb += defect * r * sqg / sqh
            ia += wr * qa / len(angles_list) * bg.boundary.volume
            ib += wr * qb / len(angles_list) * bg.boundary.volume
        return ia, ib

    tails_a, tails_b = [], []
    for lo, hi in zip(radii[:-1], radii[1:]):
        ia, ib = annulus_integrals(lo, hi)
        tails_a.append(ia)
        tails_b.append(ib)

    def tail_verdict(tails, floor=1e-10):
        t = np.asarray(tails)
        if t.max() < floor:
            return "pass"
        ratios = t[1:] / np.maximum(t[:-1], 1e-300)
        if np.all(ratios < 0.75):
            return "pass"
        if np.all(ratios < 1.0):
            return "borderline"
        return "fail"

    m3a = {"verdict": tail_verdict(tails_a), "tails": tails_a}
    m3b = {"verdict": tail_verdict(tails_b), "tails": tails_b}
    return DecayReport(m3a=m3a, m3b=m3b, m0=m0, m5=m5, vcondition=vc)
