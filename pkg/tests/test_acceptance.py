"""End-to-end acceptance checks; each test prints one PASS/FAIL line."""

import json
import math
import time

import numpy as np
import pytest

from hypmass import DerivativeScheme, Point
from hypmass.backgrounds import (
    build_background,
    builtin_metric,
    bump_perturbation_metric,
    nb_basis,
)
from hypmass.boundary import circle_boundary
from hypmass.cli import main as cli_main
from hypmass.conformal import (
    compactify,
    conformal_data_from_metric,
    decompactify,
    mass_from_conformal,
)
from hypmass.gauge import (
    LorentzMap,
    apply_radial_gauge,
    decay_report,
    lorentz_act,
    predicted_gauge_mass,
)
from hypmass.geometry import ScalarField
from hypmass.mass import (
    MomentumCovector,
    classify_covector,
    identity_residual,
    invariant_mass,
    momentum_vector,
)

SCHEME = DerivativeScheme()
RADII = [10.0, 10**1.5, 100.0, 10**2.5, 1000.0]
FAR_RADII = [10**1.5, 100.0, 10**2.5, 1000.0, 10**3.5]
GAUGE_CASES = [(2, 1.0), (3, 0.1), (3, 1.0), (4, 0.5)]
SADS_MASSES = [0.1, 0.5, 1.0]


def report(num, ok, detail):
    print(f"criterion {num}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, detail


def test_criterion_1_kottler_masses(tmp_path, capsys):
    worst_rel = 0.0
    worst_abs = 0.0
    worst_t = 0.0
    for eta in (-1.0, 0.0, 1.0, 2.0):
        target = tmp_path / f"k{eta}.json"
        t0 = time.perf_counter()
        code = cli_main(
            ["mass", "--family", "kottler2d", "--eta", str(eta),
             "--output-path", str(target)]
        )
        dt = time.perf_counter() - t0
        assert code == 0
        m = json.loads(target.read_text())["p"][0]
        exact = 2 * math.pi * (1 + eta)
        if eta == -1.0:
            worst_abs = max(worst_abs, abs(m))
        else:
            worst_rel = max(worst_rel, abs(m - exact) / exact)
        worst_t = max(worst_t, dt)
    capsys.readouterr()
    ok = worst_rel <= 1e-6 and worst_abs <= 1e-9 and worst_t < 1.0
    report(1, ok, f"rel {worst_rel:.2e}, eta=-1 abs {worst_abs:.2e}, max {worst_t:.2f}s")


def test_criterion_2_gauge_masses():
    worst_rel = 0.0
    worst_t = 0.0
    for n, gamma in GAUGE_CASES:
        bg = build_background(1, n)
        g = apply_radial_gauge(builtin_metric("hyperbolic", bg), gamma, n)
        t0 = time.perf_counter()
        p = momentum_vector(
            g, bg, SCHEME, radii=RADII, potentials=nb_basis(bg)[:1], rtol=1e-3
        )
        worst_t = max(worst_t, time.perf_counter() - t0)
        exact = predicted_gauge_mass(n, gamma)
        worst_rel = max(worst_rel, abs(p.components[0] - exact) / exact)
    ok = worst_rel <= 1e-3 and worst_t < 10.0
    report(2, ok, f"rel {worst_rel:.2e}, max {worst_t:.1f}s")


def test_criterion_3_sads_momentum():
    worst_rel = 0.0
    worst_ang = 0.0
    classes = set()
    bg = build_background(1, 3)
    for m_param in SADS_MASSES:
        g = builtin_metric("schwarzschild_ads", bg, m_param=m_param)
        p = momentum_vector(g, bg, SCHEME, radii=RADII)
        exact = 16 * math.pi * m_param
        worst_rel = max(worst_rel, abs(p.components[0] - exact) / exact)
        worst_ang = max(worst_ang, float(np.max(np.abs(p.components[1:]))))
        classes.add(invariant_mass(p, 1).classification)
    ok = worst_rel <= 1e-4 and worst_ang <= 1e-8 and classes == {"timelike-future"}
    report(3, ok, f"rel {worst_rel:.2e}, angular {worst_ang:.2e}, {classes}")


def test_criterion_4_integrand_equivalence():
    worst = 0.0
    cases = []
    bg2 = build_background(1, 2)
    for eta in (-1.0, 0.0, 1.0, 2.0):
        cases.append((bg2, builtin_metric("kottler2d", bg2, eta=eta)))
    bg3 = build_background(1, 3)
    for m_param in SADS_MASSES:
        cases.append((bg3, builtin_metric("schwarzschild_ads", bg3, m_param=m_param)))
    for bg, g in cases:
        ps = momentum_vector(g, bg, SCHEME, radii=RADII, potentials=nb_basis(bg)[:1])
        pa = momentum_vector(
            g, bg, SCHEME, radii=RADII, potentials=nb_basis(bg)[:1], which="alt"
        )
        s, a = ps.components[0], pa.components[0]
        worst = max(worst, abs(s - a) / max(abs(s), 1e-9))
    ok = worst <= 1e-5
    report(4, ok, f"std/alt rel {worst:.2e}")


def test_criterion_5_identity_scaling():
    bg = build_background(1, 2, circle_boundary(32))
    V = nb_basis(bg)[0]
    ratios = []
    for seed in (0, 11):
        res = []
        eps = 0.05
        for _ in range(4):
            g = bump_perturbation_metric(bg, seed=seed, eps=eps)
            res.append(identity_residual(g, bg, V, SCHEME, 2.0, 4.0))
            eps *= 0.5
        ratios.extend(res[i] / res[i + 1] for i in range(3))
    ok = all(3.5 <= r <= 4.5 for r in ratios)
    report(5, ok, "ratios " + ", ".join(f"{r:.2f}" for r in ratios))


def test_criterion_6_static_verification():
    from hypmass.backgrounds import verify_static

    worst_an = 0.0
    worst_fd = 0.0
    for n in (2, 3, 4):
        bg = build_background(1, n)
        pts = [Point(r, tuple(bg.boundary.nodes[0])) for r in (2.0, 5.0, 11.0)]
        for V in nb_basis(bg):
            rep = verify_static(bg.b, V, -n, pts, bg=bg)
            worst_an = max(worst_an, rep["max_residual"])
            rep_fd = verify_static(
                bg.b, V, -n, pts, bg=bg, scheme=DerivativeScheme("fd", 1e-4)
            )
            worst_fd = max(worst_fd, rep_fd["max_residual"])
    bg = build_background(1, 3)
    Vbad = ScalarField(
        value=lambda p: p.r,
        gradient=lambda p: np.array([1.0, 0.0, 0.0]),
        hessian=lambda p: np.zeros((3, 3)),
    )
    pts = [Point(r, tuple(bg.boundary.nodes[0])) for r in (2.0, 5.0)]
    bad = verify_static(bg.b, Vbad, -3, pts, bg=bg)["max_residual"]
    ok = worst_an <= 1e-8 and worst_fd <= 1e-5 and bad > 1e-2
    report(6, ok, f"analytic {worst_an:.2e}, fd {worst_fd:.2e}, V=r {bad:.1f}")


def test_criterion_7_lorentz_invariance():
    rng = np.random.default_rng(2024)
    worst = 0.0
    flips = 0
    for _ in range(1000):
        dim = int(rng.integers(3, 6))
        L = LorentzMap.random(dim, rng)
        p = MomentumCovector(components=rng.normal(scale=3.0, size=dim))
        q = lorentz_act(L, p)
        worst = max(worst, abs(q.eta_norm2 - p.eta_norm2))
        if classify_covector(q.components) != classify_covector(p.components):
            flips += 1
    ok = worst <= 1e-12 and flips == 0
    report(7, ok, f"norm defect {worst:.2e}, class flips {flips}")


def test_criterion_8_conformal_equivalence():
    worst_mass = 0.0
    cases = []
    bg2 = build_background(1, 2)
    for eta in (0.0, 1.0, 2.0):
        cases.append((bg2, builtin_metric("kottler2d", bg2, eta=eta)))
    bg3 = build_background(1, 3)
    for m_param in SADS_MASSES:
        cases.append((bg3, builtin_metric("schwarzschild_ads", bg3, m_param=m_param)))
    for bg, g in cases:
        direct = momentum_vector(g, bg, SCHEME, radii=FAR_RADII)
        res, _ = mass_from_conformal(
            conformal_data_from_metric(g, bg), radii=FAR_RADII, check=False
        )
        d0 = direct.components[0]
        worst_mass = max(worst_mass, abs(res.momentum.components[0] - d0) / abs(d0))
    worst_rt = 0.0
    for k in (-1, 0, 1):
        for r in np.geomspace(1.0, 1e6, 25):
            back = decompactify(compactify(float(r), k), k)
            worst_rt = max(worst_rt, abs(back - float(r)) / float(r))
    ok = worst_mass <= 1e-8 and worst_rt <= 1e-12
    report(8, ok, f"mass rel {worst_mass:.2e}, round trip {worst_rt:.2e}")


def test_criterion_9_decay_sharpness():
    bad = []
    for n, gamma in GAUGE_CASES:
        bg = build_background(1, n)
        g = apply_radial_gauge(builtin_metric("hyperbolic", bg), gamma, n)
        rep = decay_report(g, bg, nb_basis(bg), RADII)
        if rep.m5["verdict"] == "pass":
            bad.append(f"gauge n={n} gamma={gamma} passed m5")
    bg = build_background(1, 3)
    for m_param in SADS_MASSES:
        g = builtin_metric("schwarzschild_ads", bg, m_param=m_param)
        rep = decay_report(g, bg, nb_basis(bg), RADII)
        if not rep.all_pass:
            bad.append(f"sads m={m_param} failed")
    ok = not bad
    report(9, ok, "; ".join(bad) or "gauge m5 not-pass, sads all pass")
