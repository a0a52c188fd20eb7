"""Acceptance suite: one printed PASS/FAIL line per criterion, tolerances pinned."""
import math
import time

import numpy as np
import pytest

from nestprob.calculus import ITO_CASES, common_noise_case, loglog_slope, run_ito_case
from nestprob.conditional import law_of_conditional_law, realize_nested_law
from nestprob.dynamic_control import dpp_suite, law_invariance_check, representations, value_dpp, value_exhaustive
from nestprob.hjb_insider import closed_form_error, interpolant_error, simulate_policy, solve_v
from nestprob.measures import DiscreteMeasure, NestedMeasure, dyadic_project
from nestprob.static_games import (
    a_closed_form, braess_cost, brute_force_static, camouflage_partition, conditional_mean_abs, gaussian_cells,
    insider_value, invert_I, nash_mc, nash_value, r0, sign_partition, u_of_partition,
)
from nestprob.transport import interpolation_gap, nested_wp, wp, wp_1d

from conftest import random_measure, random_nested
from test_transport import brute_force_coupling


@pytest.fixture
def report(capsys):
    def emit(num, title, ok, detail, seconds):
        with capsys.disabled():
            print(f"\n[acceptance] criterion {num} {'PASS' if ok else 'FAIL'} ({seconds:.1f}s) {title}: {detail}")
    return emit


def test_criterion_1_static_insider(report):
    t0 = time.perf_counter()
    v1, v5 = insider_value(1.0).V, insider_value(0.5).V
    exact1 = math.sqrt(2 / math.pi) - 1 / math.pi + 0.5
    cells = gaussian_cells(1000)
    u1 = u_of_partition(cells, sign_partition(cells), 1.0)
    u5 = u_of_partition(cells, camouflage_partition(cells, insider_value(0.5).a_R), 0.5)
    b1, b5 = brute_force_static(1.0, 12, 2), brute_force_static(0.5, 12, 2)
    secs = time.perf_counter() - t0
    checks = {
        "closed forms 1e-12": abs(v1 - exact1) <= 1e-12 and abs(v5 - 0.625) <= 1e-12,
        "N=1000 within 2e-3": abs(u1 - v1) <= 2e-3 and abs(u5 - v5) <= 2e-3,
        "brute force within 5e-3": b1.exhaustive and abs(b1.value - v1) <= 5e-3 and abs(b5.value - v5) <= 5e-3,
        "runtime < 10 s": secs < 10,
    }
    ok = all(checks.values())
    report(1, "static insider", ok,
           f"V(1)={v1:.15f} V(.5)={v5:.15f} u-gaps={abs(u1 - v1):.1e},{abs(u5 - v5):.1e} "
           f"brute-gaps={abs(b1.value - v1):.1e},{abs(b5.value - v5):.1e} {checks}", secs)
    assert ok


def test_criterion_2_threshold(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(20)
    Rs = rng.uniform(1e-3, r0() - 1e-3, 50)
    inv_gap = max(abs(invert_I(R) - a_closed_form(R)) for R in Rs)
    N = 1000
    cells = gaussian_cells(N)
    cm_gap = 0.0
    for R in (0.1, 0.3, 0.5, 0.7):
        m = conditional_mean_abs(cells, camouflage_partition(cells, invert_I(R)))
        cm_gap = max(cm_gap, float(np.max(np.abs(m - R))))
    secs = time.perf_counter() - t0
    ok = inv_gap <= 1e-9 and cm_gap <= 5.0 / N
    report(2, "a_R inversion", ok, f"max |bisection - closed form|={inv_gap:.1e} (tol 1e-9), "
           f"max ||E[X|G]| - R|={cm_gap:.1e} (tol 5/N={5 / N:.0e})", secs)
    assert ok


def test_criterion_3_nested_wasserstein(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(30)
    lp_gap = 0.0
    for _ in range(40):
        r1 = NestedMeasure([(w, random_measure(rng, 2)) for w in rng.dirichlet(np.ones(2))])
        r2 = NestedMeasure([(w, random_measure(rng, 2)) for w in rng.dirichlet(np.ones(2))])
        for p in (1.0, 2.0):
            d, _ = nested_wp(r1, r2, p)
            C = np.array([[wp(m1, m2, p)[0] ** p for _, m2 in r2.atoms] for _, m1 in r1.atoms])
            lp_gap = max(lp_gap, abs(d**p - brute_force_coupling(r1.weights, r2.weights, C)))
    q_gap = 0.0
    for k in range(200):
        a, b = random_measure(rng, lo=-2, hi=2), random_measure(rng, lo=-2, hi=2)
        p = 1.0 if k % 2 else 2.0
        q_gap = max(q_gap, abs(wp(a, b, p)[0] - wp_1d(a, b, p)))
    sym = tri = 0.0
    for _ in range(30):
        a, b, c = (random_nested(rng) for _ in range(3))
        ab = nested_wp(a, b)[0]
        sym = max(sym, abs(ab - nested_wp(b, a)[0]))
        tri = max(tri, ab - nested_wp(a, c)[0] - nested_wp(c, b)[0])
    for _ in range(5):
        a = random_nested(rng)
        assert nested_wp(a, a)[0] <= 1e-9
    gaps = [interpolation_gap(random_nested(rng), random_nested(rng)) for _ in range(20)]
    secs = time.perf_counter() - t0
    core = lp_gap <= 1e-9 and q_gap <= 1e-9 and sym <= 1e-9 and tri <= 1e-9 and secs < 30
    interp = max(gaps) <= 1e-9
    report(3, "nested Wasserstein", core and interp,
           f"LP vs brute={lp_gap:.1e}, wp vs wp_1d={q_gap:.1e}, symmetry={sym:.1e}, triangle excess={tri:.1e}; "
           f"W2<=sqrt(W1 W3) violated on {sum(g > 1e-9 for g in gaps)}/20 spot checks "
           f"(max excess {max(gaps):.3f}; the literal inequality is false, see notes)", secs)
    assert core


@pytest.mark.xfail(strict=True, reason="W2 <= sqrt(W1 W3) does not hold in general; e.g. delta_{delta_0} vs "
                                       "delta_{Bern(1/2)} has W1=1/2, W2=2^-1/2, W3=2^-1/3")
def test_criterion_3_interpolation_literal():
    rng = np.random.default_rng(31)
    for _ in range(20):
        assert interpolation_gap(random_nested(rng), random_nested(rng)) <= 1e-9


def test_criterion_4_realization(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(40)
    rt = 0.0
    for _ in range(100):
        r = random_nested(rng, lo=-1, hi=1)
        rz = realize_nested_law(r)
        rt = max(rt, nested_wp(law_of_conditional_law(rz.space, "X", rz.partition), r)[0])
    ratio = 0.0
    for _ in range(100):
        mu = random_measure(rng)
        for n in range(1, 9):
            ratio = max(ratio, wp(dyadic_project(mu, n), mu, 2.0)[0] / (4 * 2 ** (-n / 2)))
    secs = time.perf_counter() - t0
    ok = rt <= 1e-9 and ratio <= 1.0
    report(4, "realization round trip", ok,
           f"max round-trip W2={rt:.1e} (tol 1e-9), max W2(mu_n,mu)/(4 2^(-n/2))={ratio:.3f} (tol 1)", secs)
    assert ok


def test_criterion_5_dpp(report):
    t0 = time.perf_counter()
    gaps, spreads = [], []
    for k, (_, p) in enumerate(dpp_suite()):
        gaps.append(abs(value_dpp(p).value - value_exhaustive(p).value))
        rep = law_invariance_check(p, representations(p.xi_space, p.g0, seed=k))
        spreads.append(rep.spread)
    secs = time.perf_counter() - t0
    ok = len(gaps) == 20 and max(gaps) <= 1e-12 and max(spreads) <= 1e-12 and secs < 60
    report(5, "DPP", ok, f"20 instances, max |DPP - exhaustive|={max(gaps):.1e}, "
           f"max spread over 3 representations={max(spreads):.1e} (tol 1e-12)", secs)
    assert ok


def test_criterion_6_ito(report):
    t0 = time.perf_counter()
    dts = (1 / 8, 1 / 16, 1 / 32)
    res = [run_ito_case("quadratic-mean", dt).max_residual for dt in dts]
    slope = loglog_slope(dts, res)
    lin = max(run_ito_case(n, dt).max_residual for n in ("linear-mean", "linear-mean-martingale") for dt in dts)
    cons = max(common_noise_case("x-times-mean", dt).consistency_gap for dt in dts)
    secs = time.perf_counter() - t0
    ok = 0.8 <= slope <= 1.2 and lin <= 1e-10 and cons <= 1e-10 and secs < 60
    report(6, "Ito formula", ok, f"quadratic-mean residuals={[f'{r:.3e}' for r in res]} slope={slope:.3f}, "
           f"linear residual={lin:.1e}, common-noise consistency={cons:.1e}", secs)
    assert ok


def test_criterion_7_hjb(report):
    t0 = time.perf_counter()
    sol = solve_v(4.0, 0.01, None, 1.0)
    err = closed_form_error(sol)
    pin = max(float(np.max(np.abs(sol.value(t, np.array([-1.0, 1.0]))))) for t in sol.t)
    v00 = float(sol.value(0.0, 0.0))
    e1 = interpolant_error(solve_v(4.0, 0.02, None, 1.0, save_dt=0.01))
    e2 = interpolant_error(solve_v(4.0, 0.01, None, 1.0, save_dt=0.01))
    mc = {x0: simulate_policy(sol, x0, 100_000, seed=7) for x0 in (0.0, 0.5)}
    secs = time.perf_counter() - t0
    ok = (err <= 1e-2 and pin <= 1e-3 and v00 > -1 + 0.01 and 1.5 <= e1 / e2 <= 4.5
          and all(r.within(r.pde_value) for r in mc.values()) and secs < 300)
    mc_txt = ", ".join(f"x0={x0}: mc={r.mc_value:.5f}+-{r.stderr:.5f} pde={r.pde_value:.5f} z={r.z_pde:.2f}"
                       for x0, r in mc.items())
    report(7, "HJB", ok, f"sup err on 1<=|x|<=4={err:.1e}, |v(t,+-1)|<={pin:.1e}, v(0,0)={v00:.5f}, "
           f"refinement ratio={e1 / e2:.3f}; {mc_txt}", secs)
    assert ok


def test_criterion_8_games(report):
    t0 = time.perf_counter()
    braess = (braess_cost(False), braess_cost(True))
    nash = max(abs(nash_value(1.0, "None") - 0.25), abs(nash_value(0.5, "Full") - 0.5))
    z = []
    for lam in (0.5, 1.0):
        for d in ("None", "Full"):
            m, se = nash_mc(lam, d, 10**6, seed=8)
            z.append(abs(m - nash_value(lam, d)) / se)
    secs = time.perf_counter() - t0
    ok = braess == (1.5, 2.0) and nash <= 1e-12 and max(z) <= 3
    report(8, "games", ok, f"braess={braess}, nash closed-form gap={nash:.1e}, max MC |z|={max(z):.2f}", secs)
    assert ok
