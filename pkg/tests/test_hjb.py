import numpy as np
import pytest
from hypothesis import given, strategies as st

from nestprob.calculus import hamiltonian
from nestprob.errors import CFLViolation, MeanOutOfGrid
from nestprob.hjb_insider import (
    assemble_V, closed_form_error, dpp_step_gap, hjb_registry_bundle, hjb_residual, interpolant_error,
    simulate_policy, solve_v, tilde_v,
)
from nestprob.measures import DiscreteMeasure, NestedMeasure


@pytest.fixture(scope="module")
def sol():
    return solve_v(4.0, 0.01, None, 1.0)


@pytest.fixture(scope="module")
def coarse():
    return solve_v(4.0, 0.05, None, 1.0, save_dt=0.01)


def dd(x):
    return NestedMeasure.dirac(DiscreteMeasure.dirac(x))


def test_tilde_v():
    assert tilde_v(0.5, 2.0, 1.0) == -0.5
    assert tilde_v(1.0, 3.7, 1.0) == 0.0
    assert tilde_v(0.0, 0.0, 1.0) == -1.0


def test_solve_examples(sol):
    assert abs(sol.value(0.5, 2.0) + 0.5) <= 1e-2
    for t in np.linspace(0, 1, 11):
        assert np.all(np.abs(sol.value(t, np.array([-1.0, 1.0]))) <= 1e-3)
    assert sol.value(0.0, 0.0) > -1 + 0.01


def test_preconditions():
    with pytest.raises(CFLViolation):
        solve_v(4.0, 0.1, 0.02)
    with pytest.raises(ValueError):
        solve_v(2.0, 0.1)


def test_grid_invariants(sol):
    assert np.all(sol.v <= 1e-12)
    assert np.all(sol.v[-1] == 0.0)
    assert sol.dt <= sol.dx**2
    assert set(np.unique(sol.sigma_star)) <= {0, 1}
    # tie I*(0) = 0: far from the band the second difference vanishes and no information is taken
    assert sol.policy(0.5, 3.0) == 0


def test_closed_form_region(sol):
    assert closed_form_error(sol) <= 1e-2
    assert interpolant_error(sol) <= 1e-2


def test_refinement_ratio():
    e1 = interpolant_error(solve_v(4.0, 0.02, None, 1.0, save_dt=0.01))
    e2 = interpolant_error(solve_v(4.0, 0.01, None, 1.0, save_dt=0.01))
    assert 1.5 <= e1 / e2 <= 4.5


def test_value_bounds(sol):
    ref = tilde_v(sol.t[:, None], sol.x[None, :], sol.T)
    assert np.all(ref <= sol.v + 1e-3) and np.all(sol.v <= 1e-3)


def test_monotone_scheme(coarse):
    eps = 1e-3
    up = solve_v(4.0, 0.05, None, 1.0, save_dt=0.01, terminal=np.full(coarse.x.size, eps),
                 boundary=lambda t, x: tilde_v(t, x, 1.0) + eps)
    assert np.all(up.v >= coarse.v - 1e-15)
    bump = np.where(np.abs(coarse.x) < 0.5, eps, 0.0)
    up = solve_v(4.0, 0.05, None, 1.0, save_dt=0.01, terminal=bump)
    assert np.all(up.v >= coarse.v - 1e-15)


@given(st.floats(0.05, 0.9), st.floats(-3.0, 3.0))
def test_dpp_spot_check(sol, t, x):
    # value error O(dt + dx^2) plus the binary-tree step error O(h^2)
    assert dpp_step_gap(sol, t, x, 0.01) <= 5e-3


def test_assemble_examples(sol):
    assert assemble_V(sol, 0.3, dd(0.7)) == pytest.approx(float(sol.value(0.3, 0.7)))
    mu1, mu2 = DiscreteMeasure([[0.0], [1.0]], [0.5, 0.5]), DiscreteMeasure.dirac(-2.0)
    mix = NestedMeasure([(0.5, mu1), (0.5, mu2)])
    avg = 0.5 * (assemble_V(sol, 0.3, NestedMeasure.dirac(mu1)) + assemble_V(sol, 0.3, NestedMeasure.dirac(mu2)))
    assert assemble_V(sol, 0.3, mix) == pytest.approx(avg, abs=1e-15)
    collapsed = NestedMeasure([(0.5, DiscreteMeasure.dirac(0.5)), (0.5, mu2)])
    assert assemble_V(sol, 0.3, mix) == pytest.approx(assemble_V(sol, 0.3, collapsed), abs=1e-15)
    with pytest.raises(MeanOutOfGrid):
        assemble_V(sol, 0.3, dd(5.0))


def test_hjb_residual_random_points(sol):
    rng = np.random.default_rng(0)
    bound = 5 * (sol.dx + 1e-3)
    for t, x in zip(rng.uniform(0.01, 0.98, 100), rng.uniform(-3.5, 3.5, 100)):
        assert hjb_residual(sol, float(t), dd(float(x))) <= bound
    assert hjb_residual(sol, 0.5, dd(2.0)) <= 1e-2


def test_hjb_residual_linear_in_mixture(sol):
    a, b = dd(0.3), dd(-1.7)
    mix = NestedMeasure([(0.25, a.inners[0]), (0.75, b.inners[0])])
    bundle = hjb_registry_bundle(sol)
    f = lambda r: hamiltonian(bundle, 0.4, r, lambda t, x: 0 * x, lambda t, x: 1 + 0 * x)[0]
    assert f(mix) == pytest.approx(0.25 * f(a) + 0.75 * f(b), abs=1e-12)


def test_hamiltonian_matches_pde_operator(sol):
    bundle = hjb_registry_bundle(sol)
    k = sol.layer(0.5)
    for x in (-0.4, 0.2, 1.5):
        j = sol.node(x)
        val, s = hamiltonian(bundle, sol.t[k], dd(sol.x[j]), lambda t, y: 0 * y, lambda t, y: 1 + 0 * y)
        vt = (sol.v[k + 1, j] - sol.v[k, j]) / (sol.t[k + 1] - sol.t[k])
        assert val == pytest.approx(vt + 0.5 * max(sol.d2v[k, j], 0.0), abs=1e-9)
        assert s[0] == sol.sigma_star[k, j]


def test_simulate_outside_band(sol):
    res = simulate_policy(sol, 2.0, 5000, seed=1)
    assert res.band_entry_fraction == 0.0
    assert res.within(res.tilde_value)
    res = simulate_policy(sol, 1.0, 5000, seed=1)
    assert res.within(0.0)


def test_simulate_determinism(sol):
    a = simulate_policy(sol, 0.5, 4000, seed=3, block=1000)
    b = simulate_policy(sol, 0.5, 4000, seed=3, block=1000)
    assert a == b


def test_simulate_from_zero(sol):
    res = simulate_policy(sol, 0.0, 20000, seed=11)
    assert res.mc_value >= res.tilde_value
    assert res.within(res.pde_value)
