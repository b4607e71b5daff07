import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from asebo import explore as ex
from asebo import theory as th
from asebo.functions import counting_wrapper, make_function
from asebo.linalg import ActiveSubspace
from asebo.verify import coordinate_subspace, ratio_problem


def linear_problem(s_active, d_active=5, d_perp=45):
    d = d_active + d_perp
    c = np.zeros(d)
    c[0] = math.sqrt(s_active)
    c[d_active] = math.sqrt(1 - s_active)
    return make_function("linear", d, c=c), coordinate_subspace(d, d_active)


def test_zero_rate_freezes_p():
    f, sub = linear_problem(0.9)
    st0 = ex.ExplorerState(q=0.1, beta=0.1, alpha=0.0, horizon=20)
    p, new = ex.bandit_explore(f, np.zeros(50), sub, st0, np.random.default_rng(0))
    assert p == pytest.approx(0.8 * 0.1 + 0.1)
    assert new.q == 0.1 and len(new.history) == 21


def test_exponentiated_update_oracles():
    assert ex.exponentiated_update(0.5, np.array([-1.0, 0.0]), 1.0) == pytest.approx(math.e / (math.e + 1))
    assert ex.exponentiated_update(0.3, np.array([2.5, 2.5]), 7.0) == 0.3
    assert ex.exponentiated_update(0.5, np.array([-1e9, 0.0]), 1.0) < 1.0


@given(st.floats(1e-6, 1 - 1e-6), st.floats(-1e6, 1e6), st.floats(-1e6, 1e6), st.floats(0, 10))
def test_exponentiated_update_matches_multiplicative_form(q, e1, e2, alpha):
    out = ex.exponentiated_update(q, np.array([e1, e2]), alpha)
    assert 0.0 < out < 1.0
    z = alpha * (e1 - e2)
    if abs(z) < 30:
        # shifted by exp(alpha e2) to avoid underflow
        ref = q / (q + (1 - q) * math.exp(z))
        assert out == pytest.approx(ref, rel=1e-9)


def test_stochastic_gradient_form():
    e = ex.stochastic_gradient(1, 2.0, 0.5, 0.1, 3, 7)
    assert e == pytest.approx([-0.8 * 4 * 5 / 0.125, 0.0])
    e = ex.stochastic_gradient(0, 2.0, 0.5, 0.1, 3, 7)
    assert e == pytest.approx([0.0, -0.8 * 4 * 9 / 0.125])


def test_stochastic_gradient_is_unbiased_on_linear():
    s_act, p, beta, n = 0.7, 0.4, 0.1, 200_000
    f, sub = linear_problem(s_act, 3, 7)
    rng = np.random.default_rng(1)
    a = (rng.random(n) < p).astype(int)
    za = rng.standard_normal((n, 3))
    zp = rng.standard_normal((n, 7))
    c = f.gradient(np.zeros(10))
    v = np.where(a == 1, za @ c[:3], zp @ c[3:])
    e = np.array([ex.stochastic_gradient(ai, vi, p, beta, 3, 7) for ai, vi in zip(a[:2000], v[:2000])])
    # vectorized form for the full sample, checked against the scalar routine above
    full = (1 - 2 * beta) * v[:, None] ** 2 * np.stack([-a * 5 / p**3, -(1 - a) * 9 / (1 - p) ** 3], axis=1)
    assert np.allclose(full[:2000], e)
    expect = (1 - 2 * beta) * np.array([-5 * s_act / p**2, -9 * (1 - s_act) / (1 - p) ** 2])
    se = full.std(axis=0) / math.sqrt(n)
    assert np.all(np.abs(full.mean(axis=0) - expect) <= 3 * se)


def test_p_stays_clamped_and_costs_queries():
    base, sub = linear_problem(0.99)
    f = counting_wrapper(base)
    st0 = ex.ExplorerState(q=0.5, beta=0.1, alpha=100.0, horizon=30)
    p, new = ex.bandit_explore(f, np.zeros(50), sub, st0, np.random.default_rng(2))
    assert np.all((new.p_trace >= 0.1) & (new.p_trace <= 0.9))
    assert 0.1 <= p <= 0.9
    assert f.count == 2 * 31


def test_bandit_converges_at_theorem_scaling():
    # s_act = 0.9 over 5 directions, 0.1 over 45: p* = 0.537
    split = th.SubspaceSplit(0.9, 0.1, 5, 45)
    target = th.clamped_optimal_p(split, 0.1)
    f, sub = linear_problem(0.9)
    finals = []
    for seed in range(5):
        alpha = 10 * ex.theorem_learning_rate(0.1, 500, 5, 45, 0.9, 0.1)
        st0 = ex.ExplorerState(q=0.1, beta=0.1, alpha=alpha, horizon=500)
        _, new = ex.bandit_explore(f, np.zeros(50), sub, st0, np.random.default_rng(seed))
        tr = new.p_trace
        finals.append(tr[-len(tr) // 4:].mean())
    assert abs(np.median(finals) - target) <= 0.1


def test_state_validation():
    for bad in (dict(q=1.5), dict(beta=0.5), dict(alpha=-1.0), dict(horizon=0), dict(sigma=0.0)):
        with pytest.raises(ValueError):
            ex.ExplorerState(**bad)


def test_explorers_need_both_subspaces():
    f = make_function("linear", 3)
    full = ActiveSubspace(np.eye(3), np.zeros((3, 0)), 1.0)
    with pytest.raises(ValueError):
        ex.bandit_explore(f, np.zeros(3), full, ex.ExplorerState(), np.random.default_rng(0))
    with pytest.raises(ValueError):
        ex.cs_ratio_explore(f, np.zeros(3), full, 5, 0.01, np.random.default_rng(0))


def test_cs_running_means_are_exact():
    f, sub, _ = ratio_problem(2.0)
    rec = []
    est = ex.cs_ratio_explore(f, np.zeros(50), sub, 37, 0.01, np.random.default_rng(3), record=rec)
    va, vp = np.array(rec).T
    assert est.s_active_hat == pytest.approx(np.mean(va**2), rel=1e-12)
    assert est.s_perp_hat == pytest.approx(np.mean(vp**2), rel=1e-12)
    assert est.probes_used == 4 * 37


def test_cs_query_cost():
    base, sub, _ = ratio_problem(1.0)
    f = counting_wrapper(base)
    ex.cs_ratio_explore(f, np.zeros(50), sub, 10, 0.01, np.random.default_rng(0))
    assert f.count == 40


def test_cs_all_signal_active_gives_infinite_ratio():
    c = np.zeros(10)
    c[:3] = 1.0
    f = make_function("linear", 10, c=c)
    est = ex.cs_ratio_explore(f, np.zeros(10), coordinate_subspace(10, 3), 20, 0.01, np.random.default_rng(0))
    assert est.s_perp_hat == 0.0
    assert est.r_hat == math.inf
    assert ex.ratio_to_probability(est.r_hat) == 1.0


@pytest.mark.parametrize("r_true,lo,hi", [(1.0, 0.8, 1.25), (2.0, 1.7, 2.3)])
def test_cs_ratio_median(r_true, lo, hi):
    f, sub, _ = ratio_problem(r_true)
    est = [ex.cs_ratio_explore(f, np.zeros(50), sub, 500, 0.01, np.random.default_rng(s)).r_hat for s in range(5)]
    assert lo <= np.median(est) <= hi


def test_ratio_to_probability():
    assert ex.ratio_to_probability(1.0) == 0.5
    assert ex.ratio_to_probability(0.0) == 0.0
    assert ex.ratio_to_probability(3.0) == 0.75
    with pytest.raises(ValueError):
        ex.ratio_to_probability(-1.0)


def test_theorem_learning_rate():
    assert ex.theorem_learning_rate(0.1, 4, 1, 1, 1.0, 1.0) == pytest.approx(0.02 / math.sqrt(4 * 12))
    with pytest.raises(ValueError):
        ex.theorem_learning_rate(0.1, 4, 1, 1, 0.0, 0.0)


def test_plugin_learning_rate():
    sub = coordinate_subspace(4, 1)
    g = np.array([2.0, 1.0, 0.0, 0.0])
    rate = ex.plugin_learning_rate(0.1, 10, sub, g, scale=3.0)
    assert rate == pytest.approx(3 * ex.theorem_learning_rate(0.1, 10, 1, 3, 4.0, 1.0))
    assert ex.plugin_learning_rate(0.1, 10, sub, np.zeros(4)) is None
