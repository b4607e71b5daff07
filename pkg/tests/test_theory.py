import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from asebo import theory as th

splits = st.builds(
    th.SubspaceSplit,
    st.floats(1e-6, 1e3), st.floats(1e-6, 1e3), st.integers(1, 300), st.integers(1, 300),
)


def test_gamma_examples():
    one = th.SubspaceSplit(1.0, 0.0, 1, 4)
    for p in (0.1, 0.5, 0.9):
        assert th.gamma_variance(one, p) == pytest.approx(3 / p - 1)
    assert th.gamma_variance(one, 1 - 1e-12) == pytest.approx(2.0)
    sym = th.SubspaceSplit(0.5, 0.5, 4, 4)
    assert th.gamma_variance(sym, 0.5) == pytest.approx(2 * 6 - 1)
    with pytest.raises(ValueError):
        th.gamma_variance(sym, 0.0)
    with pytest.raises(ValueError):
        th.gamma_variance(sym, 1.0)


def test_gamma_vectorized():
    sp = th.SubspaceSplit(0.8, 0.2, 5, 15)
    ps = np.array([0.2, 0.5])
    assert th.gamma_variance(sp, ps) == pytest.approx([th.gamma_variance(sp, 0.2), th.gamma_variance(sp, 0.5)])


def test_optimal_p_examples():
    assert th.optimal_p(th.SubspaceSplit(1.0, 0.0, 3, 7)) == 1.0
    assert th.optimal_p(th.SubspaceSplit(0.0, 1.0, 3, 7)) == 0.0
    assert th.optimal_p(th.SubspaceSplit(0.3, 0.3, 5, 5)) == pytest.approx(0.5)
    assert th.optimal_p(th.SubspaceSplit(0.985, 0.015, 5, 45)) == pytest.approx(0.7577121, abs=1e-7)
    with pytest.raises(ValueError):
        th.optimal_p(th.SubspaceSplit(0.0, 0.0, 1, 1))


def test_optimal_p_is_grid_argmin():
    rng = np.random.default_rng(0)
    grid = np.arange(1, 1000) / 1000.0
    for _ in range(50):
        sp = th.SubspaceSplit(rng.exponential(), rng.exponential(), int(rng.integers(1, 50)),
                              int(rng.integers(1, 50)))
        assert abs(grid[np.argmin(th.gamma_variance(sp, grid))] - th.optimal_p(sp)) <= 1e-3


def test_clamped_optimal_p():
    assert th.clamped_optimal_p(th.SubspaceSplit(1.0, 0.0, 3, 7), 0.1) == 0.9
    assert th.clamped_optimal_p(th.SubspaceSplit(0.3, 0.3, 5, 5), 0.1) == pytest.approx(0.5)


def test_optimal_variance_examples():
    sp = th.SubspaceSplit(2.0, 0.0, 6, 10)
    assert th.optimal_variance(sp) == pytest.approx(2.0 * 7)
    assert th.optimal_variance(th.SubspaceSplit(0.5, 0.5, 3, 3)) == pytest.approx(2 * 5 - 1)
    assert th.optimal_variance(sp) < th.baseline_variance(sp)


@given(splits)
def test_optimal_variance_is_gamma_at_optimum(sp):
    assert th.optimal_variance(sp) == pytest.approx(th.gamma_variance(sp, th.optimal_p(sp)), rel=1e-10)


@given(splits)
def test_gap_equals_slack(sp):
    scale = th.baseline_variance(sp)
    assert abs(th.variance_gap(sp) - th.variance_slack(sp)) <= 1e-9 * scale


@given(splits)
def test_dominance_holds_when_active_subspace_is_informative(sp):
    # weights per direction: active at least 4x richer than the complement
    if sp.s_active / (sp.d_active + 2) >= 4 * sp.s_perp / (sp.d_perp + 2) and sp.d_perp >= 2:
        assert th.optimal_variance(sp) <= th.baseline_variance(sp)


def test_balanced_split_is_not_dominated():
    sp = th.SubspaceSplit(0.5, 0.5, 10, 10)
    assert th.optimal_variance(sp) == pytest.approx(23.0)
    assert th.baseline_variance(sp) == 21.0
    assert th.variance_slack(sp) == pytest.approx(-2.0)


def test_baseline_variance():
    assert th.baseline_variance(th.SubspaceSplit(0.4, 0.6, 1, 2)) == pytest.approx(4.0)
    a = th.SubspaceSplit(0.4, 0.6, 5, 7)
    b = th.SubspaceSplit(0.8, 1.2, 5, 7)
    assert th.baseline_variance(b) == pytest.approx(2 * th.baseline_variance(a))


def test_split_from_gradient_pythagoras():
    q, _ = np.linalg.qr(np.random.default_rng(1).standard_normal((8, 8)))
    g = np.arange(8.0)
    sp = th.SubspaceSplit.from_gradient(g, q[:, :3], q[:, 3:])
    assert sp.grad_norm_sq == pytest.approx(g @ g)
    assert sp.dim == 8


def test_sigma_bound():
    c = th.TheoryConstants(lipschitz=1.0, tau=1.0, precision=1e-2)
    assert th.sigma_bound(c, 10, 0.5) == pytest.approx(6.3887656e-05, rel=1e-6)
    assert th.sigma_bound(th.TheoryConstants(1.0, 0.0, 1e-2), 10, 0.5) == th.UNBOUNDED
    assert c.sigma_max(20, 0.5) < c.sigma_max(10, 0.5)
    # L below one is floored
    assert th.sigma_bound(th.TheoryConstants(0.1, 1.0, 1e-2), 10, 0.5) == th.sigma_bound(c, 10, 0.5)


def test_ratio_bracket():
    lo, hi = th.ratio_bracket(4.0, 1.0, 0.2, 0.0, 1.0)
    assert lo == pytest.approx(math.sqrt(3.2 / 1.2)) and lo == pytest.approx(1.633, abs=1e-3)
    assert hi == pytest.approx(math.sqrt(6.0)) and hi == pytest.approx(2.449, abs=1e-3)
    lo, hi = th.ratio_bracket(4.0, 1.0, 1e-9, 0.0, 1.0)
    assert lo == pytest.approx(2.0) and hi == pytest.approx(2.0)
    assert th.ratio_bracket(0.1, 1.0, 0.5, 0.1, 0.2) is th.BRACKET_UNDEFINED


def test_ratio_bracket_contains_true_ratio():
    rng = np.random.default_rng(2)
    for _ in range(100):
        sa, sp = rng.exponential(size=2) + 1e-3
        u = rng.uniform(0.01, 0.9)
        delta = rng.uniform(0.1, 0.9)
        eps = rng.uniform(0, 0.1) * delta
        b = th.ratio_bracket(sa, sp, u, eps, delta)
        if b is not None:
            assert b[0] <= math.sqrt(sa / sp) <= b[1]


def test_mc_variance_constant_and_gaussian():
    res = th.mc_variance(lambda rng: np.array([1.0, 2.0]), 10_000)
    assert res.variance == pytest.approx(0.0, abs=1e-9)
    assert res.mean == pytest.approx([1.0, 2.0])
    mean, var = th.mc_variance(None, 50_000, np.random.default_rng(3),
                               batch=lambda rng, n: rng.standard_normal((n, 6)))
    assert abs(var - 6.0) <= 3 * th.mc_variance(None, 50_000, np.random.default_rng(3),
                                                batch=lambda rng, n: rng.standard_normal((n, 6))).stderr
    with pytest.raises(ValueError):
        th.mc_variance(lambda rng: np.zeros(1), 100)


def test_mc_variance_is_deterministic():
    batch = lambda rng, n: rng.standard_normal((n, 3))
    a = th.mc_variance(None, 20_000, np.random.default_rng(4), batch=batch)
    b = th.mc_variance(None, 20_000, np.random.default_rng(4), batch=batch)
    assert a.variance == b.variance


def test_true_ratio():
    assert th.true_ratio(th.SubspaceSplit(4.0, 1.0, 2, 2)) == 2.0
    assert th.true_ratio(th.SubspaceSplit(4.0, 0.0, 2, 2)) == math.inf
