import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from asebo.functions import BenchmarkFunction, counting_wrapper, initial_point, make_function
from asebo.optimizer import (CSV_COLUMNS, AdamConfig, AdamState, AseboConfig, BanditExplorer,
                             CompressedSensingExplorer, adam_step, asebo_optimize, explorer_from_dict,
                             vanilla_es)


def small_cfg(**kw):
    base = dict(warmup_iters=3, total_iters=40, seed=7)
    base.update(kw)
    return AseboConfig(**base)


# --- Adam -------------------------------------------------------------------


@given(arrays(float, 6, elements=st.floats(-1e3, 1e3).filter(lambda x: abs(x) > 1e-3)))
def test_adam_first_step_is_signed_eta(g):
    _, step = adam_step(AdamState.zeros(6), g, 0.02)
    assert np.allclose(step, 0.02 * np.sign(g), rtol=1e-4)


def test_adam_zero_gradient_never_moves():
    state = AdamState.zeros(3)
    for _ in range(10):
        state, step = adam_step(state, np.zeros(3), 0.1)
        assert np.array_equal(step, np.zeros(3))


def test_adam_without_momentum_is_sign_descent():
    cfg = AdamConfig(beta1=0.0, beta2=0.0)
    state = AdamState.zeros(3)
    g = np.array([3.0, -0.5, 2.0])
    for _ in range(2):
        state, step = adam_step(state, g, 0.1, cfg)
        assert step == pytest.approx(0.1 * np.sign(g), rel=1e-7)
    assert state.t == 2


def test_adam_second_step_frozen():
    cfg = AdamConfig()
    s, _ = adam_step(AdamState.zeros(1), np.array([1.0]), 1.0, cfg)
    s, step = adam_step(s, np.array([3.0]), 1.0, cfg)
    m = (0.9 * 0.1 + 0.1 * 3.0) / (1 - 0.81)
    v = (0.999 * 0.001 + 0.001 * 9.0) / (1 - 0.999**2)
    assert step[0] == pytest.approx(m / (np.sqrt(v) + 1e-8), rel=1e-12)


def test_adam_dimension_mismatch():
    with pytest.raises(ValueError):
        adam_step(AdamState.zeros(3), np.zeros(2), 0.1)


# --- ASEBO ------------------------------------------------------------------


def test_single_warmup_iteration():
    f = counting_wrapper(make_function("sphere", 8))
    _, rec = asebo_optimize(f, np.ones(8), AseboConfig(warmup_iters=1, total_iters=1))
    assert len(rec.rows) == 1
    row = rec.rows[0]
    assert row.queries == 16 == f.count
    assert row.n_t == 8 and row.isotropic and row.p_t is None and row.active_dim is None


@pytest.mark.parametrize("explorer", [BanditExplorer(), CompressedSensingExplorer(),
                                      BanditExplorer(alpha_rule="fixed")])
def test_query_accounting_is_exact(explorer):
    d = 20
    f = counting_wrapper(make_function("rosenbrock", d))
    cfg = small_cfg(explorer=explorer)
    _, rec = asebo_optimize(f, initial_point(d, 3.0, 1), cfg)
    expected = 0
    for r in rec.rows:
        expected += 2 * r.n_t + (explorer.queries() if not r.isotropic and r.active_dim < d else 0)
        assert r.queries == expected
        assert r.explorer_queries == (explorer.queries() if not r.isotropic and r.active_dim < d else 0)
    assert rec.queries == f.count


def test_telemetry_invariants():
    d = 30
    _, rec = asebo_optimize(make_function("sphere", d), initial_point(d), small_cfg())
    q = [r.queries for r in rec.rows]
    assert all(a < b for a, b in zip(q, q[1:]))
    for r in rec.rows:
        if r.iteration < 3:
            assert r.n_t == d and r.isotropic
        else:
            assert r.n_t == r.active_dim
            assert 0.1 <= r.p_t <= 0.9
            assert r.captured_fraction >= 0.995 * (1 - 1e-9)
    best = [r.best_value for r in rec.rows]
    assert all(b <= a for a, b in zip(best, best[1:]))


def test_determinism():
    d = 25
    f = make_function("rastrigin", d)
    a = asebo_optimize(f, initial_point(d), small_cfg())
    b = asebo_optimize(f, initial_point(d), small_cfg())
    assert np.array_equal(a[0], b[0])
    assert a[1].rows == b[1].rows
    c = asebo_optimize(f, initial_point(d), small_cfg(seed=8))
    assert not np.array_equal(a[0], c[0])


def test_maximize_mirrors_minimize():
    d = 15
    f = make_function("sphere", d)
    neg = BenchmarkFunction("neg", d, lambda x: -f.fn(x))
    a, ra = vanilla_es(f, initial_point(d), 0.01, 0.02, d, 30, mode="min")
    b, rb = vanilla_es(neg, initial_point(d), 0.01, 0.02, d, 30, mode="max")
    assert np.array_equal(a, b)
    assert [r.best_value for r in ra.rows] == [-r.best_value for r in rb.rows]
    # ASEBO flips eigenvector signs under negation, so only the progress is compared
    _, rec = asebo_optimize(neg, initial_point(d), small_cfg(total_iters=200), mode="max")
    best = [r.best_value for r in rec.rows]
    assert all(b >= a for a, b in zip(best, best[1:]))
    assert best[-1] > 0.5 * -100.0


def test_budget_stops_after_crossing_iteration():
    d = 10
    _, rec = asebo_optimize(make_function("sphere", d), initial_point(d), small_cfg(total_iters=10_000), budget=500)
    assert rec.queries >= 500
    assert rec.overshoot == rec.queries - 500
    assert rec.rows[-2].queries < 500


def test_empty_spectrum_falls_back_to_isotropic():
    d = 6
    flat = BenchmarkFunction("flat", d, lambda x: np.zeros(x.shape[:-1]))
    _, rec = asebo_optimize(flat, np.zeros(d), small_cfg(total_iters=8))
    assert all(r.isotropic and r.n_t == d for r in rec.rows)


def test_nonfinite_objective_aborts():
    d = 4
    f = BenchmarkFunction("blowup", d, lambda x: np.where(np.sum(x, axis=-1) > 4.05, np.inf, 0.0))
    with pytest.raises(FloatingPointError):
        asebo_optimize(f, np.ones(d), small_cfg())


def test_config_validation_and_round_trip():
    for bad in (dict(warmup_iters=0), dict(warmup_iters=5, total_iters=4), dict(sigma=0.0),
                dict(pca_threshold=1.5), dict(decay=1.0), dict(min_active_dim=0)):
        with pytest.raises(ValueError):
            AseboConfig(**bad)
    cfg = AseboConfig(explorer=CompressedSensingExplorer(horizon=7), sampler_variant="v0")
    assert AseboConfig.from_dict(cfg.to_dict()) == cfg
    assert explorer_from_dict({"kind": "bandit", "alpha": 0.5}) == BanditExplorer(alpha=0.5)
    with pytest.raises(ValueError):
        explorer_from_dict({"kind": "annealing"})
    with pytest.raises(ValueError):
        BanditExplorer(alpha_rule="adaptive")


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        asebo_optimize(make_function("sphere", 5), np.zeros(4), small_cfg())
    with pytest.raises(ValueError):
        asebo_optimize(make_function("sphere", 5), np.zeros(5), small_cfg(), budget=0)


def test_csv_schema(tmp_path):
    d = 10
    _, rec = asebo_optimize(make_function("sphere", d), initial_point(d), small_cfg(total_iters=6))
    path = tmp_path / "run.csv"
    rec.write_csv(path)
    lines = path.read_text(encoding="utf-8").split("\n")
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert lines[-1] == ""
    first = lines[1].split(",")
    assert first[:2] == ["0", "20"] and first[3] == "" and first[5] == ""
    assert float(lines[-2].split(",")[1]) == rec.queries


# --- vanilla ES -------------------------------------------------------------


def test_vanilla_query_count():
    f = counting_wrapper(make_function("sphere", 12))
    _, rec = vanilla_es(f, np.ones(12), 0.01, 0.02, 5, 7)
    assert [r.queries for r in rec.rows] == [10 * (i + 1) for i in range(7)]
    assert f.count == 70


def test_vanilla_descends_on_sphere():
    d = 20
    _, rec = vanilla_es(make_function("sphere", d), initial_point(d, 5.0), 0.01, 0.05, d, 200, seed=1)
    assert rec.best_value < 0.1 * 25.0


def test_vanilla_gradient_estimate_points_along_gradient():
    # averaged over 5 seeds the k = d estimate is well aligned with c
    d = 50
    c = np.random.default_rng(0).standard_normal(d)
    f = make_function("linear", d, c=c)
    norms = []
    for seed in range(5):
        _, rec = vanilla_es(f, np.zeros(d), 1e-4, 0.02, d, 1, seed=seed)
        norms.append(rec.rows[0].grad_norm)
    # E||g_hat||^2 = ||c||^2 + (d + 1) ||c||^2 / k
    assert np.mean(np.square(norms)) == pytest.approx((1 + (d + 1) / d) * (c @ c), rel=0.35)
