import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ennlab.core import Dataset, EnnParams, SieveSpec, empirical_risk, in_sieve, predict
from ennlab.exceptions import NumericalFailure
from ennlab.train import (TrainConfig, empirical_norm, expectile_oracle, fit, fit_constant)

TAUS = [0.1, 0.25, 0.5, 0.75, 0.9]
TRUTH = EnnParams(0.5, [1.5, -1.0], [[6.0], [-4.0]], [-3.0, 2.0])


def brute_force_expectile(y, tau, grid=2001):
    """Minimize the asymmetric risk on a grid, then refine by golden section."""
    y = np.asarray(y, float)

    def risk(m):
        r = y - m
        return np.sum(np.where(r >= 0, tau, 1 - tau) * r**2)

    ms = np.linspace(y.min(), y.max(), grid)
    i = int(np.argmin([risk(m) for m in ms]))
    lo, hi = ms[max(i - 1, 0)], ms[min(i + 1, grid - 1)]
    g = (np.sqrt(5) - 1) / 2
    for _ in range(200):
        a, b = hi - g * (hi - lo), lo + g * (hi - lo)
        if risk(a) < risk(b):
            hi = b
        else:
            lo = a
    return 0.5 * (lo + hi)


class TestConstantExpectile:
    def test_examples(self):
        assert fit_constant([1, 2, 3], 0.5) == pytest.approx(2.0, abs=1e-12)
        assert fit_constant([0, 1], 0.9) == pytest.approx(0.9, abs=1e-12)
        assert expectile_oracle([0, 1], 0.9) == pytest.approx(0.9, abs=1e-11)
        assert expectile_oracle([-1, 1], 0.5) == pytest.approx(0.0, abs=1e-12)
        for tau in TAUS:
            assert fit_constant([2.5] * 7, tau) == 2.5
            assert expectile_oracle([2.5] * 7, tau) == 2.5

    def test_empty(self):
        with pytest.raises(ValueError):
            fit_constant([], 0.5)
        with pytest.raises(ValueError):
            expectile_oracle([], 0.5)

    def test_matches_grid_search(self):
        rng = np.random.default_rng(0)
        y = rng.exponential(size=40)
        for tau in TAUS:
            ref = brute_force_expectile(y, tau)
            assert fit_constant(y, tau) == pytest.approx(ref, abs=1e-7)

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=200), st.sampled_from(TAUS))
    def test_two_methods_agree(self, y, tau):
        assert abs(fit_constant(y, tau) - expectile_oracle(y, tau)) <= 1e-10

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=100))
    def test_monotone_in_tau(self, y):
        vals = [expectile_oracle(y, t) for t in TAUS]
        assert all(b >= a - 1e-10 for a, b in zip(vals, vals[1:]))

    def test_half_is_mean(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            y = rng.normal(size=int(rng.integers(1, 100)))
            assert abs(fit_constant(y, 0.5) - y.mean()) <= 1e-10


class TestFit:
    def test_noiseless_recovery(self):
        rng = np.random.default_rng(2)
        x = rng.uniform(size=(300, 1))
        data = Dataset(x, predict(TRUTH, x))
        model = fit(data, 0.5, SieveSpec(3, 6.0, 20.0, 1), TrainConfig(max_iters=2000, restarts=2))
        assert model.risk < 1e-4
        assert in_sieve(model.params, SieveSpec(3, 6.0, 20.0, 1))

    def test_frozen_hidden_units_give_expectile(self):
        rng = np.random.default_rng(3)
        data = Dataset(rng.uniform(size=(80, 2)), rng.normal(1.0, 2.0, 80))
        sieve = SieveSpec(2, 4.0, 1e-12, 2)
        for tau in [0.2, 0.5, 0.9]:
            model = fit(data, tau, sieve, TrainConfig(max_iters=3000, restarts=1, grad_tol=1e-9))
            fitted = predict(model.params, data.x)
            assert np.ptp(fitted) < 1e-9
            assert fitted[0] == pytest.approx(expectile_oracle(data.y, tau), abs=1e-4)

    def test_more_restarts_never_worse(self):
        rng = np.random.default_rng(4)
        x = rng.uniform(size=(100, 1))
        data = Dataset(x, np.sin(6 * x[:, 0]) + rng.normal(0, 0.1, 100))
        sieve = SieveSpec(3, 6.0, 15.0, 1)
        one = fit(data, 0.7, sieve, TrainConfig(max_iters=200, restarts=1, seed=5))
        five = fit(data, 0.7, sieve, TrainConfig(max_iters=200, restarts=5, seed=5))
        assert five.risk <= one.risk

    def test_every_iterate_feasible_and_risk_nonincreasing(self):
        rng = np.random.default_rng(6)
        data = Dataset(rng.uniform(size=(60, 2)), rng.normal(size=60))
        sieve = SieveSpec(3, 4.5, 3.0, 2)
        seen = {}

        def record(restart, it, params, risk):
            assert in_sieve(params, sieve)
            assert risk == pytest.approx(empirical_risk(0.3, params, data), abs=1e-12)
            seen.setdefault(restart, []).append(risk)

        fit(data, 0.3, sieve, TrainConfig(max_iters=150, restarts=2), callback=record)
        assert set(seen) == {0, 1}
        for risks in seen.values():
            assert all(b <= a for a, b in zip(risks, risks[1:]))

    def test_result_contract(self):
        rng = np.random.default_rng(7)
        data = Dataset(rng.uniform(size=(40, 1)), rng.normal(size=40))
        sieve = SieveSpec(2, 5.0, 4.0, 1)
        model = fit(data, 0.6, sieve, TrainConfig(max_iters=100, restarts=3))
        assert in_sieve(model.params, sieve)
        assert abs(model.risk - empirical_risk(0.6, model.params, data)) <= 1e-12
        assert 0 <= model.restart_index < 3

    def test_deterministic(self):
        rng = np.random.default_rng(8)
        data = Dataset(rng.uniform(size=(50, 2)), rng.normal(size=50))
        sieve = SieveSpec(3, 5.0, 6.0, 2)
        cfg = TrainConfig(max_iters=80, restarts=3, seed=42)
        a, b = fit(data, 0.8, sieve, cfg), fit(data, 0.8, sieve, cfg)
        assert a.params == b.params and a.risk == b.risk and a.iterations == b.iterations

    def test_convergence_flag(self):
        data = Dataset(np.zeros((5, 1)), np.ones(5))
        model = fit(data, 0.5, SieveSpec(1, 4.0, 1.0, 1),
                    TrainConfig(max_iters=5000, restarts=1, grad_tol=1e-8))
        assert model.converged
        assert predict(model.params, data.x) == pytest.approx(np.ones(5), abs=1e-6)

    def test_errors(self):
        sieve = SieveSpec(1, 4.0, 1.0, 1)
        with pytest.raises(ValueError):
            fit(Dataset(np.zeros((0, 1)), np.zeros(0)), 0.5, sieve, TrainConfig())
        with pytest.raises(ValueError):
            fit(Dataset(np.zeros((3, 2)), np.zeros(3)), 0.5, sieve, TrainConfig())
        with pytest.raises(ValueError):
            TrainConfig(step_size=0)
        with pytest.raises(ValueError):
            TrainConfig(restarts=0)

    def test_numerical_failure_names_restart(self):
        data = Dataset(np.zeros((3, 1)), np.array([1e200, -1e200, 1e200]))
        with pytest.raises(NumericalFailure, match="restart 0"):
            fit(data, 0.5, SieveSpec(1, 4.0, 1.0, 1), TrainConfig(restarts=2))


class TestEmpiricalNorm:
    def test_examples(self):
        x = np.array([[0.1], [0.7]])
        f0 = lambda z: predict(TRUTH, z)
        assert empirical_norm(TRUTH, f0, x) == 0.0
        assert empirical_norm(lambda z: f0(z) + 2.5, f0, x) == pytest.approx(2.5)
        diffs = {0.1: 3.0, 0.7: 4.0}
        g = lambda z: np.array([diffs[v] for v in z[:, 0]])
        assert empirical_norm(g, lambda z: np.zeros(len(z)), x) == pytest.approx(np.sqrt(12.5))

    def test_empty(self):
        with pytest.raises(ValueError):
            empirical_norm(TRUTH, lambda z: z[:, 0], np.zeros((0, 1)))
