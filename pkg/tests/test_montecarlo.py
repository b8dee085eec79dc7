import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from epps_pulley.cumulants import kappa1_closed
from epps_pulley.errors import ContractViolation, DegenerateSample
from epps_pulley.montecarlo import (
    WORKERS_ENV,
    SimConfig,
    critical_values,
    nearest_rank,
    simulate,
    standard_normals,
    statistic,
    statistic_batch,
    worker_count,
)


def naive_statistic(x, beta):
    x = np.asarray(x, dtype=float)
    n = x.size
    y = (x - x.mean()) / x.std()
    b2 = beta * beta
    double = sum(math.exp(-b2 * (a - b) ** 2 / 2) for a in y for b in y) / n
    single = sum(math.exp(-b2 * a * a / (2 * (1 + b2))) for a in y)
    return double - 2 / math.sqrt(1 + b2) * single + n / math.sqrt(1 + 2 * b2)


samples = st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=3, max_size=30).filter(
    lambda v: np.std(v) > 1e-6 * max(1.0, np.max(np.abs(v)))
)


class TestStatistic:
    @pytest.mark.parametrize("beta", [0.25, 1.0, 3.0])
    def test_two_points_constant(self, beta):
        b2 = beta * beta
        expected = 1 + math.exp(-2 * b2) - 4 / math.sqrt(1 + b2) * math.exp(-b2 / (2 * (1 + b2))) + 2 / math.sqrt(1 + 2 * b2)
        assert statistic([3.0, -7.5], beta) == pytest.approx(expected, rel=1e-13)

    @settings(max_examples=50, deadline=None)
    @given(samples, st.sampled_from([0.5, 1.0, 2.0]))
    def test_matches_naive(self, x, beta):
        assert statistic(x, beta) == pytest.approx(naive_statistic(x, beta), rel=1e-10, abs=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(samples, st.floats(0.1, 10), st.floats(-100, 100), st.booleans())
    def test_affine_invariant(self, x, a, b, flip):
        a = -a if flip else a
        moved = [a * v + b for v in x]
        assert statistic(moved, 1.0) == pytest.approx(statistic(x, 1.0), rel=1e-8, abs=1e-10)

    @pytest.mark.parametrize("beta", [0.25, 1.0, 3.0])
    def test_nonnegative(self, beta, rng):
        x = rng.standard_normal((1000, 15)) * rng.exponential(size=(1000, 1))
        assert np.all(statistic_batch(x, beta) >= -1e-12)

    def test_affine_batch(self, rng):
        x = rng.standard_normal((1000, 12))
        moved = rng.uniform(0.1, 5, (1000, 1)) * x + rng.uniform(-5, 5, (1000, 1))
        np.testing.assert_allclose(statistic_batch(moved, 1.0), statistic_batch(x, 1.0), rtol=1e-10)

    def test_degenerate(self):
        with pytest.raises(DegenerateSample):
            statistic([2.0, 2.0, 2.0], 1.0)

    @pytest.mark.parametrize("bad", [[1.0], [], [[1.0, 2.0]]])
    def test_shape(self, bad):
        with pytest.raises(ContractViolation):
            statistic(bad, 1.0)


class TestGenerator:
    def test_normality(self):
        z = standard_normals(np.random.Philox(key=[5, 0]), 20001)
        assert z.size == 20001
        assert stats.kstest(z, "norm").pvalue > 1e-3
        assert abs(z.mean()) < 0.05 and abs(z.var() - 1) < 0.05

    def test_reproducible(self):
        a = standard_normals(np.random.Philox(key=[9, 3]), 100)
        b = standard_normals(np.random.Philox(key=[9, 3]), 100)
        assert np.array_equal(a, b)


class TestConfig:
    @pytest.mark.parametrize(
        "kwargs",
        [dict(n=1), dict(reps=0), dict(alphas=(0.0,)), dict(alphas=(1.2,)), dict(alphas=()), dict(n=2.5)],
    )
    def test_invalid(self, kwargs):
        base = dict(n=10, beta=1.0, reps=10, seed=1)
        base.update(kwargs)
        with pytest.raises(ContractViolation):
            SimConfig(**base)

    def test_alphas_sorted_descending(self):
        assert SimConfig(10, 1.0, alphas=(0.01, 0.1, 0.05)).alphas == (0.1, 0.05, 0.01)

    def test_workers_env(self, monkeypatch):
        monkeypatch.setenv(WORKERS_ENV, "3")
        assert worker_count() == 3
        monkeypatch.setenv(WORKERS_ENV, "zero")
        with pytest.raises(ContractViolation):
            worker_count()


class TestCriticalValues:
    def test_single_rep(self):
        cfg = SimConfig(8, 1.0, reps=1, seed=4)
        only = simulate(cfg)
        assert only.size == 1
        assert set(critical_values(cfg).values()) == {float(only[0])}

    def test_nearest_rank(self):
        v = np.arange(10.0)[::-1]
        assert nearest_rank(v, 0.1) == 8.0
        assert nearest_rank(v, 0.5) == 4.0
        assert nearest_rank(np.arange(100000.0), 0.1) == 89999.0

    def test_deterministic_across_workers(self):
        cfg = SimConfig(15, 1.0, reps=5000, seed=99)
        one = simulate(cfg, workers=1)
        many = simulate(cfg, workers=3)
        assert np.array_equal(one, many)
        assert np.array_equal(one, simulate(cfg, workers=1))

    def test_seed_matters(self):
        a = simulate(SimConfig(10, 1.0, reps=100, seed=1))
        b = simulate(SimConfig(10, 1.0, reps=100, seed=2))
        assert not np.array_equal(a, b)

    def test_monotone_in_alpha(self):
        cv = critical_values(SimConfig(20, 1.0, reps=4000, seed=3))
        assert cv[0.01] >= cv[0.05] >= cv[0.1]

    def test_small_beta_n10(self):
        cv = critical_values(SimConfig(10, 0.25, reps=100_000, seed=2024))
        assert cv[0.1] == pytest.approx(7.28e-4, abs=5e-5)

    def test_mean_approaches_limit(self):
        t = simulate(SimConfig(200, 1.0, reps=10_000, seed=17))
        se = t.std(ddof=1) / math.sqrt(t.size)
        assert abs(t.mean() - kappa1_closed(1.0)) < 3 * se
