import numpy as np
import pytest

from eqex.metrics import (GeiConfig, equitability_step_reward, ge_decomposed,
                          ge_index, ge_weighted, mean_is_degenerate,
                          weights_from_beta)


class TestGeIndex:
    def test_perfect_equity(self):
        assert ge_index([5, 5, 5]) == 0.0

    def test_two_point_value(self):
        # (1/4)((0.5^2 - 1) + (1.5^2 - 1)) = 0.125
        assert ge_index([1, 3]) == pytest.approx(0.125, abs=1e-15)

    def test_three_point_value(self):
        assert ge_index([1, 3, 4]) == pytest.approx(0.109375, abs=1e-15)

    def test_nonnegative_kappa2(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            y = rng.uniform(-100, 100, size=rng.integers(1, 20))
            if mean_is_degenerate(y):
                continue
            assert ge_index(y) >= 0

    def test_scale_invariance(self):
        y = [1.0, 3.0, 4.0]
        for c in (2.0, -1.0, 0.001, -250.0):
            assert ge_index(np.asarray(y) * c) == pytest.approx(ge_index(y))

    def test_translation_sensitivity(self):
        # documented non-property: shifting outcomes changes the index
        assert ge_index([1, 3]) != pytest.approx(ge_index([2, 4]))

    def test_mu_guard(self):
        assert ge_index([1, -1]) == 0.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            ge_index([])


class TestDecomposition:
    def test_single_group_collapse(self):
        y = [1.0, 3.0, 4.0]
        within, between = ge_decomposed(y, [0, 0, 0])
        assert within == pytest.approx(ge_index(y))
        assert between == pytest.approx(0.0, abs=1e-15)

    def test_worked_example(self):
        # groups: MM = {4}, consumer = {1, 3}
        within, between = ge_decomposed([1, 3, 4], [1, 1, 0])
        assert within == pytest.approx(0.046875, abs=1e-12)
        assert between == pytest.approx(0.0625, abs=1e-12)
        assert within + between == pytest.approx(0.109375, abs=1e-12)

    def test_equal_means_equal_outcomes(self):
        within, between = ge_decomposed([2, 2, 2, 2], [0, 0, 1, 1])
        assert within == 0.0 and between == 0.0

    def test_identity_random(self):
        rng = np.random.default_rng(42)
        checked = 0
        while checked < 1000:
            n = int(rng.integers(2, 51))
            y = rng.uniform(-100, 100, size=n)
            if mean_is_degenerate(y, 1e-3):
                continue
            groups = rng.integers(0, 3, size=n)
            skip = False
            for g in np.unique(groups):
                if mean_is_degenerate(y[groups == g], 1e-3):
                    skip = True
            if skip:
                continue
            total = ge_index(y)
            within, between = ge_decomposed(y, groups)
            assert abs(total - (within + between)) <= 1e-9 * max(1.0, abs(total))
            checked += 1


class TestWeighted:
    def test_unit_weights_reproduce_index(self):
        # all weight coefficients 1 restates the decomposition identity
        rng = np.random.default_rng(3)
        y = rng.uniform(1, 50, size=12)
        groups = rng.integers(0, 3, size=12)
        value = ge_weighted(y, groups, weights=(1.0, 1.0, 1.0))
        assert value == pytest.approx(ge_index(y))

    def test_single_mm_between_term_only(self):
        # w = [1,0,0]; GE_2 of a single-member MM group is 0, so only the
        # MM between-term survives
        y = np.array([4.0, 1.0, 3.0])
        groups = np.array([0, 1, 1])
        value = ge_weighted(y, groups, weights=(1.0, 0.0, 0.0))
        mu, mug = y.mean(), 4.0
        expected = (1 / (3 * 2)) * ((mug / mu) ** 2 - 1)
        assert value == pytest.approx(expected)

    def test_consumer_group_at_population_mean(self):
        # consumers equal each other and the population mean: zero inequity
        y = [2.0, 2.0, 2.0, 2.0]
        groups = [0, 0, 1, 1]
        assert ge_weighted(y, groups, weights=(0.0, 1.0, 0.0)) == 0.0

    def test_weight_degeneracy(self):
        # concentrating weight on one group ignores the internal dispersion
        # of the others while their means and sizes stay fixed
        y1 = np.array([4.0, 1.0, 3.0, 10.0, 10.0])
        y2 = np.array([4.0, 1.0, 3.0, 5.0, 15.0])   # same group mean, more spread
        groups = np.array([0, 1, 1, 2, 2])
        w = (0.0, 1.0, 0.0)
        assert ge_weighted(y1, groups, w) == pytest.approx(ge_weighted(y2, groups, w))


class TestStepReward:
    def cfg(self, beta=0.3):
        return GeiConfig(weights=weights_from_beta(beta))

    def test_no_change(self):
        y = [1.0, 2.0, 3.0]
        groups = [0, 1, 2]
        assert equitability_step_reward(y, y, groups, self.cfg()) == 0.0

    def test_base_case(self):
        y = [1.0, 2.0, 3.0]
        groups = [0, 1, 2]
        cfg = self.cfg()
        expected = -ge_weighted(y, groups, cfg.weights)
        assert equitability_step_reward(y, None, groups, cfg) == pytest.approx(expected)

    def test_telescoping(self):
        rng = np.random.default_rng(9)
        groups = rng.integers(0, 3, size=20)
        cfg = self.cfg(beta=0.6)
        path = np.cumsum(rng.uniform(-5, 5, size=(5, 20)), axis=0) + 50
        total = 0.0
        prev = None
        for y in path:
            total += equitability_step_reward(y, prev, groups, cfg)
            prev = y
        final = -ge_weighted(path[-1], groups, cfg.weights)
        assert total == pytest.approx(final, abs=1e-12)


class TestConfig:
    def test_kappa_must_be_even(self):
        with pytest.raises(ValueError):
            GeiConfig(kappa=3)

    def test_weights_simplex(self):
        with pytest.raises(ValueError):
            GeiConfig(weights=(0.5, 0.2, 0.1))

    def test_beta_range(self):
        with pytest.raises(ValueError):
            weights_from_beta(1.5)
        assert weights_from_beta(0.3) == pytest.approx((0.3, 0.7, 0.0))
