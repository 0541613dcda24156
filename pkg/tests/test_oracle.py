import numpy as np
import pytest

from idsbandit.ids import compute_quantities
from idsbandit.oracle import mc_alpha, mc_information_gain, mc_M, random_states
from idsbandit.posterior import BetaPosterior
from idsbandit.special import Grid


class TestMcAlpha:
    @pytest.mark.parametrize("k", [2, 4])
    def test_identical(self, k):
        a = mc_alpha(BetaPosterior.uniform(k), 1_000_000, np.random.default_rng(0))
        np.testing.assert_allclose(a, 1.0 / k, atol=3e-3)

    def test_analytic(self):
        a = mc_alpha(BetaPosterior((1.0, 2.0), (1.0, 1.0)), 1_000_000, np.random.default_rng(1))
        np.testing.assert_allclose(a, [1 / 3, 2 / 3], atol=3e-3)

    def test_extreme_separation(self):
        a = mc_alpha(BetaPosterior((500.0, 1.0), (1.0, 500.0)), 1_000_000, np.random.default_rng(2))
        np.testing.assert_allclose(a, [1.0, 0.0], atol=1e-3)

    def test_minimum_budget(self):
        with pytest.raises(ValueError):
            mc_alpha(BetaPosterior.uniform(2), 9_999, np.random.default_rng(0))

    def test_seeded(self):
        s = BetaPosterior((2.0, 3.0, 1.0), (5.0, 1.0, 1.0))
        a = mc_alpha(s, 50_000, np.random.default_rng(7))
        b = mc_alpha(s, 50_000, np.random.default_rng(7))
        np.testing.assert_array_equal(a, b)


class TestMcM:
    def test_order_statistics(self):
        res = mc_M(BetaPosterior.uniform(2), 1_000_000, np.random.default_rng(3))
        np.testing.assert_allclose(res.M, [[2 / 3, 1 / 3], [1 / 3, 2 / 3]], atol=5e-3)
        assert res.insufficient == ()

    def test_diagonal_dominates(self):
        for s in random_states(np.random.default_rng(4), 6, (2, 3, 5)):
            res = mc_M(s, 200_000, np.random.default_rng(5))
            for i in range(s.n_arms):
                if i not in res.insufficient:
                    assert np.all(res.M[i, i] >= res.M[i])

    def test_reports_insufficient_rows(self):
        res = mc_M(BetaPosterior((500.0, 1.0), (1.0, 500.0)), 100_000, np.random.default_rng(6))
        assert res.insufficient == (1,)
        assert np.all(np.isnan(res.M[1]))
        assert res.hits[0] == 100_000

    def test_matches_quadrature(self):
        grid = Grid.uniform()
        rng = np.random.default_rng(8)
        for s in random_states(rng, 3, (3,)):
            res = mc_M(s, 1_000_000, rng)
            q = compute_quantities(s, grid)
            ok = np.isfinite(res.M)
            assert np.all(np.abs(res.M - q.M)[ok] <= 5e-3)


class TestMcInformationGain:
    def test_concentrated_arm_gains_nothing(self):
        s = BetaPosterior((10_000.0, 80.0, 5.0), (10_000.0, 20.0, 95.0))
        g = mc_information_gain(s, 0, 200_000, np.random.default_rng(9))
        assert abs(g) <= 2e-3

    def test_identical_uniform_arms(self):
        s = BetaPosterior.uniform(2)
        q = compute_quantities(s, Grid.uniform())
        for arm in (0, 1):
            g = mc_information_gain(s, arm, 1_000_000, np.random.default_rng(10 + arm))
            assert g == pytest.approx(q.gain[arm], abs=2e-2)
            assert g >= -2e-2

    def test_nonnegative_random_states(self):
        rng = np.random.default_rng(12)
        for s in random_states(rng, 4, (2, 3)):
            for arm in range(s.n_arms):
                assert mc_information_gain(s, arm, 100_000, rng) >= -2e-2


def test_random_states_cycle_arm_counts():
    states = random_states(np.random.default_rng(0), 7, (2, 3, 5), 1.0, 50.0)
    assert [s.n_arms for s in states] == [2, 3, 5, 2, 3, 5, 2]
    for s in states:
        assert all(1.0 <= v <= 50.0 for v in s.b1 + s.b2)
