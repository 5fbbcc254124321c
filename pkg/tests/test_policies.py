import math

import mpmath as mp
import numpy as np
import pytest
from numpy.testing import assert_allclose

from mortalbandits.core import ArmEstimate, RewardRange
from mortalbandits.errors import ConfigError, NotSPDError, UninitializedError
from mortalbandits.life import LifeModel
from mortalbandits.policies import (REFACTOR_EVERY, UCBL, AdaptiveGreedy, AdaptiveGreedyL, LinUCBL,
                                    LinUcblState, PolicyConfig, ag_explore_prob, agl_select,
                                    linucbl_select, long_life_set, make_policy, new_arm_init, psi,
                                    top_count, ucbl_index)


def est(mean, pulls=1):
    return ArmEstimate(pulls, mean * pulls)


class TestExploreProb:
    def test_unit_range(self):
        assert_allclose(ag_explore_prob({0: est(0.7), 1: est(0.2)}, [0, 1], RewardRange()), 0.3)

    def test_shifted_range(self):
        assert_allclose(ag_explore_prob({0: est(0.5)}, [0], RewardRange(-1, 1)), 0.25)

    def test_dead_arm_ignored(self):
        p = ag_explore_prob({0: est(0.9), 1: est(0.4)}, [1], RewardRange())
        assert_allclose(p, 0.6)

    def test_uninitialized(self):
        with pytest.raises(UninitializedError):
            ag_explore_prob({0: ArmEstimate()}, [0], RewardRange())


class TestLongLifeSet:
    def test_top_three_of_ten(self):
        rem = dict(zip(range(10), [10, 9, 8] + [1] * 7))
        assert long_life_set(range(10), rem, 0.3) == [0, 1, 2]
        assert top_count(0.3, 10) == 3

    def test_ties_kept(self):
        rem = {j: 5 for j in range(6)}
        assert long_life_set(range(6), rem, 0.3) == list(range(6))

    def test_q_one_is_everything(self):
        rem = {0: 1, 1: 100}
        assert long_life_set([0, 1], rem, 1.0) == [0, 1]

    def test_unknown_lives_disable_filter(self):
        assert long_life_set([0, 1, 2], {0: 3, 1: None, 2: 1}, 0.3) == [0, 1, 2]

    def test_at_least_one(self):
        assert long_life_set([4, 7], {4: 2, 7: 9}, 0.01) == [7]


class TestAdaptiveGreedy:
    def test_explore_frequency(self):
        rr = RewardRange()
        pol = AdaptiveGreedy(rr, np.random.default_rng(5))
        pol.est = {0: est(0.8), 1: est(0.3)}
        n = 100_000
        explored = 0
        for t in range(n):
            agl_select(pol, t, [0, 1])
            explored += pol.explored
        p = 0.2
        assert abs(explored / n - p) < 3 * math.sqrt(p * (1 - p) / n)

    def test_exploit_is_best_estimate(self):
        pol = AdaptiveGreedy(RewardRange(), np.random.default_rng(0))
        pol.est = {0: est(1.0), 1: est(0.4)}
        # p = 0, so the rule always exploits
        assert {pol.select(t, [0, 1]) for t in range(50)} == {0}

    def test_cold_start_explores(self):
        pol = AdaptiveGreedy(RewardRange(), np.random.default_rng(0))
        pol.select(1, [3, 4])
        assert pol.explored and pol.last_p == 1.0

    def test_agl_explores_long_lived_only(self):
        life = LifeModel("exact", deaths={j: d for j, d in enumerate([100, 90, 80] + [5] * 7)})
        pol = AdaptiveGreedyL(RewardRange(), np.random.default_rng(2), life, q=0.3)
        pol.est = {j: est(0.0) for j in range(10)}
        pool = list(range(10))
        pol.observe(1, pool)
        picks = {pol.select(1, pool) for _ in range(500)}
        assert picks == {0, 1, 2}

    def test_bad_quantile(self):
        with pytest.raises(ConfigError):
            AdaptiveGreedyL(RewardRange(), np.random.default_rng(0), LifeModel("exact", deaths={}), q=0.0)


class TestPsi:
    def test_at_death(self):
        assert psi(10, 10, 0.011) == (0.0, False)

    def test_e(self):
        value, flag = psi(1, math.e, 0.011)
        assert_allclose(value, 0.011)
        assert not flag

    def test_expired_estimate(self):
        assert psi(10, 6, 0.011) == (0.0, True)
        assert psi(3, None, 0.011) == (0.0, True)

    def test_decreasing_in_t(self):
        vals = [psi(t, 500, 0.011)[0] for t in range(1, 501)]
        assert np.all(np.diff(vals) < 0)


class TestUcblIndex:
    def test_worked_value(self):
        w = 0.011 * math.log(100)
        # t - s + 1 = 50
        got = ucbl_index(0.5, 4, 60, 11, w)
        assert_allclose(got, 0.5 + w * math.sqrt(2 * math.log(50) / 4), rtol=1e-12)
        mp.mp.dps = 40
        oracle = mp.mpf("0.5") + mp.mpf("0.011") * mp.log(100) * mp.sqrt(2 * mp.log(50) / 4)
        assert_allclose(got, float(oracle), rtol=1e-14)

    def test_birth_turn_is_finite(self):
        assert ucbl_index(0.3, 1, 7, 7, 0.5) == 0.3

    def test_no_pulls(self):
        with pytest.raises(UninitializedError):
            ucbl_index(0.3, 0, 7, 1, 0.5)

    def test_ucb1_identity(self):
        # birth 1: log(t - 1 + 1) = log t
        assert_allclose(ucbl_index(0.4, 3, 9, 1, 1.0), 0.4 + math.sqrt(2 * math.log(9) / 3))


class TestUCBL:
    def make(self, deaths, c=0.011):
        return UCBL(RewardRange(), LifeModel("exact", deaths=deaths, births={j: 1 for j in deaths}), c=c)

    def test_select_matches_index(self):
        rng = np.random.default_rng(8)
        deaths = {j: int(rng.integers(20, 200)) for j in range(6)}
        pol = self.make(deaths)
        pool = list(range(6))
        pol.observe(1, pool)
        for t in range(1, 15):
            pol.observe(t, pool)
            j = pol.select(t, pool)
            scores = [pol.index(i, t) for i in pool]
            assert pol.index(j, t) == max(scores)
            pol.update(t, j, float(rng.random()))

    def test_tie_goes_to_first_in_pool(self):
        pol = self.make({0: 50, 1: 50})
        pol.observe(1, [0, 1])
        assert pol.select(1, [0, 1]) == 0
        assert pol.select(1, [1, 0]) == 1

    def test_deterministic(self):
        def run():
            pol = self.make({0: 30, 1: 40, 2: 35})
            out = []
            for t in range(1, 30):
                pol.observe(t, [0, 1, 2])
                j = pol.select(t, [0, 1, 2])
                pol.update(t, j, 0.5 + 0.1 * j)
                out.append(j)
            return out
        assert run() == run()

    def test_argmax_invariant_to_positive_psi_scale(self):
        # with equal means the index order is set by the bonus, so scaling c keeps it
        a, b = self.make({0: 90, 1: 60, 2: 30}, c=0.011), self.make({0: 90, 1: 60, 2: 30}, c=0.5)
        for pol in (a, b):
            pol.observe(1, [0, 1, 2])
            for j in range(3):
                pol.update(1, j, 0.5)
        assert a.select(5, [0, 1, 2]) == b.select(5, [0, 1, 2]) == 0

    def test_newborn_virtual_init(self):
        pol = self.make({0: 50, 1: 50, 2: 50})
        pol.observe(1, [0, 1])
        pol.update(1, 0, 0.2)
        pol.update(2, 1, 0.4)
        pol.observe(3, [0, 1, 2])
        e = pol.est[2]
        assert e.virtual and e.pulls == 1
        assert_allclose(e.mean, 0.3)


class TestNewArmInit:
    def test_mean_of_means(self):
        e = new_arm_init({0: est(0.2, 3), 1: est(0.4, 1)}, RewardRange())
        assert_allclose(e.mean, 0.3)
        assert e.virtual

    def test_empty_gives_midpoint(self):
        assert new_arm_init({}, RewardRange()).mean == 0.5
        assert new_arm_init({}, RewardRange(-1, 3)).mean == 1.0

    def test_virtual_ignored(self):
        e = new_arm_init({0: ArmEstimate(1, 0.9, virtual=True), 1: est(0.1)}, RewardRange())
        assert_allclose(e.mean, 0.1)


class TestLinUcbl:
    def test_fresh_score(self):
        st = LinUcblState(3)
        assert_allclose(st.score(np.array([1.0, 0.0, 0.0]), 1.0), 1.0)

    def test_theta_matches_ridge_solve(self):
        st = LinUcblState(2)
        xs = np.array([[1.0, 0.0], [0.5, 1.0], [1.0, 1.0]])
        ys = np.array([1.0, 0.0, 0.5])
        for x, y in zip(xs, ys):
            st.update(x, y)
        want = np.linalg.solve(np.eye(2) + xs.T @ xs, xs.T @ ys)
        assert_allclose(st.theta, want, rtol=1e-12)

    def test_rank_one_inverse_stays_accurate(self):
        rng = np.random.default_rng(3)
        st = LinUcblState(4)
        for _ in range(REFACTOR_EVERY + 100):
            st.update(rng.normal(size=4), float(rng.random()))
        assert_allclose(st.A_inv, np.linalg.inv(st.A), rtol=0, atol=1e-10)

    def test_not_spd(self):
        st = LinUcblState(2)
        st.A = np.array([[1.0, 2.0], [2.0, 1.0]])
        with pytest.raises(NotSPDError):
            st.refactor()

    def test_select_smallest_id_on_tie(self):
        states = {2: LinUcblState(1), 1: LinUcblState(1)}
        ctx = {j: np.ones(1) for j in states}
        assert linucbl_select(ctx, states, {1: 0.1, 2: 0.1}) == 1

    def test_newborn_theta_is_past_mean(self):
        pol = LinUCBL(RewardRange(), LifeModel("exact", deaths={0: 9, 1: 9, 2: 9}), d=1)
        pol.observe(1, [0, 1])
        pol.update(1, 0, 1.0)
        pol.update(2, 1, 0.0)
        pol.observe(3, [0, 1, 2])
        want = np.mean([pol.states[0].theta, pol.states[1].theta], axis=0)
        assert_allclose(pol.states[2].theta, want)


class TestMakePolicy:
    @pytest.mark.parametrize("name,cls", [("ag", AdaptiveGreedy), ("ag-l", AdaptiveGreedyL),
                                          ("ucb", UCBL), ("ucb-l", UCBL), ("linucb-l", LinUCBL)])
    def test_builds(self, name, cls):
        pol = make_policy(PolicyConfig(policy=name), RewardRange(), np.random.default_rng(0),
                          deaths={0: 5}, births={0: 1})
        assert isinstance(pol, cls)
        assert pol.get_params()["policy"] == name

    def test_unknown_policy(self):
        with pytest.raises(ConfigError):
            PolicyConfig(policy="thompson")

    def test_config_round_trip(self):
        cfg = PolicyConfig(policy="ucb-l", c=0.02, life_mode="estimated", seed=4)
        assert PolicyConfig.from_dict(cfg.to_dict()) == cfg
