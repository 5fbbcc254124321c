import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from mortalbandits.core import (ArmEstimate, ArmSpec, Bernoulli, Environment, GameState, RegretLedger,
                                RewardRange, TruncGauss, available_arms, best_available, record_play,
                                regret_from_log, update_estimate)
from mortalbandits.errors import AvailabilityError, ConfigError, NoLiveArmsError, RangeViolation


def staggered(rng, k=20, horizon=100):
    arms = [ArmSpec.bernoulli(0, 0.5, 1, None)]
    for j in range(1, k):
        b = int(rng.integers(1, horizon))
        d = None if rng.random() < 0.3 else int(rng.integers(b, horizon + 1))
        arms.append(ArmSpec.bernoulli(j, float(rng.random()), b, d))
    return Environment(arms, horizon=horizon, init_cap=1)


class TestRewardRange:
    def test_strict_order(self):
        with pytest.raises(ConfigError):
            RewardRange(1.0, 1.0)

    def test_check(self):
        rr = RewardRange(-1, 1)
        assert rr.r == 2 and rr.midpoint == 0
        with pytest.raises(RangeViolation):
            rr.check(1.5)


class TestDistributions:
    def test_bernoulli_samples_on_endpoints(self):
        rr = RewardRange(-1, 2)
        rng = np.random.default_rng(0)
        xs = {Bernoulli(0.5).sample(rng, rr) for _ in range(200)}
        assert xs == {-1, 2}

    def test_truncgauss_inside_range(self):
        rr = RewardRange()
        d = TruncGauss(0.9, 0.3)
        rng = np.random.default_rng(1)
        xs = np.array([d.sample(rng, rr) for _ in range(4000)])
        assert xs.min() >= 0 and xs.max() <= 1
        assert abs(xs.mean() - d.mean(rr)) < 4 * np.sqrt(d.variance(rr) / xs.size)


class TestUpdateEstimate:
    def test_first_reward(self):
        e = update_estimate(ArmEstimate(), 1.0)
        assert e.pulls == 1 and e.mean == 1.0

    def test_running_mean(self):
        e = update_estimate(ArmEstimate(2, 1.0), 0.0)
        assert e.pulls == 3
        assert_allclose(e.mean, 1 / 3)

    def test_out_of_range(self):
        with pytest.raises(RangeViolation):
            update_estimate(ArmEstimate(), 1.5)

    def test_virtual_replaced(self):
        e = update_estimate(ArmEstimate(1, 0.3, virtual=True), 1.0)
        assert (e.pulls, e.mean, e.virtual) == (1, 1.0, False)

    @given(st.lists(st.floats(0, 1), min_size=1, max_size=200))
    def test_stream_matches_batch(self, rewards):
        e = ArmEstimate()
        for x in rewards:
            e = update_estimate(e, x)
        assert_allclose(e.mean, np.mean(rewards), rtol=0, atol=1e-12)


class TestAvailability:
    def test_death_inclusive(self):
        env = Environment([ArmSpec.bernoulli(0, 0.5, 1, 5), ArmSpec.bernoulli(1, 0.5, 1, None)], horizon=10)
        assert 0 in available_arms(env, 5)
        assert 0 not in available_arms(env, 6)

    def test_matches_interval_scan(self):
        env = staggered(np.random.default_rng(3))
        for t in range(1, 101):
            brute = {s.id for s in env.arms if s.birth <= t and (s.death is None or t <= s.death)}
            assert available_arms(env, t) == brute
            assert available_arms(GameState(t, env), t) == brute

    def test_best(self):
        env = Environment([ArmSpec.bernoulli(0, 0.2), ArmSpec.bernoulli(1, 0.8)], horizon=3)
        assert best_available(env, 1) == (1, 0.8)

    def test_best_tie_smallest_id(self):
        env = Environment([ArmSpec.bernoulli(3, 0.5), ArmSpec.bernoulli(1, 0.5)], horizon=3)
        assert best_available(env, 2)[0] == 1

    def test_best_matches_brute_force(self):
        rng = np.random.default_rng(4)
        env = staggered(rng, k=10, horizon=50)
        for t in range(1, 51):
            live = [s for s in env.arms if s.alive(t)]
            top = max(s.dist.mu for s in live)
            assert env.best(t) == (min(s.id for s in live if s.dist.mu == top), top)

    def test_no_live_arms(self):
        env = Environment([ArmSpec.bernoulli(0, 0.5, 1, 2)], horizon=2)
        with pytest.raises(NoLiveArmsError):
            env.best(3)


class TestEnvironment:
    def test_json_round_trip(self, tmp_path):
        env = Environment([ArmSpec.bernoulli(0, 0.9), ArmSpec(1, 2, 5, TruncGauss(0.4, 0.2))],
                          RewardRange(0, 1), 8)
        env.save(tmp_path / "e.json")
        back = Environment.load(tmp_path / "e.json")
        assert back.dumps() == env.dumps()
        assert json.loads(env.dumps())["init_set"] == [0]

    def test_init_must_be_alive(self):
        with pytest.raises(ConfigError):
            Environment([ArmSpec.bernoulli(0, 0.5, 2, None)], horizon=4)
        with pytest.raises(ConfigError):
            Environment([ArmSpec.bernoulli(0, 0.5, 1, 1), ArmSpec.bernoulli(1, 0.5, 1, None)],
                        horizon=4, init_set=[1, 0])

    def test_mean_outside_range(self):
        with pytest.raises(RangeViolation):
            Environment([ArmSpec.bernoulli(0, 1.5)], horizon=2)

    def test_init_cap(self):
        env = Environment([ArmSpec.bernoulli(j, 0.5) for j in range(5)], horizon=9, init_cap=2)
        assert env.init_set == [0, 1]


class TestRegret:
    def test_best_arm_zero_delta(self):
        env = Environment([ArmSpec.bernoulli(0, 0.9), ArmSpec.bernoulli(1, 0.4)], horizon=3)
        led = record_play(RegretLedger(), env, 1, 0, 1.0)
        assert led.per_turn == [(1, 0, 0.0)]

    def test_gap(self):
        env = Environment([ArmSpec.bernoulli(0, 0.9), ArmSpec.bernoulli(1, 0.4)], horizon=3)
        led = record_play(RegretLedger(), env, 1, 1, 0.0)
        assert_allclose(led.total_regret, 0.5)

    def test_unavailable(self):
        env = Environment([ArmSpec.bernoulli(0, 0.9), ArmSpec.bernoulli(1, 0.4, 2, 2)], horizon=3)
        with pytest.raises(AvailabilityError):
            record_play(RegretLedger(), env, 3, 1, 0.0)
        assert record_play(RegretLedger(), env, 2, 1, 0.0).total_regret == pytest.approx(0.5)
        with pytest.raises(AvailabilityError):
            record_play(RegretLedger(), env, 2, 7, 0.0)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000))
    def test_two_forms_agree(self, seed):
        rng = np.random.default_rng(seed)
        env = staggered(rng, k=8, horizon=100)
        led = RegretLedger()
        plays = []
        for t in range(1, 101):
            j = int(rng.choice(env.live(t)))
            record_play(led, env, t, j, 0.0)
            plays.append((t, j))
        by_turn, by_arm = regret_from_log(env, plays)
        assert_allclose([by_turn, by_arm], led.total_regret, rtol=1e-12)
        assert sum(d for _, _, d in led.per_turn) == pytest.approx(led.total_regret)
        assert all(d >= 0 for _, _, d in led.per_turn)
