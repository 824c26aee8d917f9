import math

import numpy as np
import pytest

from uavris.channel import unflatten_csi
from uavris.env import (Action, Environment, action_length, decode_action,
                        encode_action, obs_length, run_episode)
from uavris.scenario import config_from_dict, link_distance
from uavris.signal_model import matched_solution


def small_cfg(**over):
    base = {"M": 2, "F1": 2, "F2": 1, "N1": 2, "N2": 1, "L": 10,
            "node_pos": [[600, 600, 0], [500, 640, 0]], "seed": 0}
    base.update(over)
    return config_from_dict(base)


def zero_action(cfg, speed=0.0, heading=0.0):
    vec = np.zeros(action_length(cfg))
    vec[0] = speed
    vec[1] = heading
    vec[2:2 + cfg.K] = 1.0
    return vec


class TestReset:
    def test_same_seed_identical(self):
        cfg = small_cfg()
        a = Environment(cfg).reset(9).vector(cfg.L)
        b = Environment(cfg).reset(9).vector(cfg.L)
        assert np.array_equal(a, b)

    def test_different_seed_differs(self):
        cfg = small_cfg()
        a = Environment(cfg).reset(1).vector(cfg.L)
        b = Environment(cfg).reset(2).vector(cfg.L)
        assert not np.array_equal(a, b)

    def test_normalized_start(self):
        cfg = small_cfg()
        obs = Environment(cfg).reset(0)
        assert obs.uav_xy[0] == pytest.approx(cfg.uav_start.x / cfg.area_x)
        assert obs.uav_xy[1] == pytest.approx(cfg.uav_start.y / cfg.area_y)
        assert obs.slot_index == 0

    def test_obs_length_formula(self):
        cfg = small_cfg()
        F, M, N, K = cfg.F, cfg.M, cfg.N, cfg.K
        want = 2 + 1 + 2 * (F * M + N * F + K * N + K * F) + 4 * K
        assert obs_length(cfg) == want
        assert Environment(cfg).reset(0).vector(cfg.L).size == want


class TestActionCodec:
    def test_roundtrip_in_range(self):
        cfg = small_cfg()
        rng = np.random.default_rng(0)
        for _ in range(30):
            vec = np.concatenate([
                [rng.uniform(0, cfg.v_max)],
                [rng.uniform(-math.pi, math.pi)],
                rng.integers(0, 2, cfg.K).astype(float),
                rng.normal(size=2 * cfg.M * cfg.K),
                rng.uniform(0, 2 * math.pi, cfg.F + cfg.N),
            ])
            action, clamped = decode_action(vec, cfg)
            assert clamped == 0
            assert np.allclose(encode_action(action, cfg), vec, atol=1e-12)

    def test_speed_clamp_counted(self):
        cfg = small_cfg()
        vec = zero_action(cfg, speed=1e9)
        action, clamped = decode_action(vec, cfg)
        assert action.speed == cfg.v_max
        assert clamped == 1

    def test_wrong_length_names_expected(self):
        cfg = small_cfg()
        with pytest.raises(ValueError, match=str(action_length(cfg))):
            decode_action(np.zeros(action_length(cfg) + 1), cfg)

    def test_non_finite_zeroed(self):
        cfg = small_cfg()
        vec = zero_action(cfg)
        vec[3] = math.nan
        action, clamped = decode_action(vec, cfg)
        assert clamped == 1
        assert np.all(np.isfinite(action.W.view(float)))

    def test_phases_canonicalized(self):
        cfg = small_cfg()
        vec = zero_action(cfg)
        vec[-1] = -1.0
        vec[-cfg.N - 1] = 7.0
        action, _ = decode_action(vec, cfg)
        for th in (action.theta_U, action.theta_R):
            assert np.all(th >= 0) and np.all(th < 2 * math.pi)


class TestStep:
    def test_matched_single_user_closed_form(self):
        # stationary UAV, deterministic channels: the co-phased beam must hit
        # the amplitude-sum rate exactly
        cfg = small_cfg(M=1, F1=1, F2=1, N1=1, N2=1, L=3,
                        node_pos=[[600, 600, 0]],
                        rician=math.inf, jitter_psi=0.0)
        env = Environment(cfg)
        obs = env.reset(0)
        ch = unflatten_csi(obs.csi, cfg)
        phases, beam = matched_solution(0, ch, cfg)
        action = Action(speed=0.0, heading=0.0,
                        schedule=np.ones(1, dtype=bool), W=beam.W,
                        theta_U=phases.theta_U, theta_R=phases.theta_R)
        result = env.step(encode_action(action, cfg))
        amp = (ch.pathloss_cascade[0]
               * abs(ch.h_Rk[0, 0] * ch.H_UR[0, 0] * ch.H_BU[0, 0])
               + ch.pathloss_BUk[0] * abs(ch.h_Uk[0, 0] * ch.H_BU[0, 0]))
        expected = math.log2(1.0 + cfg.P_dl * amp ** 2 / cfg.sigma2)
        assert result.reward == pytest.approx(expected, abs=1e-9)

    def test_boundary_reverts_and_penalizes(self):
        cfg = small_cfg(uav_start=[5.0, 80.0, 100.0],
                        uav_end=[5.0, 80.0, 100.0])
        env = Environment(cfg)
        env.reset(0)
        vec = zero_action(cfg, speed=cfg.v_max, heading=math.pi)  # due -x
        result = env.step(vec)
        assert result.info["boundary"] is True
        assert result.info["uav_pos"][0] == 5.0
        # all-zero beams: the rate part is 0, so the reward is the penalty
        assert result.reward == pytest.approx(cfg.penalty)

    def test_zero_beam_zero_rates(self):
        cfg = small_cfg()
        env = Environment(cfg)
        env.reset(0)
        result = env.step(zero_action(cfg))
        assert np.all(result.info["rates"] == 0.0)
        assert result.reward == 0.0
        assert result.info["boundary"] is False

    def test_step_after_done(self):
        cfg = small_cfg(L=2)
        env = Environment(cfg)
        env.reset(0)
        env.step(zero_action(cfg))
        result = env.step(zero_action(cfg))
        assert result.done
        with pytest.raises(RuntimeError):
            env.step(zero_action(cfg))

    def test_step_before_reset(self):
        cfg = small_cfg()
        with pytest.raises(RuntimeError):
            Environment(cfg).step(zero_action(cfg))

    def test_position_always_in_bounds(self):
        cfg = small_cfg(L=60, uav_start=[10.0, 10.0, 100.0],
                        uav_end=[10.0, 10.0, 100.0])
        env = Environment(cfg)
        env.reset(4)
        rng = np.random.default_rng(4)
        for _ in range(cfg.L):
            vec = zero_action(cfg, speed=rng.uniform(0, 40),
                              heading=rng.uniform(-4, 4))
            result = env.step(vec)
            x, y, _ = result.info["uav_pos"]
            assert 0.0 <= x <= cfg.area_x and 0.0 <= y <= cfg.area_y

    def test_power_projection_applied(self):
        cfg = small_cfg()
        env = Environment(cfg)
        env.reset(0)
        vec = zero_action(cfg)
        vec[2 + cfg.K:2 + cfg.K + cfg.M * cfg.K] = 100.0  # way over budget
        result = env.step(vec)
        assert result.info["power_used"] <= cfg.P_dl + 1e-9

    def test_unscheduled_rate_zero(self):
        cfg = small_cfg()
        env = Environment(cfg)
        env.reset(0)
        vec = zero_action(cfg)
        vec[2:2 + cfg.K] = [1.0, 0.0]
        vec[2 + cfg.K:2 + cfg.K + cfg.M * cfg.K] = 1.0
        result = env.step(vec)
        assert result.info["rates"][1] == 0.0


class TestRunEpisode:
    def test_deterministic_and_replayable(self):
        cfg = small_cfg(L=8)
        rng_policy = lambda seed: (lambda obs: np.random.default_rng(
            seed + obs.slot_index).uniform(-2, 2, action_length(cfg)))
        t1 = run_episode(rng_policy(5), cfg, seed=3)
        t2 = run_episode(rng_policy(5), cfg, seed=3)
        assert t1.rewards == t2.rewards

        env = Environment(cfg)
        env.reset(3)
        for i, action in enumerate(t1.actions):
            result = env.step(action)
            assert result.reward == t1.rewards[i]

    def test_row_count_matches_horizon(self):
        cfg = small_cfg(L=12)
        trace = run_episode(lambda obs: zero_action(cfg), cfg, seed=0)
        assert len(trace.rewards) == 12
        assert trace.report is not None

    def test_reward_bounded_by_best_slot_rate(self):
        cfg = small_cfg(L=20)
        rng = np.random.default_rng(8)
        policy = lambda obs: np.concatenate([
            [rng.uniform(0, cfg.v_max), rng.uniform(-math.pi, math.pi)],
            np.ones(cfg.K),
            rng.normal(size=2 * cfg.M * cfg.K),
            rng.uniform(0, 2 * math.pi, cfg.F + cfg.N)])
        trace = run_episode(policy, cfg, seed=1)
        best_so_far = 0.0
        for reward, info in zip(trace.rewards, trace.infos):
            best_so_far = max(best_so_far, float(np.max(info["rates"])))
            assert reward <= best_so_far + 1e-12
            # with everyone scheduled and no penalty, the reward is exactly
            # the minimum running average
            if not info["boundary"]:
                assert reward == pytest.approx(
                    float(np.min(info["running_avg"])))

    def test_policy_failure_reports_slot(self):
        cfg = small_cfg(L=5)

        def bad_policy(obs):
            if obs.slot_index == 2:
                raise RuntimeError("boom")
            return zero_action(cfg)

        with pytest.raises(RuntimeError, match="slot 2"):
            run_episode(bad_policy, cfg, seed=0)


class TestJitterDegradation:
    def test_mean_min_rate_drops_with_heavy_jitter(self):
        # quick smoke check; the full 30-seed paired trend lives in the
        # acceptance suite
        base = {"M": 2, "F1": 2, "F2": 2, "N1": 4, "N2": 4, "L": 12,
                "uav_start": [300, 200, 100], "uav_end": [300, 200, 100],
                "node_pos": [[400, 240, 0], [420, 180, 0]],
                "alpha_cascade": 1.2, "sigma2": 2e-7, "seed": 0}
        from uavris.bridge import baseline_matched
        means = []
        for ratio in (0.0, 0.5):
            cfg = config_from_dict({**base, "jitter_ratio": ratio})
            policy = baseline_matched(cfg)
            rates = [run_episode(policy, cfg, seed=s).report.min_rate
                     for s in range(6)]
            means.append(np.mean(rates))
        assert means[1] < means[0]
