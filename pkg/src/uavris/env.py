"""The slot-stepped decision process over the dual-RIS network.

One episode runs L slots.  Each step decodes an action (UAV speed/heading,
per-node scheduling flags, beam matrix, two phase vectors), moves the UAV
with boundary reversion and penalty, draws fresh channels, and rewards the
minimum over nodes of the running time-averaged weighted rate.  Everything
is a pure function of (config, seed, action sequence).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import signal_model as sig
from .channel import (ChannelSet, csi_length, flatten_csi, realize_channels,
                      slot_rng)
from .scenario import Position3, ScenarioConfig, propose_move
from .signal_model import BeamMatrix, PhaseConfig, canonical_phases


@dataclass
class Action:
    """Decoded control input for one slot."""

    speed: float
    heading: float
    schedule: np.ndarray          # K booleans
    W: np.ndarray                 # M x K complex, pre-projection
    theta_U: np.ndarray
    theta_R: np.ndarray


@dataclass
class StateObs:
    """Observation: normalized UAV position, slot index, flattened CSI."""

    uav_xy: np.ndarray            # normalized to [0, 1]^2
    slot_index: int
    csi: np.ndarray

    def vector(self, L: int) -> np.ndarray:
        head = np.array([self.uav_xy[0], self.uav_xy[1], self.slot_index / L])
        return np.concatenate([head, self.csi])


@dataclass
class StepResult:
    obs: StateObs
    reward: float
    done: bool
    info: dict


def obs_length(cfg: ScenarioConfig) -> int:
    return 3 + csi_length(cfg)


def action_length(cfg: ScenarioConfig) -> int:
    return 2 + cfg.K + 2 * cfg.M * cfg.K + cfg.F + cfg.N


def decode_action(vec, cfg: ScenarioConfig) -> tuple[Action, int]:
    """Deterministically decode and clamp a flat action vector.

    Layout: [speed, heading, schedule (K), W real (M*K row-major),
    W imag (M*K), theta_U (F), theta_R (N)].  Returns the action plus the
    number of clamp events (speed out of range, non-finite entries zeroed).
    """
    vec = np.asarray(vec, dtype=float)
    want = action_length(cfg)
    if vec.ndim != 1 or vec.size != want:
        raise ValueError(f"action length {vec.size}, expected {want}")

    clamped = 0
    if not np.all(np.isfinite(vec)):
        clamped += int(np.sum(~np.isfinite(vec)))
        vec = np.where(np.isfinite(vec), vec, 0.0)

    speed = vec[0]
    if speed < 0.0 or speed > cfg.v_max:
        clamped += 1
        speed = min(max(speed, 0.0), cfg.v_max)
    heading = math.remainder(vec[1], 2.0 * math.pi)

    ofs = 2
    schedule = vec[ofs:ofs + cfg.K] > 0.5
    ofs += cfg.K
    mk = cfg.M * cfg.K
    w_re = vec[ofs:ofs + mk].reshape(cfg.M, cfg.K)
    ofs += mk
    w_im = vec[ofs:ofs + mk].reshape(cfg.M, cfg.K)
    ofs += mk
    theta_u = canonical_phases(vec[ofs:ofs + cfg.F])
    ofs += cfg.F
    theta_r = canonical_phases(vec[ofs:ofs + cfg.N])

    action = Action(speed=float(speed), heading=float(heading),
                    schedule=schedule, W=w_re + 1j * w_im,
                    theta_U=theta_u, theta_R=theta_r)
    return action, clamped


def encode_action(action: Action, cfg: ScenarioConfig) -> np.ndarray:
    """Inverse of decode_action for in-range actions."""
    return np.concatenate([
        [action.speed, action.heading],
        action.schedule.astype(float),
        action.W.real.reshape(-1), action.W.imag.reshape(-1),
        canonical_phases(action.theta_U), canonical_phases(action.theta_R),
    ])


def encode_state(uav_pos: Position3, slot_index: int, ch: ChannelSet,
                 cfg: ScenarioConfig) -> StateObs:
    xy = np.array([uav_pos.x / cfg.area_x, uav_pos.y / cfg.area_y])
    return StateObs(uav_xy=xy, slot_index=slot_index, csi=flatten_csi(ch))


class Environment:
    """Single-session episode driver; reset() then step() L times."""

    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        self._active = False
        self._episode_seed = cfg.seed
        self.uav_pos = cfg.uav_start
        self.slot = 0
        self.channels: ChannelSet | None = None
        self._rate_sums = np.zeros(cfg.K)
        self._rates_dl: list[np.ndarray] = []
        self._rates_ul: list[np.ndarray] = []
        self._powers: list[float] = []

    def reset(self, seed: int | None = None) -> StateObs:
        if seed is not None:
            self._episode_seed = int(seed)
        self.uav_pos = self.cfg.uav_start
        self.slot = 0
        self._active = True
        self._rate_sums = np.zeros(self.cfg.K)
        self._rates_dl = []
        self._rates_ul = []
        self._powers = []
        self.channels = realize_channels(
            self.cfg, self.uav_pos,
            slot_rng(self.cfg.seed, self._episode_seed, 0))
        return encode_state(self.uav_pos, 0, self.channels, self.cfg)

    def step(self, action) -> StepResult:
        if not self._active:
            raise RuntimeError("no active episode; call reset() first")
        if self.slot >= self.cfg.L:
            raise RuntimeError("episode finished; call reset() to start a new one")
        cfg = self.cfg

        if isinstance(action, Action):
            act, clamped = action, 0
        else:
            act, clamped = decode_action(action, cfg)

        proposed = propose_move(self.uav_pos, act.speed, act.heading, cfg)
        boundary = not cfg.in_bounds(proposed)
        if not boundary:
            self.uav_pos = proposed

        self.slot += 1
        self.channels = realize_channels(
            cfg, self.uav_pos, slot_rng(cfg.seed, self._episode_seed, self.slot))

        # Scheduling gates transmission: unscheduled columns carry no power.
        W = act.W.copy()
        W[:, ~act.schedule] = 0.0
        W_dl = sig.project_power(BeamMatrix(W=W, direction="dl"), cfg.P_dl)
        W_ul = sig.project_power(BeamMatrix(W=W, direction="ul"), cfg.P_ul)
        ph = PhaseConfig(act.theta_U, act.theta_R)

        r_dl = sig.slot_rates(self.channels, ph, W_dl, cfg.sigma2, "dl")
        r_ul = sig.slot_rates(self.channels, ph, W_ul, cfg.sigma2, "ul")
        r_dl[~act.schedule] = 0.0
        r_ul[~act.schedule] = 0.0
        weighted = cfg.dl_weight * r_dl + (1.0 - cfg.dl_weight) * r_ul

        self._rate_sums += weighted
        self._rates_dl.append(r_dl)
        self._rates_ul.append(r_ul)
        self._powers.append(W_dl.power())

        running_avg = self._rate_sums / self.slot
        min_rate = float(running_avg.min())
        reward = min_rate + (cfg.penalty if boundary else 0.0)

        done = self.slot >= cfg.L
        if done:
            self._active = False
        obs = encode_state(self.uav_pos, self.slot, self.channels, cfg)
        info = {
            "rates_dl": r_dl, "rates_ul": r_ul, "rates": weighted,
            "running_avg": running_avg, "min_rate": min_rate,
            "boundary": boundary, "power_used": W_dl.power(),
            "clamped": clamped, "slot": self.slot,
            "uav_pos": self.uav_pos.as_tuple(),
        }
        return StepResult(obs=obs, reward=reward, done=done, info=info)

    def rate_report(self) -> sig.RateReport:
        if not self._rates_dl:
            raise RuntimeError("no slots accumulated yet")
        return sig.episode_rates(np.stack(self._rates_dl),
                                 np.stack(self._rates_ul), self.cfg.dl_weight)

    def episode_avg_power(self) -> float:
        return float(np.mean(self._powers)) if self._powers else 0.0


@dataclass
class EpisodeTrace:
    """Everything needed to recompute an episode's rewards offline."""

    seed: int
    actions: list = field(default_factory=list)      # flat action vectors
    rewards: list = field(default_factory=list)
    infos: list = field(default_factory=list)
    report: sig.RateReport | None = None
    avg_power: float = 0.0


def run_episode(policy, cfg: ScenarioConfig, seed: int) -> EpisodeTrace:
    """Roll one full episode with `policy(obs: StateObs) -> action vector`."""
    env = Environment(cfg)
    obs = env.reset(seed)
    trace = EpisodeTrace(seed=seed)
    for slot in range(cfg.L):
        try:
            action_vec = np.asarray(policy(obs), dtype=float)
        except Exception as exc:
            raise RuntimeError(f"policy failed at slot {slot}: {exc}") from exc
        result = env.step(action_vec)
        trace.actions.append(action_vec)
        trace.rewards.append(result.reward)
        trace.infos.append(result.info)
        obs = result.obs
        if result.done:
            break
    trace.report = env.rate_report()
    trace.avg_power = env.episode_avg_power()
    return trace
