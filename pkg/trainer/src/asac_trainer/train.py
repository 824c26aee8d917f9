"""The training loop: act, store, and update once per episode phase.

Updates follow the episode-terminal schedule: sample a recency-restricted
prioritized batch, step the value net, the three critics, and the policy in
that order, then blend the value target.  Everything is seeded; a NaN in any
loss aborts with diagnostics, and checkpoints make runs resumable.
"""

from __future__ import annotations

import copy
import csv
import dataclasses
import io
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np
import torch

from .bridge_client import BridgeClient
from .losses import (min_q, polyak_update, policy_loss, q_loss, q_targets,
                     td_errors, value_loss)
from .networks import Critic, EnvSpec, ValueNet, make_actor
from .replay import ReplayRecord, RPERBuffer, rper_range

# Small scenario with the reflect paths strong enough for learning signal.
TINY_SCENARIO = {
    "M": 2, "F1": 2, "F2": 2, "N1": 2, "N2": 2, "L": 40,
    "uav_start": [300, 200, 100], "uav_end": [300, 200, 100],
    "node_pos": [[400, 240, 0], [420, 180, 0]],
    "alpha_cascade": 1.2, "sigma2": 2e-7, "rician": 5.0,
}


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainConfig:
    gamma: float = 0.99
    temperature: float = 0.2
    lr_actor: float = 1e-4
    lr_critic: float = 1e-4
    lr_value: float = 1e-4
    polyak: float = 0.005
    batch: int = 128
    buffer_capacity: int = 1_000_000
    recency: float = 0.996
    c_min: int = 5_000
    alpha_per: float = 0.6
    episodes: int = 200
    updates_per_phase: int = 0      # 0: one update per slot of the episode
    seed: int = 0
    actor: str = "astafer"
    width: int = 64
    hidden: int = 256
    ckpt_every: int = 50
    clip_grad: float = 10.0         # 0 disables gradient-norm clipping
    torch_threads: int = 1          # small matmuls run faster single-threaded

    def __post_init__(self):
        def check(cond, key, value):
            if not cond:
                raise ValueError(f"invariant violation: {key}={value!r}")
        check(0.0 < self.gamma <= 1.0, "gamma", self.gamma)
        check(0.0 <= self.polyak <= 1.0, "polyak", self.polyak)
        check(0.0 < self.recency <= 1.0, "recency", self.recency)
        check(self.alpha_per >= 0.0, "alpha_per", self.alpha_per)
        check(self.batch >= 1, "batch", self.batch)
        check(self.batch <= self.c_min, "batch<=c_min",
              (self.batch, self.c_min))
        check(self.episodes >= 1, "episodes", self.episodes)
        check(self.temperature >= 0.0, "temperature", self.temperature)


CURVE_COLUMNS = ("episode", "mean_reward", "min_rate",
                 "loss_value", "loss_q", "loss_policy")


@dataclass
class TrainResult:
    curve: list = field(default_factory=list)
    checkpoint_path: str | None = None
    spec: EnvSpec | None = None

    def curve_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CURVE_COLUMNS)
        for row in self.curve:
            writer.writerow([row[0]] + [repr(float(v)) for v in row[1:]])
        return buf.getvalue()


class Trainer:
    def __init__(self, cfg: TrainConfig, spec: EnvSpec):
        self.cfg = cfg
        self.spec = spec
        torch.manual_seed(cfg.seed)
        self.actor = make_actor(cfg.actor, spec, width=cfg.width)
        self.critics = [Critic(spec, cfg.hidden) for _ in range(3)]
        self.value = ValueNet(spec, cfg.hidden)
        self.value_target = copy.deepcopy(self.value)
        self.opt_actor = torch.optim.Adam(self.actor.parameters(), cfg.lr_actor)
        self.opt_critics = [torch.optim.Adam(c.parameters(), cfg.lr_critic)
                            for c in self.critics]
        self.opt_value = torch.optim.Adam(self.value.parameters(), cfg.lr_value)
        self.buffer = RPERBuffer(cfg.buffer_capacity, cfg.alpha_per, cfg.seed)
        self.episode = 0

    def act(self, obs: np.ndarray) -> np.ndarray:
        with torch.no_grad():
            out = self.actor.sample(torch.as_tensor(obs, dtype=torch.float32))
        return out.action.numpy()

    def _batch_tensors(self, records):
        to = lambda arr: torch.as_tensor(np.asarray(arr), dtype=torch.float32)
        s = to([r.s for r in records])
        a = to([r.a for r in records])
        r = to([r.r for r in records])
        s2 = to([r.s_next for r in records])
        d = to([float(r.done) for r in records])
        return s, a, r, s2, d

    def update_phase(self):
        """Run one phase of updates; returns the last (Jv, Jq, Jpi) triple."""
        cfg = self.cfg
        n_updates = cfg.updates_per_phase or self.spec.L
        if len(self.buffer) < cfg.batch:
            return (math.nan, math.nan, math.nan)
        last = (math.nan, math.nan, math.nan)
        for beta in range(1, n_updates + 1):
            window = rper_range(beta, cfg.buffer_capacity, cfg.recency,
                                cfg.c_min, n_updates)
            records, idx, weights = self.buffer.sample(cfg.batch, window)
            s, a, r, s2, d = self._batch_tensors(records)
            w = torch.as_tensor(weights, dtype=torch.float32)

            q_hat = q_targets(r, d, self.value_target(s2), cfg.gamma)

            def clip(module):
                if cfg.clip_grad:
                    torch.nn.utils.clip_grad_norm_(module.parameters(),
                                                   cfg.clip_grad)

            jv = value_loss(self.value, self.critics, self.actor, s,
                            cfg.temperature)
            self.opt_value.zero_grad()
            jv.backward()
            clip(self.value)
            self.opt_value.step()

            jq_total = 0.0
            for critic, opt in zip(self.critics, self.opt_critics):
                resid = critic(s, a) - q_hat.detach()
                jq = 0.5 * torch.mean(w * resid ** 2)
                opt.zero_grad()
                jq.backward()
                clip(critic)
                opt.step()
                jq_total += float(jq.detach())

            jpi = policy_loss(self.actor, self.critics, s, cfg.temperature)
            self.opt_actor.zero_grad()
            jpi.backward()
            clip(self.actor)
            self.opt_actor.step()

            polyak_update(self.value_target, self.value, cfg.polyak)
            self.buffer.update_priorities(idx, td_errors(
                self.critics, s, a, q_hat).numpy())

            last = (float(jv.detach()), jq_total / 3.0, float(jpi.detach()))
            if any(math.isnan(v) or math.isinf(v) for v in last):
                raise TrainingDiverged(
                    f"non-finite loss at episode {self.episode} update {beta}: "
                    f"Jv={last[0]}, Jq={last[1]}, Jpi={last[2]}")
        return last

    # -- checkpointing -----------------------------------------------------
    def state_dict(self) -> dict:
        return {
            "config": dataclasses.asdict(self.cfg),
            "spec": dataclasses.asdict(self.spec),
            "episode": self.episode,
            "actor": self.actor.state_dict(),
            "critics": [c.state_dict() for c in self.critics],
            "value": self.value.state_dict(),
            "value_target": self.value_target.state_dict(),
            "opt_actor": self.opt_actor.state_dict(),
            "opt_critics": [o.state_dict() for o in self.opt_critics],
            "opt_value": self.opt_value.state_dict(),
            "torch_rng": torch.get_rng_state(),
        }

    def load_state_dict(self, state: dict) -> None:
        self.episode = state["episode"]
        self.actor.load_state_dict(state["actor"])
        for c, sd in zip(self.critics, state["critics"]):
            c.load_state_dict(sd)
        self.value.load_state_dict(state["value"])
        self.value_target.load_state_dict(state["value_target"])
        self.opt_actor.load_state_dict(state["opt_actor"])
        for o, sd in zip(self.opt_critics, state["opt_critics"]):
            o.load_state_dict(sd)
        self.opt_value.load_state_dict(state["opt_value"])
        torch.set_rng_state(state["torch_rng"])


def train(cfg: TrainConfig, endpoint: str = "subprocess",
          config_path: str | None = None, out_dir: str | None = None,
          resume: str | None = None, progress=None) -> TrainResult:
    """Run Algorithm-style episodes against the environment service."""
    if cfg.torch_threads:
        torch.set_num_threads(cfg.torch_threads)
    client = BridgeClient(endpoint, config_path)
    try:
        spec = EnvSpec.from_hello(client.hello())
        trainer = Trainer(cfg, spec)
        result = TrainResult(spec=spec)
        if resume:
            state = torch.load(resume, weights_only=False)
            trainer.load_state_dict(state)
            result.curve = list(state.get("curve", []))

        ckpt_path = None
        if out_dir:
            os.makedirs(out_dir, exist_ok=True)
            ckpt_path = os.path.join(out_dir, "checkpoint.pt")

        def save_checkpoint():
            if ckpt_path:
                state = trainer.state_dict()
                state["curve"] = result.curve
                torch.save(state, ckpt_path)

        try:
            while trainer.episode < cfg.episodes:
                ep = trainer.episode
                obs = client.reset(cfg.seed * 1_000_003 + ep)
                total_reward = 0.0
                min_rate = 0.0
                done = False
                while not done:
                    action = trainer.act(obs)
                    obs2, reward, done, info = client.step(action)
                    trainer.buffer.add(ReplayRecord(
                        s=obs, a=action.astype(np.float32), r=reward,
                        s_next=obs2, done=done, priority=0.0))
                    total_reward += reward
                    min_rate = info["min_rate"]
                    obs = obs2
                losses = trainer.update_phase()
                trainer.episode += 1
                row = (ep, total_reward / spec.L, min_rate, *losses)
                result.curve.append(row)
                if progress:
                    progress(row)
                if cfg.ckpt_every and trainer.episode % cfg.ckpt_every == 0:
                    save_checkpoint()
        except ConnectionError:
            save_checkpoint()
            raise
        save_checkpoint()
        result.checkpoint_path = ckpt_path
        if out_dir:
            with open(os.path.join(out_dir, "curve.csv"), "w",
                      encoding="utf-8", newline="") as fh:
                fh.write(result.curve_csv())
        return result
    finally:
        client.close()


def random_policy_vector(spec: EnvSpec, rng: np.random.Generator) -> np.ndarray:
    """In-range uniform action, mirroring the service's random baseline."""
    w_amp = math.sqrt(spec.p_dl)
    return np.concatenate([
        [rng.uniform(0, spec.v_max), rng.uniform(-math.pi, math.pi)],
        rng.uniform(0, 1, spec.K),
        rng.uniform(-w_amp, w_amp, 2 * spec.M * spec.K),
        rng.uniform(0, 2 * math.pi, spec.F + spec.N),
    ])


def random_rollouts(endpoint: str, config_path: str | None, episodes: int,
                    seed: int) -> list[float]:
    """Mean per-slot reward of uniformly random actions, one per episode."""
    rng = np.random.default_rng(seed)
    means = []
    with BridgeClient(endpoint, config_path) as client:
        spec = EnvSpec.from_hello(client.hello())
        for ep in range(episodes):
            client.reset(seed * 1_000_003 + ep)
            total, done = 0.0, False
            while not done:
                _, reward, done, _ = client.step(
                    random_policy_vector(spec, rng))
                total += reward
            means.append(total / spec.L)
    return means


def write_tiny_scenario(path: str) -> str:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(TINY_SCENARIO, fh, indent=2)
    return path
