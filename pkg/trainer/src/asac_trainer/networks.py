"""Actor and critic networks sized from the environment's hello handshake."""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .attention import AssaBlock

LOG_STD_MIN, LOG_STD_MAX = -20.0, 2.0
SQUASH_EPS = 1e-6


@dataclass(frozen=True)
class EnvSpec:
    """Dimension block announced by the environment service."""

    obs_len: int
    action_len: int
    M: int
    K: int
    F: int
    N: int
    v_max: float
    p_dl: float
    L: int

    def __post_init__(self):
        expected = 2 + self.K + 2 * self.M * self.K + self.F + self.N
        if self.action_len != expected:
            raise ValueError(
                f"action_len {self.action_len} does not match the layout "
                f"2+K+2MK+F+N = {expected}")

    @classmethod
    def from_hello(cls, payload: dict) -> "EnvSpec":
        return cls(obs_len=payload["obs_len"], action_len=payload["action_len"],
                   M=payload["M"], K=payload["K"], F=payload["F"],
                   N=payload["N"], v_max=payload["v_max"],
                   p_dl=payload["p_dl"], L=payload["L"])

    def group_slices(self) -> dict:
        """Action layout: [speed+heading+schedule, W re+im, theta_U, theta_R]."""
        k, mk = self.K, self.M * self.K
        ofs = {}
        ofs["move"] = slice(0, 2 + k)
        ofs["beam"] = slice(2 + k, 2 + k + 2 * mk)
        ofs["theta_u"] = slice(2 + k + 2 * mk, 2 + k + 2 * mk + self.F)
        ofs["theta_r"] = slice(2 + k + 2 * mk + self.F, self.action_len)
        return ofs


def action_scaling(spec: EnvSpec) -> tuple[torch.Tensor, torch.Tensor]:
    """Per-dimension (scale, offset) mapping tanh outputs into env ranges."""
    scale = torch.empty(spec.action_len)
    offset = torch.empty(spec.action_len)
    s = spec.group_slices()
    scale[0], offset[0] = spec.v_max / 2.0, spec.v_max / 2.0       # speed
    scale[1], offset[1] = math.pi, 0.0                             # heading
    scale[2:2 + spec.K], offset[2:2 + spec.K] = 0.5, 0.5           # schedule
    scale[s["beam"]], offset[s["beam"]] = math.sqrt(spec.p_dl), 0.0
    scale[s["theta_u"]], offset[s["theta_u"]] = math.pi, math.pi
    scale[s["theta_r"]], offset[s["theta_r"]] = math.pi, math.pi
    return scale, offset


@dataclass
class ActorOutput:
    mean: torch.Tensor
    std: torch.Tensor
    pre_squash: torch.Tensor
    action: torch.Tensor
    log_prob: torch.Tensor


class _SquashMixin:
    """Shared reparameterized sampling with tanh squash and range scaling."""

    def _finish(self, mu, log_std, noise):
        log_std = torch.clamp(log_std, LOG_STD_MIN, LOG_STD_MAX)
        std = torch.exp(log_std)
        if noise is None:
            noise = torch.randn_like(mu)
        pre = mu + noise * std
        t = torch.tanh(pre)
        action = self.offset + self.scale * t
        gauss = (-0.5 * ((pre - mu) / std) ** 2
                 - torch.log(std) - 0.5 * math.log(2 * math.pi))
        correction = torch.log(self.scale * (1.0 - t ** 2) + SQUASH_EPS)
        log_prob = (gauss - correction).sum(dim=-1)
        return ActorOutput(mean=mu, std=std, pre_squash=pre, action=action,
                           log_prob=log_prob)

    def sample(self, state: torch.Tensor, noise: torch.Tensor | None = None
               ) -> ActorOutput:
        mu, log_std = self(state)
        return self._finish(mu, log_std, noise)


class AstaferActor(nn.Module, _SquashMixin):
    """Attention actor: one token per action group, fused sparse/dense blocks.

    A shared feature layer digests the raw observation before per-group
    token embeddings; the attention blocks then mix information across the
    four groups.
    """

    GROUPS = ("move", "beam", "theta_u", "theta_r")

    def __init__(self, spec: EnvSpec, width: int = 96, blocks: int = 1):
        super().__init__()
        self.spec = spec
        self.slices = spec.group_slices()
        self.trunk = nn.Sequential(
            nn.Linear(spec.obs_len, 2 * width), nn.ReLU())
        self.embed = nn.ModuleList(
            [nn.Linear(2 * width, width) for _ in self.GROUPS])
        self.blocks = nn.ModuleList(
            [AssaBlock(len(self.GROUPS), width) for _ in range(blocks)])
        self.mu_heads = nn.ModuleList()
        self.log_std_heads = nn.ModuleList()
        for name in self.GROUPS:
            dim = self.slices[name].stop - self.slices[name].start
            self.mu_heads.append(nn.Linear(width, dim))
            self.log_std_heads.append(nn.Linear(width, dim))
        scale, offset = action_scaling(spec)
        self.register_buffer("scale", scale)
        self.register_buffer("offset", offset)

    def forward(self, state: torch.Tensor):
        if state.shape[-1] != self.spec.obs_len:
            raise ValueError(
                f"state length {state.shape[-1]}, expected {self.spec.obs_len}")
        squeeze = state.dim() == 1
        if squeeze:
            state = state.unsqueeze(0)
        features = self.trunk(state)
        tokens = torch.stack([emb(features) for emb in self.embed], dim=-2)
        for block in self.blocks:
            tokens = block(tokens)
        mu = torch.empty(state.shape[0], self.spec.action_len,
                         dtype=state.dtype, device=state.device)
        log_std = torch.empty_like(mu)
        for i, name in enumerate(self.GROUPS):
            sl = self.slices[name]
            mu[:, sl] = self.mu_heads[i](tokens[:, i])
            log_std[:, sl] = self.log_std_heads[i](tokens[:, i])
        if squeeze:
            mu, log_std = mu.squeeze(0), log_std.squeeze(0)
        return mu, log_std


class MlpActor(nn.Module, _SquashMixin):
    """Plain two-hidden-layer Gaussian actor; the conventional ablation."""

    def __init__(self, spec: EnvSpec, hidden: int = 256):
        super().__init__()
        self.spec = spec
        self.trunk = nn.Sequential(
            nn.Linear(spec.obs_len, hidden), nn.ReLU(),
            nn.Linear(hidden, hidden), nn.ReLU())
        self.mu_head = nn.Linear(hidden, spec.action_len)
        self.log_std_head = nn.Linear(hidden, spec.action_len)
        scale, offset = action_scaling(spec)
        self.register_buffer("scale", scale)
        self.register_buffer("offset", offset)

    def forward(self, state: torch.Tensor):
        if state.shape[-1] != self.spec.obs_len:
            raise ValueError(
                f"state length {state.shape[-1]}, expected {self.spec.obs_len}")
        h = self.trunk(state)
        return self.mu_head(h), self.log_std_head(h)


def make_actor(kind: str, spec: EnvSpec, width: int = 64) -> nn.Module:
    if kind == "astafer":
        return AstaferActor(spec, width=width)
    if kind == "mlp":
        return MlpActor(spec)
    raise ValueError(f"unknown actor kind {kind!r}")


class _NormBlock(nn.Module):
    def __init__(self, n_in, n_out, activation):
        super().__init__()
        self.lin = nn.Linear(n_in, n_out)
        self.norm = nn.LayerNorm(n_out)
        self.act = activation

    def forward(self, x):
        return self.norm(self.act(self.lin(x)))


class Critic(nn.Module):
    """State-action value: concat input, three normalized hidden layers."""

    def __init__(self, spec: EnvSpec, hidden: int = 256):
        super().__init__()
        n_in = spec.obs_len + spec.action_len
        self.h1 = _NormBlock(n_in, hidden, F.relu)
        self.h2 = _NormBlock(hidden, hidden, F.gelu)
        self.h3 = _NormBlock(hidden, hidden, F.relu)
        self.out = nn.Linear(hidden, 1)

    def forward(self, state, action):
        x = torch.cat([state, action], dim=-1)
        return self.out(self.h3(self.h2(self.h1(x)))).squeeze(-1)


class ValueNet(nn.Module):
    """State value with the same normalized five-layer profile."""

    def __init__(self, spec: EnvSpec, hidden: int = 256):
        super().__init__()
        self.h1 = _NormBlock(spec.obs_len, hidden, F.relu)
        self.h2 = _NormBlock(hidden, hidden, F.gelu)
        self.h3 = _NormBlock(hidden, hidden, F.relu)
        self.out = nn.Linear(hidden, 1)

    def forward(self, state):
        return self.out(self.h3(self.h2(self.h1(state)))).squeeze(-1)
