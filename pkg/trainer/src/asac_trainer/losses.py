"""Soft value, critic, and policy objectives plus target blending.

Targets follow the soft Bellman recursion with the bootstrap through a
slow-moving value copy; wherever a state-action value is consumed, the
minimum over the three critics is used.
"""

from __future__ import annotations

import torch
import torch.nn as nn


def min_q(critics, states, actions) -> torch.Tensor:
    qs = torch.stack([c(states, actions) for c in critics])
    return qs.min(dim=0).values


def q_targets(rewards, dones, v_next, gamma: float) -> torch.Tensor:
    """r + gamma * (1 - done) * V_target(s'); detached bootstrap."""
    return rewards + gamma * (1.0 - dones) * v_next.detach()


def value_loss(value_net, critics, actor, states, temperature: float,
               noise=None) -> torch.Tensor:
    """Squared residual of V(s) against E[min Q(s, a~pi) - zeta log pi]."""
    out = actor.sample(states, noise)
    with torch.no_grad():
        target = min_q(critics, states, out.action) \
            - temperature * out.log_prob
    return 0.5 * torch.mean((value_net(states) - target) ** 2)


def q_loss(critic, states, actions, q_hat) -> torch.Tensor:
    """Soft Bellman residual for one critic against a fixed target."""
    return 0.5 * torch.mean((critic(states, actions) - q_hat.detach()) ** 2)


def policy_loss(actor, critics, states, temperature: float,
                noise=None) -> torch.Tensor:
    """Reparameterized KL surrogate: zeta log pi(a~|s) - min Q(s, a~)."""
    out = actor.sample(states, noise)
    return torch.mean(temperature * out.log_prob
                      - min_q(critics, states, out.action))


def td_errors(critics, states, actions, q_hat) -> torch.Tensor:
    """Mean absolute temporal-difference error across the critics."""
    with torch.no_grad():
        qs = torch.stack([c(states, actions) for c in critics])
        return torch.mean(torch.abs(qs - q_hat.unsqueeze(0)), dim=0)


def polyak_update(target: nn.Module, online: nn.Module, tau: float) -> None:
    """target <- tau * online + (1 - tau) * target, elementwise."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    with torch.no_grad():
        for t, o in zip(target.parameters(), online.parameters()):
            if t.shape != o.shape:
                raise ValueError(f"shape mismatch: {t.shape} vs {o.shape}")
            t.mul_(1.0 - tau).add_(o, alpha=tau)
        for t, o in zip(target.buffers(), online.buffers()):
            t.copy_(o)
