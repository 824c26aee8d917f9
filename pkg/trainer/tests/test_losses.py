import copy

import pytest
import torch

from asac_trainer.losses import (min_q, policy_loss, polyak_update, q_loss,
                                 q_targets, td_errors, value_loss)
from asac_trainer.networks import Critic, EnvSpec, MlpActor, ValueNet

TOY = EnvSpec(obs_len=6, action_len=7, M=1, K=1, F=1, N=1,
              v_max=20.0, p_dl=10.0, L=5)


def toy_nets(seed=0, hidden=8):
    torch.manual_seed(seed)
    actor = MlpActor(TOY, hidden=hidden)
    critics = [Critic(TOY, hidden) for _ in range(3)]
    value = ValueNet(TOY, hidden)
    return actor, critics, value


class TestTargets:
    def test_terminal_target_is_reward(self):
        _, _, value = toy_nets()
        r = torch.tensor([1.5, -2.0])
        done = torch.ones(2)
        s2 = torch.randn(2, TOY.obs_len)
        target = q_targets(r, done, value(s2), gamma=0.99)
        assert torch.allclose(target, r)

    def test_gamma_zero_target_is_reward(self):
        _, _, value = toy_nets()
        r = torch.tensor([0.3, 0.7])
        target = q_targets(r, torch.zeros(2), value(torch.randn(2, TOY.obs_len)),
                           gamma=0.0)
        assert torch.allclose(target, r)

    def test_bootstrap_enters_nonterminal(self):
        _, _, value = toy_nets()
        s2 = torch.randn(2, TOY.obs_len)
        r = torch.zeros(2)
        target = q_targets(r, torch.zeros(2), value(s2), gamma=0.5)
        assert torch.allclose(target, 0.5 * value(s2).detach())

    def test_min_q_is_elementwise_min(self):
        _, critics, _ = toy_nets()
        s = torch.randn(4, TOY.obs_len)
        a = torch.randn(4, TOY.action_len)
        stacked = torch.stack([c(s, a) for c in critics])
        assert torch.allclose(min_q(critics, s, a), stacked.min(0).values)


class TestLossValues:
    def test_value_loss_zero_at_exact_target(self):
        actor, critics, _ = toy_nets()
        s = torch.randn(5, TOY.obs_len)
        eps = torch.randn(5, TOY.action_len)

        class OracleValue(torch.nn.Module):
            def forward(self, states):
                out = actor.sample(states, eps)
                return min_q(critics, states, out.action) - 0.2 * out.log_prob

        loss = value_loss(OracleValue(), critics, actor, s,
                          temperature=0.2, noise=eps)
        assert float(loss.detach()) == pytest.approx(0.0, abs=1e-10)

    def test_q_loss_zero_residual(self):
        _, critics, _ = toy_nets()
        s = torch.randn(5, TOY.obs_len)
        a = torch.randn(5, TOY.action_len)
        q_hat = critics[0](s, a)
        assert float(q_loss(critics[0], s, a, q_hat).detach()) == pytest.approx(0.0)

    def test_losses_finite(self):
        actor, critics, value = toy_nets()
        s = torch.randn(8, TOY.obs_len)
        a = torch.randn(8, TOY.action_len)
        q_hat = q_targets(torch.randn(8), torch.zeros(8),
                          value(s), gamma=0.9)
        for loss in (value_loss(value, critics, actor, s, 0.2),
                     q_loss(critics[0], s, a, q_hat),
                     policy_loss(actor, critics, s, 0.2)):
            assert torch.isfinite(loss)

    def test_td_errors_shape_and_sign(self):
        _, critics, _ = toy_nets()
        s = torch.randn(6, TOY.obs_len)
        a = torch.randn(6, TOY.action_len)
        errs = td_errors(critics, s, a, torch.zeros(6))
        assert errs.shape == (6,)
        assert torch.all(errs >= 0)


class TestZeroTemperatureGradient:
    def test_policy_gradient_matches_dpg_on_quadratic_q(self):
        # with zero entropy temperature, fixed critics, and zero noise the
        # reparameterized gradient must equal the deterministic
        # policy-gradient chain through dQ/da
        torch.manual_seed(7)
        target = torch.linspace(-1.0, 1.0, TOY.action_len)

        class QuadraticQ(torch.nn.Module):
            def forward(self, s, a):
                return -((a - target) ** 2).sum(dim=-1)

        actor = MlpActor(TOY, hidden=8)
        critics = [QuadraticQ()] * 3
        s = torch.randn(6, TOY.obs_len)
        zeros = torch.zeros(6, TOY.action_len)

        loss = policy_loss(actor, critics, s, temperature=0.0, noise=zeros)
        loss.backward()
        grad_rep = torch.cat([p.grad.reshape(-1).clone()
                              for p in actor.parameters()])

        for p in actor.parameters():
            p.grad = None
        out = actor.sample(s, noise=zeros)
        dq_da = 2.0 * (out.action - target)          # d(-Q)/da, detached
        surrogate = (out.action * dq_da.detach()).sum(dim=-1).mean()
        surrogate.backward()
        grad_dpg = torch.cat([p.grad.reshape(-1) for p in actor.parameters()])

        assert torch.allclose(grad_rep, grad_dpg, atol=1e-6)


class TestPolyak:
    def test_full_copy(self):
        _, critics, _ = toy_nets()
        target = copy.deepcopy(critics[1])
        polyak_update(target, critics[0], tau=1.0)
        for t, o in zip(target.parameters(), critics[0].parameters()):
            assert torch.equal(t, o)

    def test_frozen(self):
        _, critics, _ = toy_nets()
        target = copy.deepcopy(critics[1])
        before = [p.clone() for p in target.parameters()]
        polyak_update(target, critics[0], tau=0.0)
        for t, b in zip(target.parameters(), before):
            assert torch.equal(t, b)

    def test_midpoint(self):
        a = torch.nn.Linear(1, 1, bias=False)
        b = torch.nn.Linear(1, 1, bias=False)
        with torch.no_grad():
            a.weight.fill_(0.0)
            b.weight.fill_(2.0)
        polyak_update(a, b, tau=0.5)
        assert float(a.weight.detach()) == pytest.approx(1.0)

    def test_contraction_factor(self):
        _, critics, value = toy_nets()
        target = copy.deepcopy(critics[0])
        with torch.no_grad():
            for p in target.parameters():
                p.add_(torch.randn_like(p))
        tau = 0.3

        def dist():
            return sum(float(((t - o) ** 2).sum()) for t, o in
                       zip(target.parameters(), critics[0].parameters())) ** 0.5

        before = dist()
        polyak_update(target, critics[0], tau)
        assert dist() == pytest.approx((1 - tau) * before, rel=1e-6)

    def test_bad_tau(self):
        _, critics, _ = toy_nets()
        with pytest.raises(ValueError):
            polyak_update(critics[0], critics[1], tau=1.5)
