import numpy as np
import pytest
import torch
from torch import nn

from advtrack.policynet import fresh_policy
from advtrack.ppo import (
    PpoConfig,
    PpoError,
    RolloutBuffer,
    Transition,
    attach_returns,
    compute_advantages,
    ppo_loss,
    ppo_update,
)


class TestAdvantages:
    def test_single_step_zero_value(self):
        adv = compute_advantages([(None, 0, 0.7, 0.0)], 0.0, 0.9)
        assert adv == [pytest.approx(0.7)]

    def test_two_step_hand_value(self):
        rollout = [(None, 0, 1.0, 0.0), (None, 1, 1.0, 0.0)]
        adv = compute_advantages(rollout, 0.0, 0.9)
        assert adv[0] == pytest.approx(1.9, abs=1e-12)
        assert adv[1] == pytest.approx(1.0, abs=1e-12)

    def test_value_cancellation(self):
        rollout = [(None, 0, 0.0, 3.3)]
        adv = compute_advantages(rollout, 3.3, 1.0)
        assert adv == [pytest.approx(0.0, abs=1e-12)]

    def test_empty_rollout(self):
        with pytest.raises(PpoError):
            compute_advantages([], 0.0, 0.9)

    def test_attach_returns_matches(self):
        trs = [Transition(np.zeros((32, 32, 3)), 0, 1.0, 0.5, -1.0),
               Transition(np.zeros((32, 32, 3)), 1, 2.0, 0.25, -1.0)]
        attach_returns(trs, 0.5, 0.9)
        assert trs[1].ret == pytest.approx(2.0 + 0.9 * 0.5)
        assert trs[0].ret == pytest.approx(1.0 + 0.9 * trs[1].ret)


class _ToyNet(nn.Module):
    """Two-parameter policy/value head over the mean input intensity."""

    grid_size = 2

    def __init__(self):
        super().__init__()
        self.w_actor = nn.Parameter(torch.tensor(0.3, dtype=torch.float64))
        self.w_critic = nn.Parameter(torch.tensor(-0.2, dtype=torch.float64))

    def forward(self, x):
        s = x.mean(dim=(1, 2, 3)).to(torch.float64)
        logits = torch.stack([self.w_actor * s, -self.w_actor * s,
                              2 * self.w_actor * s, 0 * s], dim=1)
        return logits, self.w_critic * s


def _batch(rng, n=6):
    out = []
    for i in range(n):
        img = rng.normal(0, 60, (32, 32, 3))
        tr = Transition(state_image=img, action=int(rng.integers(0, 4)),
                        reward=float(rng.normal()), value=float(rng.normal()),
                        log_prob=float(np.log(rng.uniform(0.1, 0.5))))
        tr.ret = float(rng.normal())
        out.append(tr)
    return out


class TestPpoLoss:
    def test_ratio_one_gives_sum_of_advantages(self, rng):
        """With old log-probs equal to current ones the clipped surrogate
        degenerates to the plain sum of advantages."""
        net = _ToyNet()
        batch = _batch(rng)
        with torch.no_grad():
            states = torch.cat([
                torch.as_tensor(t.state_image, dtype=torch.float64)
                .permute(2, 0, 1).unsqueeze(0) / 255.0 for t in batch])
            logits, _ = net(states)
            logp = torch.log_softmax(logits, dim=-1)
            for t, row in zip(batch, logp):
                t.log_prob = float(row[t.action])
        cfg = PpoConfig(clip=0.2, entropy_coef=0.0)
        loss, stats = ppo_loss(net, batch, cfg, dtype=torch.float64)
        expected = sum(t.ret - t.value for t in batch)
        assert stats["actor_objective"] == pytest.approx(expected, rel=1e-9)
        assert stats["mean_ratio"] == pytest.approx(1.0, rel=1e-9)

    def test_clip_factor_hand_value(self):
        """ratio 1.5, clip 0.2, positive advantage -> 1.2 * A chosen."""
        ratio = torch.tensor([1.5], dtype=torch.float64)
        adv = torch.tensor([2.0], dtype=torch.float64)
        clipped = torch.clamp(ratio, 0.8, 1.2)
        surr = torch.minimum(ratio * adv, clipped * adv)
        assert surr.item() == 1.2 * 2.0

    def test_surrogate_never_exceeds_clip_bound(self, rng):
        net = _ToyNet()
        batch = _batch(rng, n=12)
        cfg = PpoConfig(clip=0.2)
        loss, stats = ppo_loss(net, batch, cfg, dtype=torch.float64)
        states = torch.cat([
            torch.as_tensor(t.state_image, dtype=torch.float64)
            .permute(2, 0, 1).unsqueeze(0) / 255.0 for t in batch])
        logits, values = net(states)
        logp = torch.log_softmax(logits, dim=-1)
        new_log = logp[range(len(batch)),
                       torch.tensor([t.action for t in batch])]
        old_log = torch.tensor([t.log_prob for t in batch],
                               dtype=torch.float64)
        ratio = torch.exp(new_log - old_log)
        adv = torch.tensor([t.ret - t.value for t in batch],
                           dtype=torch.float64)
        surr = torch.minimum(ratio * adv, torch.clamp(ratio, 0.8, 1.2) * adv)
        assert torch.all(surr <= (1 + cfg.clip) * adv.abs() + 1e-9)

    def test_gradient_matches_finite_differences(self, rng):
        net = _ToyNet()
        batch = _batch(rng, n=5)
        cfg = PpoConfig(clip=0.2, entropy_coef=0.0)

        loss, _ = ppo_loss(net, batch, cfg, dtype=torch.float64)
        loss.backward()
        analytic = [p.grad.item() for p in net.parameters()]

        h = 1e-6
        fd = []
        for p in net.parameters():
            with torch.no_grad():
                p += h
            up, _ = ppo_loss(net, batch, cfg, dtype=torch.float64)
            with torch.no_grad():
                p -= 2 * h
            dn, _ = ppo_loss(net, batch, cfg, dtype=torch.float64)
            with torch.no_grad():
                p += h
            fd.append(((up - dn) / (2 * h)).item())
        for a, b in zip(analytic, fd):
            assert a == pytest.approx(b, rel=1e-4, abs=1e-8)


class TestPpoUpdate:
    def test_improves_surrogate_on_real_network(self, rng):
        net = fresh_policy(2, 5)
        batch = []
        for i in range(8):
            img = rng.normal(0, 40, (32, 32, 3))
            from advtrack.policynet import policy_forward

            probs, value = policy_forward(net, img)
            a = int(rng.integers(0, 4))
            tr = Transition(state_image=img, action=a, reward=1.0,
                            value=value, log_prob=float(np.log(probs[a])))
            batch.append(tr)
        attach_returns(batch, 0.0, 0.9)
        buf = RolloutBuffer(capacity=100)
        buf.extend(batch)
        hist = ppo_update(net, buf, PpoConfig(epochs=4, lr=1e-3))
        assert len(hist) == 4
        assert all(np.isfinite(h["loss"]) for h in hist)

    def test_buffer_capacity_fifo(self):
        buf = RolloutBuffer(capacity=3)
        trs = [Transition(np.zeros((2, 2, 3)), i, 0.0, 0.0, 0.0)
               for i in range(5)]
        buf.extend(trs)
        assert [t.action for t in buf.transitions] == [2, 3, 4]

    def test_empty_buffer_rejected(self):
        with pytest.raises(PpoError):
            ppo_update(fresh_policy(2, 0), RolloutBuffer(), PpoConfig())
