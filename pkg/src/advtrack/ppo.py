"""Clipped-surrogate policy optimization for the patch-selection agent.

The actor objective sums ``min(ratio * A, clip(ratio) * A)`` over stored
transitions; the critic is regressed to the exact finite-horizon discounted
return. Old-policy log-probabilities are frozen at collection time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn.functional as F

from advtrack.policynet import PolicyNetwork, state_to_tensor


class PpoError(Exception):
    pass


@dataclass(frozen=True)
class PpoConfig:
    epochs: int = 10
    clip: float = 0.2
    capacity: int = 500
    max_grad_norm: float = 0.5
    discount: float = 0.9
    lr: float = 3e-4
    entropy_coef: float = 0.0
    finetune_episodes: int = 2


@dataclass
class Transition:
    state_image: np.ndarray
    action: int
    reward: float
    value: float
    log_prob: float
    ret: float = 0.0


def compute_advantages(rollout, bootstrap_value: float, discount: float):
    """Exact discounted return minus the stored value, per step.

    ``rollout`` holds (state, action, reward, value) tuples in time order;
    ``bootstrap_value`` is the critic value of the state after the last
    transition.
    """
    if not rollout:
        raise PpoError("empty rollout")
    advantages = [0.0] * len(rollout)
    running = float(bootstrap_value)
    for t in range(len(rollout) - 1, -1, -1):
        reward = rollout[t][2]
        value = rollout[t][3]
        running = reward + discount * running
        advantages[t] = running - value
    return advantages


def attach_returns(transitions: list[Transition], bootstrap_value: float,
                   discount: float) -> None:
    """Fill each transition's discounted return in place."""
    running = float(bootstrap_value)
    for tr in reversed(transitions):
        running = tr.reward + discount * running
        tr.ret = running


@dataclass
class RolloutBuffer:
    capacity: int = 500
    transitions: list[Transition] = field(default_factory=list)

    def extend(self, episode: list[Transition]) -> None:
        self.transitions.extend(episode)
        overflow = len(self.transitions) - self.capacity
        if overflow > 0:
            del self.transitions[:overflow]

    def __len__(self) -> int:
        return len(self.transitions)


def ppo_loss(net: PolicyNetwork, batch: list[Transition], cfg: PpoConfig,
             dtype=torch.float32):
    """Total loss (minimized) plus a statistics dict.

    total = -sum(min(ratio * A, clip(ratio, 1-rho, 1+rho) * A))
            + 0.5 * MSE(value, return) - entropy_coef * mean entropy
    """
    if not batch:
        raise PpoError("empty batch")
    states = torch.cat([state_to_tensor(t.state_image, dtype=dtype) for t in batch])
    actions = torch.tensor([t.action for t in batch], dtype=torch.long)
    old_log = torch.tensor([t.log_prob for t in batch], dtype=dtype)
    returns = torch.tensor([t.ret for t in batch], dtype=dtype)
    advantages = returns - torch.tensor([t.value for t in batch], dtype=dtype)

    logits, values = net(states)
    log_probs = F.log_softmax(logits, dim=-1)
    new_log = log_probs.gather(1, actions.unsqueeze(1)).squeeze(1)
    ratio = torch.exp(new_log - old_log)
    clipped = torch.clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip)
    surrogate = torch.minimum(ratio * advantages, clipped * advantages)
    actor_obj = surrogate.sum()
    critic_mse = F.mse_loss(values, returns)
    entropy = -(log_probs.exp() * log_probs).sum(dim=-1).mean()
    total = -actor_obj + 0.5 * critic_mse - cfg.entropy_coef * entropy
    stats = {
        "actor_objective": float(actor_obj.item()),
        "critic_mse": float(critic_mse.item()),
        "entropy": float(entropy.item()),
        "mean_ratio": float(ratio.mean().item()),
    }
    return total, stats


def ppo_update(net: PolicyNetwork, buffer: RolloutBuffer, cfg: PpoConfig,
               optimizer: torch.optim.Optimizer | None = None) -> list[dict]:
    """Run ``cfg.epochs`` full-batch gradient steps over the buffer."""
    if len(buffer) == 0:
        raise PpoError("empty buffer")
    if optimizer is None:
        optimizer = torch.optim.Adam(net.parameters(), lr=cfg.lr)
    net.train()
    history = []
    for _ in range(cfg.epochs):
        optimizer.zero_grad()
        loss, stats = ppo_loss(net, buffer.transitions, cfg)
        loss.backward()
        torch.nn.utils.clip_grad_norm_(net.parameters(), cfg.max_grad_norm)
        optimizer.step()
        stats["loss"] = float(loss.item())
        history.append(stats)
    return history
