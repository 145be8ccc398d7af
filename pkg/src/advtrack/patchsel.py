"""Stage (b): the key-patch-selection decision process.

The perturbation is split into a P x P grid; the agent repeatedly zeroes
the least important cell. An episode ends when an action repeats, when the
masked perturbation lets accuracy recover beyond ``tau1`` times the
unmasked baseline, or when its robustness ratio falls below ``tau2``.
Greedy rollouts return the last mask whose masked perturbation was still an
acceptable attack.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from advtrack.budget import BudgetExceededError, no_charge
from advtrack.metrics import EvalParams, TrackResult, safe_ratio, track_scores
from advtrack.policynet import PolicyNetwork, policy_forward
from advtrack.ppo import Transition
from advtrack.video import Video, apply_delta, with_frame0


class PatchSelectError(Exception):
    pass


class InvalidActionError(PatchSelectError):
    pass


@dataclass(frozen=True)
class TerminalParams:
    tau1: float = 1.5
    tau2: float = 0.4


def cell_edges(extent: int, grid: int) -> np.ndarray:
    """Balanced 1-D partition boundaries: first ``extent % grid`` cells get
    the extra pixel."""
    base, rem = divmod(extent, grid)
    sizes = np.full(grid, base, dtype=np.int64)
    sizes[:rem] += 1
    return np.concatenate([[0], np.cumsum(sizes)])


@dataclass(frozen=True)
class PatchMask:
    grid_size: int
    cells: np.ndarray  # (P, P) of {0, 1}

    def __post_init__(self):
        if self.cells.shape != (self.grid_size, self.grid_size):
            raise PatchSelectError("mask shape does not match grid size")
        self.cells.setflags(write=False)

    @classmethod
    def all_ones(cls, grid_size: int) -> "PatchMask":
        return cls(grid_size, np.ones((grid_size, grid_size), dtype=np.int64))

    def without_cell(self, action: int) -> "PatchMask":
        cells = self.cells.copy()
        cells[divmod(action, self.grid_size)] = 0
        return PatchMask(self.grid_size, cells)

    def upsample(self, height: int, width: int) -> np.ndarray:
        """Nearest-neighbor expansion to pixel resolution."""
        ye = cell_edges(height, self.grid_size)
        xe = cell_edges(width, self.grid_size)
        out = np.zeros((height, width), dtype=np.float64)
        for r in range(self.grid_size):
            for c in range(self.grid_size):
                out[ye[r]:ye[r + 1], xe[c]:xe[c + 1]] = self.cells[r, c]
        return out

    @property
    def live_cells(self) -> int:
        return int(self.cells.sum())


@dataclass(frozen=True)
class MdpState:
    """Perturbation, current mask, action history, and (when measured) the
    tracking scores of this masked perturbation."""

    delta: np.ndarray
    mask: PatchMask
    taken: tuple[int, ...] = ()
    accuracy: float = math.nan
    robustness: float = math.nan
    result: TrackResult | None = None

    @classmethod
    def initial(cls, delta: np.ndarray, grid_size: int,
                accuracy: float = math.nan, robustness: float = math.nan,
                result: TrackResult | None = None) -> "MdpState":
        return cls(delta=delta, mask=PatchMask.all_ones(grid_size),
                   taken=(), accuracy=accuracy, robustness=robustness,
                   result=result)


def state_tensor(state: MdpState) -> np.ndarray:
    """Masked perturbation image: delta times the upsampled cell mask."""
    h, w = state.delta.shape[:2]
    return state.delta * state.mask.upsample(h, w)[..., None]


def apply_action(state: MdpState, action: int) -> MdpState:
    """Zero the chosen cell; repeats leave the mask unchanged but are
    recorded so terminal logic can fire."""
    if not (0 <= action < state.mask.grid_size ** 2):
        raise InvalidActionError(f"action {action} outside grid")
    mask = state.mask if action in state.taken else state.mask.without_cell(action)
    return MdpState(delta=state.delta, mask=mask,
                    taken=state.taken + (action,))


def step_env(tracker, video: Video, state: MdpState, action: int,
             terminal: TerminalParams, eval_params: EvalParams,
             baseline: tuple[float, float], reference,
             charge=no_charge) -> tuple[MdpState, float, bool, int]:
    """One environment transition.

    ``baseline`` is (accuracy, robustness) of the fully unmasked
    perturbation. Reward cases: 0 on a repeated action (terminal, free);
    -1 when the masked attack drifted outside the ratio bounds (terminal);
    otherwise the trade-off of how much attack strength the mask kept.
    """
    if action in state.taken:
        return apply_action(state, action), 0.0, True, 0
    nxt = apply_action(state, action)
    charge()
    frame = apply_delta(video.frame0, state_tensor(nxt))
    result = tracker.track(with_frame0(video, frame), reference[0])
    a, r = track_scores(result, reference, eval_params)
    nxt = replace(nxt, accuracy=a, robustness=r, result=result)
    a_base, r_base = baseline
    if safe_ratio(a, a_base) > terminal.tau1 or safe_ratio(r, r_base) < terminal.tau2:
        return nxt, -1.0, True, 1
    reward = (eval_params.gamma * safe_ratio(a_base, a)
              + (1.0 - eval_params.gamma) * safe_ratio(r, r_base))
    return nxt, reward, False, 1


def _argmax_policy(net: PolicyNetwork):
    def choose(state: MdpState) -> int:
        probs, _ = policy_forward(net, state_tensor(state))
        return int(np.argmax(probs))
    return choose


def select_mask(tracker, video: Video, delta: np.ndarray, policy,
                terminal: TerminalParams, eval_params: EvalParams,
                baseline: tuple[float, float], reference,
                charge=no_charge, max_steps: int | None = None):
    """Greedy episode: argmax actions until terminal.

    ``policy`` is either a PolicyNetwork (argmax over its action
    distribution) or any callable mapping the full MdpState to a cell
    index. Returns ``(final_state, trace, queries)`` where the final state
    is the last one whose masked perturbation still satisfied the
    non-terminal reward branch (its scores are attached).
    """
    choose = _argmax_policy(policy) if isinstance(policy, PolicyNetwork) else policy
    a0, r0 = baseline
    state = MdpState.initial(delta, _grid_of(policy), accuracy=a0,
                             robustness=r0)
    best = state
    trace = []
    queries = 0
    limit = max_steps if max_steps is not None else state.mask.grid_size ** 2 + 1
    for _ in range(limit):
        action = int(choose(state))
        try:
            nxt, reward, done, spent = step_env(
                tracker, video, state, action, terminal, eval_params,
                baseline, reference, charge)
        except BudgetExceededError:
            break
        queries += spent
        trace.append({"action": action, "reward": reward, "terminal": done,
                      "queries": spent})
        if done:
            break
        state = nxt
        best = nxt
    return best, trace, queries


def _grid_of(policy) -> int:
    if isinstance(policy, PolicyNetwork):
        return policy.grid_size
    grid = getattr(policy, "grid_size", None)
    if grid is None:
        raise PatchSelectError("bare policies must expose grid_size")
    return int(grid)


def collect_episode(tracker, video: Video, delta: np.ndarray,
                    net: PolicyNetwork, terminal: TerminalParams,
                    eval_params: EvalParams, baseline: tuple[float, float],
                    reference, rng: np.random.Generator,
                    charge=no_charge, max_steps: int | None = None
                    ) -> tuple[list[Transition], float, int]:
    """Sampled episode for training; returns (transitions, bootstrap value,
    queries spent)."""
    a0, r0 = baseline
    state = MdpState.initial(delta, net.grid_size, accuracy=a0, robustness=r0)
    transitions: list[Transition] = []
    queries = 0
    limit = max_steps if max_steps is not None else net.grid_size ** 2 + 1
    bootstrap = 0.0
    for _ in range(limit):
        image = state_tensor(state)
        probs, value = policy_forward(net, image)
        action = int(rng.choice(probs.size, p=probs / probs.sum()))
        try:
            nxt, reward, done, spent = step_env(
                tracker, video, state, action, terminal, eval_params,
                baseline, reference, charge)
        except BudgetExceededError:
            break
        queries += spent
        transitions.append(Transition(
            state_image=image, action=action, reward=reward, value=value,
            log_prob=float(np.log(max(probs[action], 1e-12)))))
        if done:
            _, bootstrap = policy_forward(net, state_tensor(nxt))
            break
        state = nxt
    else:
        _, bootstrap = policy_forward(net, state_tensor(state))
    return transitions, bootstrap, queries
