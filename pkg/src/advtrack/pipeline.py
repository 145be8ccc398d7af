"""Full three-stage attack orchestration, ranking, budgets and reports.

Per video: one clean baseline query establishes the reference scores, the
generators fill a candidate pool, candidates are ranked by
``(trade-off, L-inf)`` ascending, and each of the top ``n`` goes through
patch selection (optional) and sign-based compression (when its masked form
still clears the adversarial gate). The best final candidate is reported
with exact per-stage query counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace as dc_replace

import numpy as np

from advtrack.budget import BudgetExceededError, QueryLedger
from advtrack.config import AttackConfig
from advtrack.generators import Candidate, momentum_generate, texture_candidates
from advtrack.metrics import (
    EvalParams,
    OpeCurves,
    ZeroBaselineError,
    ope_curves,
    safe_ratio,
    tp_score,
    track_scores,
)
from advtrack.patchsel import collect_episode, select_mask, state_tensor
from advtrack.policynet import PolicyNetwork, fresh_policy
from advtrack.ppo import RolloutBuffer, attach_returns, ppo_update
from advtrack.signattack import (
    InfeasibleDirectionError,
    ZeroDirectionError,
    sign_opt_run,
)
from advtrack.trackers import NccConfig, NccTracker, RemoteTracker, Tracker
from advtrack.video import Video, apply_delta, linf_distance, linf_norm, ssim, with_frame0


class PipelineError(Exception):
    pass


class EmptyCandidateSetError(PipelineError):
    pass


# Stage tags for the splittable seeding scheme: every stage of every video
# draws from rng(seed, video_index, TAG, ...), so stages replay
# independently.
TAG_MOMENTUM = 1
TAG_TEXTURE = 2
TAG_SELECT = 3
TAG_SIGN = 4
TAG_POLICY = 5


def stage_rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence([int(seed) & 0xFFFFFFFF] + [int(k) for k in key]))


@dataclass(frozen=True)
class MetricBlock:
    accuracy: float
    robustness: float
    success_auc: float
    precision_at_20: float


@dataclass
class AttackReport:
    video_id: str
    n_frames: int
    seed: int
    attack_failed: bool
    clean: MetricBlock
    adversarial: MetricBlock
    tp_final: float
    linf_final: float
    ssim_final: float
    queries: dict
    success_curve_clean: list
    success_curve_adv: list
    traces: dict
    config: dict
    adv_frame0: np.ndarray | None = None  # not serialized


def make_tracker(config: AttackConfig, workdir: str = ".") -> Tracker:
    if config.backend == "ncc":
        return NccTracker(NccConfig(search_radius=config.search_radius))
    if config.backend == "remote":
        if not config.remote_addr:
            raise PipelineError("remote backend needs remote_addr")
        return RemoteTracker(config.remote_addr, workdir)
    raise PipelineError(f"unknown backend {config.backend!r}")


def rank_candidates(entries, tracker, video: Video, reference,
                    clean_baseline, eval_params: EvalParams, iota: float,
                    n: int | None = None, charge=None) -> list[Candidate]:
    """Ascending (trade-off, L-inf) ranking; unscored entries cost one
    query each. Ties keep generation order."""
    if not entries:
        raise EmptyCandidateSetError("no candidates to rank")
    a_clean, r_clean = clean_baseline
    scored = []
    for cand in entries:
        if math.isinf(cand.tp):
            try:
                if charge is not None:
                    charge()
            except BudgetExceededError:
                continue
            frame = apply_delta(video.frame0, cand.delta)
            result = tracker.track(with_frame0(video, frame), reference[0])
            a, r = track_scores(result, reference, eval_params)
            cand.tp = tp_score(a_clean, r_clean, a, r, iota)
            cand.accuracy, cand.robustness = a, r
            cand.result = result
            cand.exact = True
        scored.append(cand)
    ranked = sorted(scored, key=lambda c: (c.tp, c.linf))
    return ranked if n is None else ranked[:n]


@dataclass
class _Processed:
    candidate: Candidate
    delta: np.ndarray
    accuracy: float
    robustness: float
    result: object
    tp_final: float
    stage: str               # raw | masked | sign
    live_cells: int | None = None
    gate_value: float | None = None
    sign_trace: object = None
    selection_trace: list = field(default_factory=list)


def _exact_score(cand: Candidate, tracker, video, reference, eval_params,
                 clean_baseline, iota, charge) -> None:
    """Candidate-baseline query: score this exact delta (Alg-2-style
    per-candidate baseline before masking)."""
    if cand.exact:
        return
    charge()
    frame = apply_delta(video.frame0, cand.delta)
    result = tracker.track(with_frame0(video, frame), reference[0])
    a, r = track_scores(result, reference, eval_params)
    a_clean, r_clean = clean_baseline
    cand.accuracy, cand.robustness = a, r
    cand.result = result
    cand.tp = tp_score(a_clean, r_clean, a, r, iota)
    cand.exact = True


def _finetune_policy(net, ranked, tracker, video, config, reference,
                     clean_baseline, rng, ledger) -> int:
    """Per-video policy refresh on the ranked candidates; returns queries."""
    episodes = config.ppo.finetune_episodes
    if episodes <= 0 or not ranked:
        return 0
    before = ledger.counts["selection"]
    buffer = RolloutBuffer(capacity=config.ppo.capacity)
    optimizer = None
    charge = ledger.charger("selection")
    try:
        for e in range(episodes):
            cand = ranked[e % len(ranked)]
            _exact_score(cand, tracker, video, reference, config.eval,
                         clean_baseline, config.momentum.iota, charge)
            transitions, bootstrap, _ = collect_episode(
                tracker, video, cand.delta, net, config.terminal, config.eval,
                (cand.accuracy, cand.robustness), reference, rng, charge)
            if transitions:
                attach_returns(transitions, bootstrap, config.ppo.discount)
                buffer.extend(transitions)
    except BudgetExceededError:
        pass
    if len(buffer):
        ppo_update(net, buffer, config.ppo, optimizer)
    return ledger.counts["selection"] - before


def run_attack(video: Video, config: AttackConfig, tracker: Tracker | None = None,
               policy: PolicyNetwork | None = None, donor_pool=None,
               video_index: int = 0) -> AttackReport:
    """Attack one video end to end; deterministic given (bytes, config, seed)."""
    if tracker is None:
        tracker = make_tracker(config)
    ledger = QueryLedger(config.budget)
    reference = video.gt_boxes
    if reference is None:
        raise PipelineError("video carries no ground truth; OPE needs an "
                            "initial box")
    ledger.charge("generator")
    clean_result = tracker.track(video, reference[0])
    a_clean, r_clean = track_scores(clean_result, reference, config.eval)
    if a_clean <= 0.0:
        raise ZeroBaselineError("clean accuracy is zero; nothing to attack")
    clean_curves = ope_curves(clean_result, reference)
    baseline = (a_clean, r_clean)

    pool: list[Candidate] = []
    traces: dict = {"momentum_tp": [], "candidates": [], "sign_g": [],
                    "sign_best_g": []}
    n_tex = config.pool_size // 2 if donor_pool else 0
    n_mom = config.pool_size - n_tex
    if n_mom > 0:
        mset = momentum_generate(
            tracker, video, config.momentum,
            stage_rng(config.seed, video_index, TAG_MOMENTUM), config.eval,
            reference=reference, baseline=baseline, max_entries=n_mom,
            charge=ledger.charger("generator"))
        pool.extend(mset.entries)
        traces["momentum_tp"] = list(mset.tp_trace)
    if n_tex > 0:
        donors = [d for d in donor_pool if d is not video]
        if donors:
            tset = texture_candidates(
                video, donors, config.momentum,
                stage_rng(config.seed, video_index, TAG_TEXTURE), count=n_tex)
            pool.extend(tset.entries)
    for i, cand in enumerate(pool):
        cand.order = i

    if not pool:
        return _failed_report(video, config, clean_curves, baseline, ledger,
                              traces)

    ranked = rank_candidates(
        pool, tracker, video, reference, baseline, config.eval,
        config.momentum.iota, n=config.n_candidates,
        charge=ledger.charger("generator"))

    net = policy
    if config.selection_enabled:
        if net is None:
            net = fresh_policy(config.grid_size,
                               stage_rng(config.seed, TAG_POLICY)
                               .integers(0, 2**31))
        _finetune_policy(net, ranked, tracker, video, config, reference,
                         baseline, stage_rng(config.seed, video_index,
                                             TAG_POLICY), ledger)

    processed: list[_Processed] = []
    for idx, cand in enumerate(ranked):
        try:
            _exact_score(cand, tracker, video, reference, config.eval,
                         baseline, config.momentum.iota,
                         ledger.charger("selection"))
        except BudgetExceededError:
            continue
        entry = _Processed(
            candidate=cand, delta=cand.delta, accuracy=cand.accuracy,
            robustness=cand.robustness, result=cand.result,
            tp_final=cand.tp, stage="raw")
        cand_baseline = (cand.accuracy, cand.robustness)

        if config.selection_enabled:
            state, sel_trace, _ = select_mask(
                tracker, video, cand.delta, net, config.terminal, config.eval,
                cand_baseline, reference,
                charge=ledger.charger("selection"))
            masked_delta = state_tensor(state)
            m_acc = state.accuracy if not math.isnan(state.accuracy) else cand.accuracy
            m_rob = state.robustness if not math.isnan(state.robustness) else cand.robustness
            m_result = state.result if state.result is not None else cand.result
            entry = dc_replace(
                entry, delta=masked_delta, accuracy=m_acc, robustness=m_rob,
                result=m_result,
                tp_final=tp_score(a_clean, r_clean, m_acc, m_rob,
                                  config.momentum.iota),
                stage="masked", live_cells=state.mask.live_cells,
                selection_trace=sel_trace)

        # Stage-(c) entry gate: the masked perturbation must itself still be
        # adversarial against the clean baseline, since boundary descent
        # needs an adversarial starting point.
        gate = (config.eval.gamma * safe_ratio(entry.accuracy, a_clean)
                + (1.0 - config.eval.gamma)
                * safe_ratio(r_clean, entry.robustness))
        entry.gate_value = gate

        if gate >= config.kappa and linf_norm(entry.delta) > 0.0:
            try:
                res = sign_opt_run(
                    tracker, video, entry.delta, config.sign, config.eval,
                    baseline, reference, config.momentum.epsilon,
                    stage_rng(config.seed, video_index, TAG_SIGN, idx),
                    kappa=config.kappa, charge=ledger.charger("sign"))
                if res.g_best <= config.momentum.epsilon:
                    entry = dc_replace(
                        entry, delta=res.delta, accuracy=res.accuracy,
                        robustness=res.robustness, result=res.result,
                        tp_final=tp_score(a_clean, r_clean, res.accuracy,
                                          res.robustness, config.momentum.iota),
                        stage="sign", sign_trace=res.trace)
            except (InfeasibleDirectionError, ZeroDirectionError,
                    BudgetExceededError):
                pass
        processed.append(entry)

    if not processed:
        return _failed_report(video, config, clean_curves, baseline, ledger,
                              traces)

    order = sorted(range(len(processed)),
                   key=lambda i: (processed[i].tp_final,
                                  linf_norm(processed[i].delta), i))
    winner = processed[order[0]]
    traces["candidates"] = [
        {"rank": i, "source": p.candidate.source, "stage": p.stage,
         "tp_final": p.tp_final, "linf": linf_norm(p.delta),
         "gate": p.gate_value, "live_cells": p.live_cells,
         "selection_steps": len(p.selection_trace)}
        for i, p in enumerate(processed)]
    if winner.sign_trace is not None:
        traces["sign_g"] = list(winner.sign_trace.g_values)
        traces["sign_best_g"] = list(winner.sign_trace.best_g)

    # The attack failed when the winning candidate's verified track is
    # indistinguishable from the clean one (nothing was perturbed into a
    # different outcome), e.g. against a backend that never looks at the
    # initial frame.
    if winner.result.boxes == clean_result.boxes:
        return _failed_report(video, config, clean_curves, baseline, ledger,
                              traces)

    adv_frame0 = apply_delta(video.frame0, winner.delta)
    adv_curves = ope_curves(winner.result, reference)
    queries = dict(ledger.counts)
    queries["total"] = ledger.total
    return AttackReport(
        video_id=video.video_id, n_frames=video.n_frames, seed=config.seed,
        attack_failed=False,
        clean=MetricBlock(a_clean, r_clean, clean_curves.success_auc,
                          clean_curves.precision_at_20),
        adversarial=MetricBlock(winner.accuracy, winner.robustness,
                                adv_curves.success_auc,
                                adv_curves.precision_at_20),
        tp_final=winner.tp_final,
        linf_final=linf_distance(adv_frame0, video.frame0),
        ssim_final=ssim(video.frame0, adv_frame0),
        queries=queries,
        success_curve_clean=list(clean_curves.success_curve),
        success_curve_adv=list(adv_curves.success_curve),
        traces=traces, config=_config_echo(config), adv_frame0=adv_frame0)


def _failed_report(video, config, clean_curves: OpeCurves, baseline, ledger,
                   traces) -> AttackReport:
    a_clean, r_clean = baseline
    queries = dict(ledger.counts)
    queries["total"] = ledger.total
    block = MetricBlock(a_clean, r_clean, clean_curves.success_auc,
                        clean_curves.precision_at_20)
    return AttackReport(
        video_id=video.video_id, n_frames=video.n_frames, seed=config.seed,
        attack_failed=True, clean=block, adversarial=block,
        tp_final=1.0, linf_final=0.0, ssim_final=1.0, queries=queries,
        success_curve_clean=list(clean_curves.success_curve),
        success_curve_adv=list(clean_curves.success_curve),
        traces=traces, config=_config_echo(config), adv_frame0=None)


def _config_echo(config: AttackConfig) -> dict:
    flat = config.flat()
    return {k: flat[k] for k in sorted(flat)}


def run_corpus(videos, config: AttackConfig, tracker: Tracker | None = None,
               policy: PolicyNetwork | None = None) -> list[AttackReport]:
    """Attack every corpus video sequentially with shared donors/policy."""
    if tracker is None:
        tracker = make_tracker(config)
    net = policy
    if net is None and config.selection_enabled:
        net = fresh_policy(config.grid_size,
                           stage_rng(config.seed, TAG_POLICY).integers(0, 2**31))
    reports = []
    for i, video in enumerate(videos):
        reports.append(run_attack(video, config, tracker=tracker, policy=net,
                                  donor_pool=videos, video_index=i))
    return reports


def train_policy(videos, config: AttackConfig, episodes: int,
                 tracker: Tracker | None = None, seed: int | None = None
                 ) -> tuple[PolicyNetwork, dict]:
    """Pretrain the selection policy on seeded heavy perturbations.

    Each episode perturbs one corpus video with a random max-magnitude sign
    pattern, establishes its baseline with one query, then collects one
    sampled selection episode. Updates run on a rolling buffer after every
    episode batch of four.
    """
    if tracker is None:
        tracker = make_tracker(config)
    seed = config.seed if seed is None else seed
    rng = stage_rng(seed, TAG_POLICY, 1)
    net = fresh_policy(config.grid_size, stage_rng(seed, TAG_POLICY)
                       .integers(0, 2**31))
    buffer = RolloutBuffer(capacity=config.ppo.capacity)
    stats = {"episodes": 0, "queries": 0, "updates": 0}
    ledger = QueryLedger(None)
    charge = ledger.charger("selection")
    for e in range(episodes):
        video = videos[e % len(videos)]
        reference = video.gt_boxes
        delta = config.momentum.epsilon * np.sign(
            rng.standard_normal(video.frame0.shape))
        charge()
        frame = apply_delta(video.frame0, delta)
        result = tracker.track(with_frame0(video, frame), reference[0])
        a, r = track_scores(result, reference, config.eval)
        transitions, bootstrap, _ = collect_episode(
            tracker, video, delta, net, config.terminal, config.eval,
            (a, r), reference, rng, charge)
        if transitions:
            attach_returns(transitions, bootstrap, config.ppo.discount)
            buffer.extend(transitions)
        stats["episodes"] += 1
        if len(buffer) and (e + 1) % 4 == 0:
            ppo_update(net, buffer, config.ppo)
            stats["updates"] += 1
    if len(buffer) and stats["updates"] == 0:
        ppo_update(net, buffer, config.ppo)
        stats["updates"] += 1
    stats["queries"] = ledger.total
    return net, stats
