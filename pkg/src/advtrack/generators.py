"""Stage (a): heavy perturbation candidates for the initial frame.

Two samplers fill the candidate pool. The momentum sampler probes random
directions around the running adversarial frame, keeps whichever probe
lowers the tracking-performance trade-off, and walks the frame along the
sign of the momentum-accumulated direction in steps of ``epsilon/k``. The
texture sampler imports saliency-masked pixel differences from donor
videos. Either way every emitted delta stays inside the L-inf epsilon
ball.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from advtrack.budget import BudgetExceededError, no_charge
from advtrack.metrics import (
    EvalParams,
    TrackResult,
    ZeroBaselineError,
    tp_score,
    track_scores,
)
from advtrack.saliency import spectral_residual_saliency
from advtrack.video import Video, apply_delta, linf_norm, with_frame0


class GeneratorError(Exception):
    pass


class EmptyDonorPoolError(GeneratorError):
    pass


@dataclass(frozen=True)
class MomentumConfig:
    epsilon: float = 64.0
    candidates: int = 15      # probes per outer iteration
    iterations: int = 128     # outer-iteration cap; step size is epsilon/iterations
    mu: float = 0.5
    iota: float = 0.4

    def __post_init__(self):
        if self.epsilon <= 0:
            raise GeneratorError("epsilon must be positive")
        if self.candidates < 1 or self.iterations < 1:
            raise GeneratorError("candidates and iterations must be >= 1")
        if not (0.0 <= self.mu < 1.0):
            raise GeneratorError("momentum factor must lie in [0, 1)")
        if not (0.0 <= self.iota <= 1.0):
            raise GeneratorError("iota must lie in [0, 1]")

    @property
    def step(self) -> float:
        return self.epsilon / self.iterations


@dataclass
class Candidate:
    """One heavy-perturbation candidate plus its best-known scoring.

    ``exact`` records whether (accuracy, robustness, result) came from
    querying this very delta; momentum candidates inherit scores from the
    probe that drove their step and need re-scoring before use as an
    episode baseline.
    """

    delta: np.ndarray
    tp: float
    linf: float
    source: str
    order: int
    accuracy: float = math.nan
    robustness: float = math.nan
    result: TrackResult | None = None
    exact: bool = False


@dataclass
class CandidateSet:
    entries: list[Candidate] = field(default_factory=list)
    queries_spent: int = 0
    tp_trace: list[float] = field(default_factory=list)


def momentum_generate(tracker, video: Video, cfg: MomentumConfig,
                      rng: np.random.Generator, eval_params: EvalParams,
                      reference=None, baseline=None, max_entries: int | None = None,
                      charge=no_charge) -> CandidateSet:
    """Momentum-guided random walk toward tracking-breaking initial frames.

    Per outer iteration: ``C`` Gaussian probes are scored by one tracker
    query each; a probe that improves the best trade-off so far replaces
    the momentum direction. The frame then steps by ``epsilon/k`` along the
    sign of the momentum direction and the running frame joins the
    candidate set. The loop stops as soon as the latest accepted probe
    reduced robustness below clean, the epsilon ball is exhausted, or ``k``
    iterations have run.

    ``baseline`` is an optional precomputed ``(accuracy, robustness)`` of
    the clean track; without it one extra query establishes it.
    """
    if reference is None:
        reference = video.gt_boxes
    if reference is None:
        raise GeneratorError("need ground truth or a reference track")
    init_box = reference[0]
    queries = 0
    if baseline is None:
        charge()
        queries += 1
        clean = tracker.track(video, init_box)
        a_clean, r_clean = track_scores(clean, reference, eval_params)
    else:
        a_clean, r_clean = baseline
    if a_clean <= 0.0:
        raise ZeroBaselineError("clean accuracy is zero; nothing to attack")

    frame0 = video.frame0
    shape = frame0.shape
    delta = np.zeros(shape, dtype=np.float64)
    g_opt = None
    tp_best = 1.0
    last = None           # (accuracy, robustness, result) of last accepted probe
    r_latest = r_clean
    entries: list[Candidate] = []
    trace: list[float] = []

    for it in range(cfg.iterations):
        if r_latest < r_clean:
            break
        if linf_norm(delta) >= cfg.epsilon:
            break
        iter_best = None  # (tp, direction) fallback when nothing improves
        stop = False
        for _ in range(cfg.candidates):
            noise = rng.standard_normal(shape)
            direction = noise / linf_norm(noise)
            try:
                charge()
            except BudgetExceededError:
                stop = True
                break
            queries += 1
            probe = apply_delta(frame0, delta + noise)
            result = tracker.track(with_frame0(video, probe), init_box)
            a, r = track_scores(result, reference, eval_params)
            tp = tp_score(a_clean, r_clean, a, r, cfg.iota)
            if iter_best is None or tp < iter_best[0]:
                iter_best = (tp, direction)
            if tp < tp_best:
                g_opt = direction if g_opt is None else cfg.mu * g_opt + direction
                tp_best = tp
                last = (a, r, result)
                r_latest = r
        if stop:
            break
        if g_opt is None:
            # No probe has ever improved the trade-off; adopt this
            # iteration's best direction so the walk can move at all.
            g_opt = iter_best[1]
        delta = np.clip(delta + cfg.step * np.sign(g_opt),
                        -cfg.epsilon, cfg.epsilon)
        a, r, result = last if last is not None else (math.nan, math.nan, None)
        entries.append(Candidate(
            delta=delta.copy(), tp=tp_best, linf=linf_norm(delta),
            source="momentum", order=it, accuracy=a, robustness=r,
            result=result, exact=False))
        trace.append(tp_best)

    return CandidateSet(entries=_cap_entries(entries, max_entries),
                        queries_spent=queries, tp_trace=trace)


def _cap_entries(entries, max_entries):
    """Cap the walk's snapshot set.

    The trade-off label of a snapshot comes from the probe that last
    improved it, so the snapshot taken right after an improvement is the
    one closest to what was actually measured. Keep the first snapshot of
    each improving label, newest labels first, then fill with the most
    recent snapshots.
    """
    if max_entries is None or len(entries) <= max_entries:
        return list(entries)
    label_firsts = []
    seen = set()
    for c in entries:
        if c.tp < 1.0 and c.tp not in seen:
            seen.add(c.tp)
            label_firsts.append(c)
    picks = label_firsts[-max_entries:]
    chosen = {c.order for c in picks}
    for c in reversed(entries):
        if len(picks) >= max_entries:
            break
        if c.order not in chosen:
            picks.append(c)
            chosen.add(c.order)
    picks.sort(key=lambda c: c.order)
    return picks


def _resize_rgb(frame: np.ndarray, width: int, height: int) -> np.ndarray:
    if frame.shape[0] == height and frame.shape[1] == width:
        return frame
    im = Image.fromarray(frame, mode="RGB")
    return np.asarray(im.resize((width, height), Image.BILINEAR), dtype=np.uint8)


def texture_candidates(video: Video, donor_pool, cfg: MomentumConfig,
                       rng: np.random.Generator, count: int | None = None
                       ) -> CandidateSet:
    """Saliency-masked pixel differences imported from donor first frames.

    Each sampled donor contributes ``clip((d0 - v0) * mask, -eps, eps)``
    where the mask is the donor frame's own saliency mask. Candidates carry
    an infinite trade-off sentinel until the pipeline scores them.
    """
    donors = list(donor_pool)
    if not donors:
        raise EmptyDonorPoolError("texture generator needs donor videos")
    if count is None:
        count = cfg.candidates
    picks = rng.permutation(len(donors))[:count]
    v0 = video.frame0.astype(np.float64)
    entries = []
    for order, idx in enumerate(picks):
        d0 = _resize_rgb(donors[int(idx)].frame0, video.width, video.height)
        mask = spectral_residual_saliency(d0).mask.astype(np.float64)
        delta = np.clip((d0.astype(np.float64) - v0) * mask[..., None],
                        -cfg.epsilon, cfg.epsilon)
        entries.append(Candidate(
            delta=delta, tp=math.inf, linf=linf_norm(delta),
            source="texture", order=order, exact=False))
    return CandidateSet(entries=entries, queries_spent=0)
