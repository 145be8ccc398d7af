"""Stage (c): hard-label magnitude compression along a search direction.

For a unit direction ``phi`` (L-inf normalized, so the scale parameter is
measured directly in intensity units), ``g(phi)`` is the smallest magnitude
``lambda`` at which ``v0 + lambda * phi`` still counts as adversarial,
i.e. its boundary trade-off against the clean baseline reaches the
``kappa`` threshold. ``g`` is evaluated by bracketing plus bisection, its
gradient is estimated from sign comparisons over Gaussian probes, and the
direction descends for a fixed number of iterations while the best
``(g, phi)`` pair is tracked.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from advtrack.budget import no_charge
from advtrack.metrics import EvalParams, TrackResult, ar_score, kappa_threshold, track_scores
from advtrack.video import Video, apply_delta, linf_norm, with_frame0


class SignAttackError(Exception):
    pass


class InfeasibleDirectionError(SignAttackError):
    """No adversarial point along this direction within lambda_max."""


class ZeroDirectionError(SignAttackError):
    pass


@dataclass(frozen=True)
class SignOptConfig:
    probes: int = 100          # Gaussian directions per gradient estimate
    rho_d: float = 0.01        # smoothing radius for probes
    alpha: float = 0.2         # direction step size
    iterations: int = 60       # descent iterations
    bs_tolerance: float = 1.0  # binary-search bracket width, intensity units
    lambda_max_factor: float = 3.0  # search ceiling as a multiple of epsilon
    stall_limit: int = 3       # halve alpha after this many non-improving steps

    def lambda_max(self, epsilon: float) -> float:
        return self.lambda_max_factor * epsilon


def normalize_linf(direction: np.ndarray) -> np.ndarray:
    n = linf_norm(direction)
    if n == 0.0:
        raise ZeroDirectionError("cannot normalize a zero direction")
    return direction / n


def make_boundary_predicate(tracker, video: Video, clean_baseline,
                            reference, eval_params: EvalParams,
                            kappa: float, charge=no_charge):
    """Predicate(unit_phi, lam) -> (is_adversarial, scores).

    One tracker query on the quantized frame ``v0 + lam * phi``. The clean
    trade-off sits at 1; a perturbation counts as adversarial once the
    trade-off reaches ``kappa`` (accuracy crushed and/or robustness ratio
    blown up).
    """
    a_clean, r_clean = clean_baseline

    def predicate(unit_phi: np.ndarray, lam: float):
        charge()
        frame = apply_delta(video.frame0, lam * unit_phi)
        result = tracker.track(with_frame0(video, frame), reference[0])
        a, r = track_scores(result, reference, eval_params)
        ar = ar_score(a_clean, r_clean, a, r, eval_params.gamma)
        return ar >= kappa, (a, r, result)

    return predicate


def evaluate_boundary(tracker, video: Video, phi: np.ndarray, lam: float,
                      clean_baseline, reference, eval_params: EvalParams,
                      kappa: float, charge=no_charge) -> bool:
    """One-shot adversarial check at magnitude ``lam`` along ``phi``."""
    predicate = make_boundary_predicate(tracker, video, clean_baseline,
                                        reference, eval_params, kappa, charge)
    ok, _ = predicate(normalize_linf(phi), lam)
    return ok


def binary_search_g(predicate, unit_phi: np.ndarray, hint: float,
                    lambda_max: float, tolerance: float):
    """Smallest magnitude (within tolerance) where the predicate turns true.

    Brackets by doubling from the hint, then bisects; the returned value is
    the true-side endpoint, so re-querying at it reproduces an adversarial
    image. Raises InfeasibleDirectionError when even ``lambda_max`` is not
    adversarial.

    Returns ``(g, queries, last_true_eval)`` where last_true_eval carries
    the scores observed at the returned magnitude.
    """
    queries = 0
    start = min(max(hint, tolerance), lambda_max)
    queries += 1
    ok, ev = predicate(unit_phi, start)
    if ok:
        lo, hi = 0.0, start
        hi_eval = ev
    else:
        lo = start
        step = start
        hi = None
        while True:
            if step >= lambda_max:
                err = InfeasibleDirectionError(
                    f"not adversarial up to lambda_max={lambda_max}")
                err.queries = queries
                raise err
            step = min(step * 2.0, lambda_max)
            queries += 1
            ok, ev = predicate(unit_phi, step)
            if ok:
                hi = step
                hi_eval = ev
                break
            lo = step
    while hi - lo > tolerance:
        mid = (lo + hi) / 2.0
        queries += 1
        ok, ev = predicate(unit_phi, mid)
        if ok:
            hi = mid
            hi_eval = ev
        else:
            lo = mid
    return hi, queries, hi_eval


def estimate_grad_sign(g_eval, unit_phi: np.ndarray, g_phi: float,
                       cfg: SignOptConfig, rng: np.random.Generator):
    """Sign-compared Gaussian probing of the boundary-distance gradient.

    Each probe re-evaluates ``g`` at a smoothed direction and contributes
    ``sign(g_probe - g_phi) * u``; infeasible probes count as +1 (the
    boundary moved away). Probes whose ``g`` lands exactly on ``g_phi``
    contribute nothing.
    """
    grad = np.zeros_like(unit_phi)
    queries = 0
    for _ in range(cfg.probes):
        u = rng.standard_normal(unit_phi.shape)
        try:
            g_probe, spent = g_eval(unit_phi + cfg.rho_d * u, g_phi)
            queries += spent
            sign = float(np.sign(g_probe - g_phi))
        except InfeasibleDirectionError as exc:
            queries += getattr(exc, "queries", 0)
            sign = 1.0
        grad += sign * u
    return grad / cfg.probes, queries


@dataclass
class SignOptTrace:
    g_values: list[float] = field(default_factory=list)
    best_g: list[float] = field(default_factory=list)
    queries_search: int = 0
    queries_probe: int = 0
    queries_verify: int = 0

    @property
    def queries(self) -> int:
        return self.queries_search + self.queries_probe + self.queries_verify


@dataclass
class SignOptResult:
    delta: np.ndarray
    g_best: float
    trace: SignOptTrace
    accuracy: float
    robustness: float
    result: TrackResult


def sign_opt_run(tracker, video: Video, initial_delta: np.ndarray,
                 cfg: SignOptConfig, eval_params: EvalParams,
                 clean_baseline, reference, epsilon: float,
                 rng: np.random.Generator, kappa: float | None = None,
                 charge=no_charge) -> SignOptResult:
    """Descend the boundary distance from an adversarial starting delta.

    Each iteration estimates the sign gradient (``K`` probes, one bracketed
    search each), steps the direction, re-normalizes, and re-evaluates
    ``g``; the best pair seen wins. The output is ``g_best * phi_best``
    verified by one final query, whose scores are attached to the result.
    """
    if kappa is None:
        kappa = kappa_threshold(eval_params.gamma, 1.5, 0.4)
    lam_max = cfg.lambda_max(epsilon)
    predicate = make_boundary_predicate(
        tracker, video, clean_baseline, reference, eval_params, kappa, charge)
    trace = SignOptTrace()

    def g_eval(direction, hint):
        unit = normalize_linf(direction)
        g, spent, _ = binary_search_g(predicate, unit, hint, lam_max,
                                      cfg.bs_tolerance)
        return g, spent

    phi = normalize_linf(initial_delta)
    g_phi, spent, _ = binary_search_g(
        predicate, phi, linf_norm(initial_delta), lam_max, cfg.bs_tolerance)
    trace.queries_search += spent
    trace.g_values.append(g_phi)
    best_phi, best_g = phi, g_phi
    trace.best_g.append(best_g)

    alpha = cfg.alpha
    stall = 0
    for _ in range(cfg.iterations):
        grad, probe_spent = estimate_grad_sign(g_eval, phi, g_phi, cfg, rng)
        trace.queries_probe += probe_spent
        try:
            nxt = normalize_linf(phi - alpha * grad)
        except ZeroDirectionError:
            nxt = phi
        improved = False
        try:
            g_next, spent, _ = binary_search_g(predicate, nxt, g_phi, lam_max,
                                               cfg.bs_tolerance)
            trace.queries_search += spent
            improved = g_next < g_phi
            phi, g_phi = nxt, g_next
        except InfeasibleDirectionError as exc:
            # The stepped direction lost the boundary; stay where we are.
            trace.queries_search += getattr(exc, "queries", 0)
        trace.g_values.append(g_phi)
        if g_phi < best_g:
            best_phi, best_g = phi, g_phi
        trace.best_g.append(best_g)
        if improved:
            stall = 0
        else:
            stall += 1
            if stall >= cfg.stall_limit:
                alpha /= 2.0
                stall = 0

    final_delta = best_g * best_phi
    charge()
    trace.queries_verify += 1
    frame = apply_delta(video.frame0, final_delta)
    result = tracker.track(with_frame0(video, frame), reference[0])
    a, r = track_scores(result, reference, eval_params)
    return SignOptResult(delta=final_delta, g_best=best_g, trace=trace,
                         accuracy=a, robustness=r, result=result)
