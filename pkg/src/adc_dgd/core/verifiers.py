"""
Verifiers: numerical checks of the convergence theory and curve analyses
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .compression import (
    Compressor, empirical_unbiasedness, grid_quantizer, sparsifier,
    stochastic_rounding, variance_bound,
)
from .engine import run_trials
from .graph import build_ring, metropolis_matrix
from .metrics import h_sequence, lyapunov_lipschitz_bound, lyapunov_lipschitz_check
from .objectives import ObjectiveSet, lipschitz_bound, sine_quadratic
from .presets import four_node_base

logger = logging.getLogger(__name__)

LIPSCHITZ_SLACK = 1e-8
GROWTH_TOLERANCE = 0.25
# late-window mean of k ||grad L||^2 must fall to this fraction of the early-window mean
LYAPUNOV_DECAY_RATIO = 0.5


@dataclass
class CheckReport:
    """Outcome of one check suite; each line is (label, passed, detail)"""
    name: str
    lines: List[Tuple[str, bool, str]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(ok for _, ok, _ in self.lines)

    def add(self, label: str, ok: bool, detail: str = ""):
        self.lines.append((label, bool(ok), detail))


# Curve analyses

def loglog_slope(ks: Sequence[float], values: Sequence[float], k_min: float, k_max: float) -> float:
    """Least-squares slope of log(value) against log(k) over k_min <= k <= k_max"""
    ks = np.asarray(ks, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    mask = (ks >= k_min) & (ks <= k_max) & (values > 0) & np.isfinite(values)
    if mask.sum() < 2:
        raise ValueError(f"Need at least two positive points in [{k_min}, {k_max}] to fit a slope")
    slope, _ = np.polyfit(np.log(ks[mask]), np.log(values[mask]), 1)
    return float(slope)


def iterations_to_reach(ks: Sequence[int], values: Sequence[float], threshold: float) -> Optional[int]:
    """First k whose value is at or below threshold, None if never"""
    values = np.asarray(values, dtype=np.float64)
    hit = np.flatnonzero(values <= threshold)
    return int(np.asarray(ks)[hit[0]]) if hit.size else None


def error_ball_floor(ks: Sequence[int], values: Sequence[float], k_min: int, k_max: int) -> float:
    """Mean value over the window k_min <= k <= k_max"""
    ks = np.asarray(ks)
    values = np.asarray(values, dtype=np.float64)
    mask = (ks >= k_min) & (ks <= k_max)
    if not mask.any():
        raise ValueError(f"No rounds in [{k_min}, {k_max}]")
    return float(values[mask].mean())


def transmitted_growth_slope(ks: Sequence[int], running_max: Sequence[float],
                             k_min: int = 100, k_max: int = 2000) -> float:
    return loglog_slope(ks, running_max, k_min, k_max)


def scaled_h_sup(beta: float, gamma: float, horizon: int) -> Tuple[float, float, float]:
    """
    Sup of k^gamma h_k over the horizon, over the final decade, and over the decade before

    Returns:
        (global sup, sup over [horizon/10, horizon], sup over [horizon/100, horizon/10))
    """
    h = h_sequence(beta, gamma, horizon)
    ks = np.arange(1, horizon + 1, dtype=np.float64)
    scaled = ks ** gamma * h
    last = scaled[ks >= horizon / 10.0]
    before = scaled[(ks >= horizon / 100.0) & (ks < horizon / 10.0)]
    return float(scaled.max()), float(last.max()), float(before.max()) if before.size else float("nan")


# Check suites

def _test_vectors(count: int = 20, dim: int = 3, scale: float = 3.7) -> np.ndarray:
    base = np.linspace(-scale, scale, count * dim).reshape(count, dim)
    base[0] = 0.0
    base[1] = np.array([2.0, -1.0, 3.0])[:dim]
    return base


def _moments_ok(c: Compressor, z: np.ndarray, draws: int, rng: np.random.Generator) -> Tuple[bool, bool, float, float]:
    mean_err, var = empirical_unbiasedness(c, z, draws, rng)
    se_mean = np.sqrt(var / draws)
    mean_ok = bool(np.all(np.abs(mean_err) <= 4.0 * se_mean + 1e-12))
    sigma2 = variance_bound(c)
    se_var = sigma2 * np.sqrt(2.0 / (draws - 1))
    var_ok = bool(np.all(var <= sigma2 + 3.0 * se_var + 1e-12))
    return mean_ok, var_ok, float(np.max(np.abs(mean_err))), float(np.max(var))


def check_unbiasedness(draws: int = 100_000, seed: int = 0) -> CheckReport:
    report = CheckReport("unbiasedness")
    rng = np.random.default_rng(seed)
    vectors = _test_vectors()
    for c in (stochastic_rounding(), grid_quantizer(0.5), sparsifier(8, 4.0)):
        mean_ok = var_ok = True
        worst_mean = worst_var = 0.0
        for z in vectors:
            m_ok, v_ok, m, v = _moments_ok(c, z, draws, rng)
            mean_ok &= m_ok
            var_ok &= v_ok
            worst_mean, worst_var = max(worst_mean, m), max(worst_var, v)
        report.add(f"{c.describe()} mean", mean_ok, f"max |mean error| {worst_mean:.3e}")
        report.add(f"{c.describe()} variance", var_ok,
                   f"max variance {worst_var:.4f} vs bound {variance_bound(c):.4f}")
    inverted = stochastic_rounding(inverted=True)
    biased = not all(_moments_ok(inverted, z, draws, rng)[0] for z in vectors)
    report.add("round(inverted) is biased", biased, "literal probability assignment must fail the mean check")
    return report


def check_h_decay(betas: Iterable[float] = (0.5, 0.75, 0.9), gammas: Iterable[float] = (0.6, 1.0),
                 horizon: int = 100_000) -> CheckReport:
    """
    sup_k k^gamma h_k is finite and settles: the final decade's max stays within 1%
    of the previous decade's max

    Raises:
        ValueError: for beta outside [0, 1) or gamma <= 0
    """
    report = CheckReport("h_decay")
    for beta in betas:
        for gamma in gammas:
            top, last, before = scaled_h_sup(beta, gamma, horizon)
            ok = np.isfinite(top) and abs(last - before) <= 0.01 * before
            report.add(f"beta={beta:g} gamma={gamma:g}", ok,
                       f"sup {top:.6g}, last decade {last:.6g}, previous decade {before:.6g}")
    return report


def check_lyapunov_lipschitz(samples: int = 1000, seed: int = 0) -> CheckReport:
    report = CheckReport("lyapunov_lipschitz")
    rng = np.random.default_rng(seed)
    cfg = four_node_base()
    w = cfg.consensus_matrix()
    objs = cfg.objective_set()
    lip = lipschitz_bound(objs)
    for alpha in (0.0, 0.02, 0.05):
        ratio = lyapunov_lipschitz_check(w, objs, alpha, samples=samples, rng=rng)
        bound = lyapunov_lipschitz_bound(w, lip, alpha)
        report.add(f"star4 quadratics alpha={alpha:g}", ratio <= bound + LIPSCHITZ_SLACK,
                   f"observed {ratio:.6f} <= bound {bound:.6f}")
    ring = metropolis_matrix(build_ring(5))
    sines = ObjectiveSet([sine_quadratic() for _ in range(5)])
    ratio = lyapunov_lipschitz_check(ring, sines, 0.05, samples=samples, rng=rng)
    bound = lyapunov_lipschitz_bound(ring, sines.lipschitz(), 0.05)
    report.add("ring5 10sin(x)+x^2 alpha=0.05", ratio <= bound + LIPSCHITZ_SLACK,
               f"observed {ratio:.6f} <= bound {bound:.6f}")
    return report


def check_growth(gammas: Iterable[float] = (0.8, 1.0, 1.2), trials: int = 5, iters: int = 2000,
                 workers: Optional[int] = None) -> CheckReport:
    """Running max of the transmitted value grows no faster than k^(gamma - 1/2)"""
    report = CheckReport("growth")
    for gamma in gammas:
        cfg = four_node_base(gamma=gamma, trials=trials, iters=iters, label=f"adc-gamma{gamma:g}")
        trace = run_trials(cfg, workers=workers)
        if trace.truncated:
            report.add(f"gamma={gamma:g}", False, "a trial terminated early")
            continue
        slope = transmitted_growth_slope(trace.aggregate["k"], trace.aggregate["max_transmitted"],
                                         100, iters)
        limit = gamma - 0.5 + GROWTH_TOLERANCE
        report.add(f"gamma={gamma:g}", slope <= limit, f"log-log slope {slope:.3f} <= {limit:.3f}")
    return report



def check_lyapunov_rate(gammas: Iterable[float] = (1.0,), trials: int = 20, iters: int = 2000,
                        workers: Optional[int] = None) -> CheckReport:
    """
    Constant-step ADC-DGD drives ||grad L_alpha(x_k)||^2 to zero faster than 1/k

    On the 4-node star problem the trial mean of k ||grad L||^2 must shrink: its
    mean over [K/2, K] stays below LYAPUNOV_DECAY_RATIO times its mean over
    [K/20, K/10], and its log-log slope over [K/10, K] is negative.
    """
    if iters < 100:
        raise ValueError(f"Need at least 100 rounds to compare windows, got {iters}")
    report = CheckReport("lyapunov_rate")
    for gamma in gammas:
        cfg = four_node_base(trials=trials, iters=iters, gamma=gamma, eta=0.0, label=f"adc-gamma{gamma:g}")
        trace = run_trials(cfg, workers=workers)
        if trace.truncated:
            report.add(f"gamma={gamma:g}", False, "a trial terminated early")
            continue
        ks = trace.aggregate["k"]
        scaled = ks * trace.aggregate["lyapunov_grad_sq"]
        early = error_ball_floor(ks, scaled, iters // 20, iters // 10)
        late = error_ball_floor(ks, scaled, iters // 2, iters)
        report.add(f"gamma={gamma:g} window means", late <= LYAPUNOV_DECAY_RATIO * early,
                   f"k ||grad L||^2: {late:.3e} over [{iters // 2}, {iters}] vs {early:.3e} over "
                   f"[{iters // 20}, {iters // 10}]")
        slope = loglog_slope(ks, scaled, iters // 10, iters)
        report.add(f"gamma={gamma:g} trend", slope < 0.0, f"log-log slope of k ||grad L||^2 {slope:.3f} < 0")
    return report


CHECKS: Dict[str, Callable[..., CheckReport]] = {
    "unbiasedness": check_unbiasedness,
    "h_decay": check_h_decay,
    "lemma4": check_h_decay,
    "lyapunov_lipschitz": check_lyapunov_lipschitz,
    "growth": check_growth,
    "lyapunov_rate": check_lyapunov_rate,
}


def check(name: str, **options) -> CheckReport:
    try:
        suite = CHECKS[name]
    except KeyError:
        raise ValueError(f"Unknown property '{name}'; choose from {', '.join(CHECKS)}") from None
    report = suite(**options)
    logger.info("check %s: %s", name, "passed" if report.passed else "FAILED")
    return report
