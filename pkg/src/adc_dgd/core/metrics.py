"""
Metrics: per-round diagnostics and the quantities the convergence theory refers to
"""

import logging
from dataclasses import asdict, dataclass
from typing import Dict, Optional, Sequence, Union

import numpy as np

from .graph import ConsensusMatrix
from .objectives import Objective, ObjectiveSet, lipschitz_bound
from adc_dgd.utils.error_handling import ObjectiveError

logger = logging.getLogger(__name__)

Objectives = Union[ObjectiveSet, Sequence[Objective]]


def _as_set(objs: Objectives) -> ObjectiveSet:
    return objs if isinstance(objs, ObjectiveSet) else ObjectiveSet(objs)


def _stack(x) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ObjectiveError(f"Expected stacked iterates (N, P) with N >= 1, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class RoundMetrics:
    k: int
    grad_norm_sq: float
    consensus_err: float
    objective: float
    lyapunov: float
    bytes_cum: int
    max_transmitted: float

    def as_dict(self) -> Dict[str, float]:
        return asdict(self)


def mean_iterate(x) -> np.ndarray:
    return _stack(x).mean(axis=0)


def consensus_error(x) -> float:
    """||x - 1 x_bar|| on the stacked vector"""
    arr = _stack(x)
    return float(np.linalg.norm(arr - arr.mean(axis=0)))


def mean_gradient_norm_sq(x, objs: Objectives) -> float:
    """||(1/N) sum_i grad f_i(x_bar)||^2"""
    objs = _as_set(objs)
    arr = _stack(x)
    at_mean = np.broadcast_to(arr.mean(axis=0), arr.shape)
    g = objs.gradients(at_mean).mean(axis=0)
    return float(np.dot(g, g))


def local_gradient_norm(x, objs: Objectives) -> float:
    """||grad f(x)|| for the stacked local gradients"""
    return float(np.linalg.norm(_as_set(objs).gradients(_stack(x))))


def lyapunov(x, w: ConsensusMatrix, objs: Objectives, alpha: float) -> float:
    """L_alpha(x) = 1/2 x^T (I - W) x + alpha * sum_i f_i(x_i)"""
    arr = _stack(x)
    quad = 0.5 * float(np.sum(arr * (arr - w.entries @ arr)))
    return quad + alpha * _as_set(objs).total(arr)


def lyapunov_gradient(x, w: ConsensusMatrix, objs: Objectives, alpha: float) -> np.ndarray:
    arr = _stack(x)
    return (arr - w.entries @ arr) + alpha * _as_set(objs).gradients(arr)


def lyapunov_gradient_norm_sq(x, w: ConsensusMatrix, objs: Objectives, alpha: float) -> float:
    """||grad L_alpha(x)||^2; constant-step runs drive it to zero faster than 1/k"""
    g = lyapunov_gradient(x, w, objs, alpha)
    return float(np.sum(g * g))


def lyapunov_lipschitz_bound(w: ConsensusMatrix, lipschitz: float, alpha: float) -> float:
    return 1.0 - w.lambda_n + alpha * lipschitz


def lyapunov_lipschitz_check(w: ConsensusMatrix, objs: Objectives, alpha: float,
                             samples: int = 1000, radius: float = 10.0,
                             rng: Optional[np.random.Generator] = None) -> float:
    """
    Largest sampled ||grad L(x) - grad L(y)|| / ||x - y||

    Pairs are drawn uniformly from the box [-radius, radius]^(N x P).
    """
    if alpha < 0:
        raise ValueError(f"Step size must be non-negative, got {alpha}")
    objs = _as_set(objs)
    rng = rng or np.random.default_rng(0)
    shape = (w.n, objs.dim)
    xs = rng.uniform(-radius, radius, size=(samples,) + shape)
    ys = rng.uniform(-radius, radius, size=(samples,) + shape)
    worst = 0.0
    for x, y in zip(xs, ys):
        gap = float(np.linalg.norm(x - y))
        if gap == 0.0:
            continue
        diff = lyapunov_gradient(x, w, objs, alpha) - lyapunov_gradient(y, w, objs, alpha)
        worst = max(worst, float(np.linalg.norm(diff)) / gap)
    return worst


def lyapunov_curvature(w: ConsensusMatrix, objs: Objectives, alpha: float) -> float:
    """
    Smallest eigenvalue of the Hessian of L_alpha for quadratic families

    A negative value means L_alpha is unbounded below and constant-step runs diverge.
    """
    objs = _as_set(objs)
    a = objs.curvatures()
    if a is None:
        raise ObjectiveError("Lyapunov curvature is only available for quadratic objectives")
    hess = np.eye(w.n) - w.entries + 2.0 * alpha * np.diag(a)
    return float(np.linalg.eigvalsh(0.5 * (hess + hess.T))[0])


def h_sequence(beta: float, gamma: float, horizon: int) -> np.ndarray:
    """
    h_k = sum_{i<=k} beta^(k-i) / i^gamma for k = 1..horizon

    Built from h_1 = 1 and h_{k+1} = beta h_k + (k+1)^(-gamma).
    """
    if not 0.0 <= beta < 1.0:
        raise ValueError(f"beta must lie in [0, 1), got {beta}")
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    if horizon < 1:
        raise ValueError(f"Horizon must be at least 1, got {horizon}")
    inv = np.arange(1, horizon + 1, dtype=np.float64) ** -gamma
    h = np.empty(horizon, dtype=np.float64)
    acc = 0.0
    for k in range(horizon):
        acc = beta * acc + inv[k]
        h[k] = acc
    return h


def step_size_admissibility(alpha: float, w: ConsensusMatrix, lipschitz: float) -> bool:
    """alpha < (1 + lambda_N(W)) / L, strictly"""
    if alpha == 0:
        return True
    if lipschitz == 0:
        return True
    return alpha < (1.0 + w.lambda_n) / lipschitz


def admissible_bound(w: ConsensusMatrix, lipschitz: float) -> float:
    return (1.0 + w.lambda_n) / lipschitz if lipschitz > 0 else float("inf")


def consensus_bound(alpha: float, d: float, beta: float) -> float:
    """alpha D / (1 - beta), the steady consensus error scale for exact mixing"""
    return alpha * d / (1.0 - beta)


def round_metrics(k: int, x: np.ndarray, w: ConsensusMatrix, objs: ObjectiveSet, alpha: float,
                  bytes_cum: int, max_transmitted: float) -> RoundMetrics:
    return RoundMetrics(
        k=k,
        grad_norm_sq=mean_gradient_norm_sq(x, objs),
        consensus_err=consensus_error(x),
        objective=objs.total(x),
        lyapunov=lyapunov(x, w, objs, alpha),
        bytes_cum=int(bytes_cum),
        max_transmitted=float(max_transmitted),
    )


__all__ = [
    "RoundMetrics", "mean_iterate", "consensus_error", "mean_gradient_norm_sq",
    "local_gradient_norm", "lyapunov", "lyapunov_gradient", "lyapunov_gradient_norm_sq",
    "lyapunov_lipschitz_bound",
    "lyapunov_lipschitz_check", "lyapunov_curvature", "h_sequence",
    "step_size_admissibility", "admissible_bound", "consensus_bound", "round_metrics",
    "lipschitz_bound",
]
