"""
Algorithms: one-round update kernels and step-size schedules

Every kernel is a pure function from a NetworkState to a RoundOutput; the input
state is never mutated. Iterates are stacked as (N, P) arrays, row i belonging to
node i.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence

import numpy as np

from .compression import Codeword, Compressor, decode
from .graph import ConsensusMatrix
from .objectives import ObjectiveSet
from adc_dgd.utils.error_handling import (
    CompressionOverflowError, CompressionRangeError, DivergenceError,
    ScheduleError, SimulationError,
)

logger = logging.getLogger(__name__)

DIVERGENCE_THRESHOLD = 1e12
# receivers integrate codewords, senders keep x + eps/k^g; the two agree to rounding
MEMORY_TOLERANCE = 1e-9


class Algorithm(str, Enum):
    DGD = "dgd"
    NAIVE = "naive"
    ADC = "adc"
    DGD_T = "dgd_t"


@dataclass(frozen=True)
class StepSchedule:
    """alpha_k = alpha0 / k^eta"""
    alpha0: float
    eta: float = 0.0

    def __post_init__(self):
        if self.alpha0 < 0:
            raise ScheduleError(f"Base step must be non-negative, got {self.alpha0}")
        if self.eta < 0:
            raise ScheduleError(f"Step exponent must be non-negative, got {self.eta}")

    def __call__(self, k: int) -> float:
        return step_size(self, k)

    @property
    def constant(self) -> bool:
        return self.eta == 0


def step_size(s: StepSchedule, k: int) -> float:
    if k < 1:
        raise ScheduleError(f"Rounds are numbered from 1, got k={k}")
    if s.eta == 0:
        return s.alpha0
    return s.alpha0 / float(k) ** s.eta


@dataclass(frozen=True)
class NodeState:
    """One node's view of the protocol"""
    x: np.ndarray
    x_tilde_self: np.ndarray
    x_tilde_neighbors: Dict[int, np.ndarray]
    y: np.ndarray


@dataclass(frozen=True, eq=False)
class NetworkState:
    """
    Stacked protocol state entering round k

    memory[i, j] is node i's copy of x_tilde[j]; it is only meaningful on edges and
    is only allocated for ADC runs.
    """
    x: np.ndarray
    x_tilde: np.ndarray
    y: np.ndarray
    k: int
    memory: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    def node(self, i: int, neighbors: Sequence[int]) -> NodeState:
        held = {} if self.memory is None else {j: self.memory[i, j].copy() for j in neighbors}
        return NodeState(x=self.x[i].copy(), x_tilde_self=self.x_tilde[i].copy(),
                         x_tilde_neighbors=held, y=self.y[i].copy())


@dataclass(frozen=True, eq=False)
class RoundOutput:
    state: NetworkState
    messages: List[Codeword] = field(default_factory=list)
    bytes: int = 0
    max_transmitted: float = 0.0
    # de-amplified compression noise each node injected this round
    noise: Optional[np.ndarray] = None


def initial_state(w: ConsensusMatrix, objs: ObjectiveSet, schedule: StepSchedule,
                  with_memory: bool = False) -> NetworkState:
    """
    State after the initialization half-step x_1 = -alpha_1 grad f(0)

    Shared by every algorithm, so runs with exact channels start identically.
    """
    zeros = np.zeros((w.n, objs.dim), dtype=np.float64)
    x1 = w.entries @ zeros - step_size(schedule, 1) * objs.gradients(zeros)
    memory = np.zeros((w.n, w.n, objs.dim), dtype=np.float64) if with_memory else None
    return NetworkState(x=x1, x_tilde=zeros.copy(), y=x1 - zeros, k=1, memory=memory)


def _directed_links(w: ConsensusMatrix) -> np.ndarray:
    return w.graph.degrees()


def _check_divergence(x: np.ndarray, k: int):
    if not np.all(np.isfinite(x)):
        raise DivergenceError(f"Non-finite iterate after round {k}", round_index=k, value=float("nan"))
    peak = float(np.max(np.abs(x))) if x.size else 0.0
    if peak > DIVERGENCE_THRESHOLD:
        raise DivergenceError(f"Iterate magnitude {peak:.3e} exceeds {DIVERGENCE_THRESHOLD:.0e} after round {k}",
                              round_index=k, value=peak)


def _plain_state(x_next: np.ndarray, k: int) -> NetworkState:
    return NetworkState(x=x_next, x_tilde=x_next, y=np.zeros_like(x_next), k=k + 1)


def dgd_round(state: NetworkState, w: ConsensusMatrix, objs: ObjectiveSet, alpha: float) -> RoundOutput:
    """x_{k+1} = W x_k - alpha_k grad f(x_k), full-precision messages"""
    k = state.k
    x_next = w.entries @ state.x - alpha * objs.gradients(state.x)
    _check_divergence(x_next, k)
    cost = 8 * state.dim * int(_directed_links(w).sum())
    return RoundOutput(state=_plain_state(x_next, k), bytes=cost,
                       max_transmitted=float(np.max(np.abs(state.x))))


def dgd_t_round(state: NetworkState, w: ConsensusMatrix, objs: ObjectiveSet, alpha: float,
                t: int) -> RoundOutput:
    """t consensus sub-steps per gradient step"""
    if t < 1:
        raise SimulationError(f"DGD^t needs t >= 1 consensus steps, got t={t}")
    k = state.k
    x_next = w.mix(state.x, t) - alpha * objs.gradients(state.x)
    _check_divergence(x_next, k)
    cost = t * 8 * state.dim * int(_directed_links(w).sum())
    return RoundOutput(state=_plain_state(x_next, k), bytes=cost,
                       max_transmitted=float(np.max(np.abs(state.x))))


def _compress_all(values: np.ndarray, compressor: Compressor, rngs: Sequence[np.random.Generator],
                  k: int, amplification: float = 1.0) -> List[Codeword]:
    if len(rngs) != values.shape[0]:
        raise SimulationError(f"Need one random stream per node ({values.shape[0]}), got {len(rngs)}")
    messages = []
    for i, rng in enumerate(rngs):
        try:
            messages.append(compressor.compress(values[i], rng))
        except (CompressionOverflowError, CompressionRangeError) as e:
            peak = float(np.max(np.abs(values[i])))
            raise CompressionOverflowError(
                f"Codeword overflow at round {k}: k^gamma*||y||_inf = {peak:.6g}"
                if amplification != 1.0 else f"Codeword overflow at round {k}: ||x||_inf = {peak:.6g}",
                coordinate=getattr(e, "coordinate", None), value=peak, node=i, round_index=k,
                suggestion="reduce gamma, the step size, or use a coarser compressor") from e
    return messages


def _message_bytes(messages: Sequence[Codeword], w: ConsensusMatrix) -> int:
    links = _directed_links(w)
    return int(sum(m.byte_cost * int(links[i]) for i, m in enumerate(messages)))


def naive_compressed_round(state: NetworkState, w: ConsensusMatrix, objs: ObjectiveSet, alpha: float,
                           compressor: Compressor, rngs: Sequence[np.random.Generator]) -> RoundOutput:
    """x_{k+1} = W C(x_k) - alpha_k grad f(x_k); one draw per sender, shared by all receivers"""
    k = state.k
    messages = _compress_all(state.x, compressor, rngs, k)
    received = np.stack([decode(m) for m in messages])
    x_next = w.entries @ received - alpha * objs.gradients(state.x)
    _check_divergence(x_next, k)
    return RoundOutput(state=_plain_state(x_next, k), messages=messages,
                       bytes=_message_bytes(messages, w),
                       max_transmitted=float(np.max(np.abs(state.x))),
                       noise=received - state.x)


def check_memory_consistency(state: NetworkState, w: ConsensusMatrix) -> bool:
    """Every receiver's copy of x_tilde[j] matches node j's own self-model"""
    if state.memory is None:
        return True
    adj = w.graph.adjacency()
    held = state.memory[adj]
    owned = np.broadcast_to(state.x_tilde[None, :, :], state.memory.shape)[adj]
    return bool(np.allclose(held, owned, rtol=MEMORY_TOLERANCE, atol=MEMORY_TOLERANCE))


def adc_round(state: NetworkState, w: ConsensusMatrix, objs: ObjectiveSet, alpha: float,
              gamma: float, compressor: Compressor,
              rngs: Sequence[np.random.Generator]) -> RoundOutput:
    """
    One round of amplified-differential compression

    Each node compresses k^gamma * y once and broadcasts the codeword. Every holder
    of x_tilde[i] (node i itself and its neighbors) folds the de-amplified
    codeword in, the network mixes the imprecise values, and each node takes a
    local gradient step from its exact iterate.
    """
    k = state.k
    if k < 1:
        raise ScheduleError(f"Rounds are numbered from 1, got k={k}")
    if state.memory is None:
        raise SimulationError("ADC state carries no receiver memory; build it with initial_state(with_memory=True)")
    amp = float(k) ** gamma
    amplified = amp * state.y
    messages = _compress_all(amplified, compressor, rngs, k, amplification=amp)
    sampled = np.stack([decode(m) for m in messages])

    # x_tilde + C(k^g y)/k^g, written as x + eps/k^g so exact channels give x_tilde == x
    noise = (sampled - amplified) / amp
    x_tilde = state.x + noise

    # receiver i of node j: memory[i, j] += C(k^g y_j)/k^g
    adj = w.graph.adjacency()
    memory = np.where(adj[:, :, None], state.memory + (sampled / amp)[None, :, :], state.memory)

    x_next = w.entries @ x_tilde - alpha * objs.gradients(state.x)
    _check_divergence(x_next, k)
    nxt = NetworkState(x=x_next, x_tilde=x_tilde, y=x_next - x_tilde, k=k + 1, memory=memory)
    if not check_memory_consistency(nxt, w):
        raise SimulationError(f"Receiver memories disagree with sender self-models after round {k}")
    return RoundOutput(state=nxt, messages=messages, bytes=_message_bytes(messages, w),
                       max_transmitted=float(np.max(np.abs(amplified))), noise=noise)


def advance(algorithm: Algorithm, state: NetworkState, w: ConsensusMatrix, objs: ObjectiveSet,
            schedule: StepSchedule, compressor: Optional[Compressor] = None,
            rngs: Optional[Sequence[np.random.Generator]] = None,
            gamma: float = 1.0, t: int = 1) -> RoundOutput:
    """Dispatch one round of the named algorithm"""
    alpha = step_size(schedule, state.k)
    algorithm = Algorithm(algorithm)
    if algorithm is Algorithm.DGD:
        return dgd_round(state, w, objs, alpha)
    if algorithm is Algorithm.DGD_T:
        return dgd_t_round(state, w, objs, alpha, t)
    if compressor is None or rngs is None:
        raise SimulationError(f"Algorithm '{algorithm.value}' needs a compressor and random streams")
    if algorithm is Algorithm.NAIVE:
        return naive_compressed_round(state, w, objs, alpha, compressor, rngs)
    return adc_round(state, w, objs, alpha, gamma, compressor, rngs)
