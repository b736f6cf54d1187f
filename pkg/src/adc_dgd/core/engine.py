"""
Engine: multi-round, multi-trial simulation driver

Randomness is counter-based. Every (master_seed, trial, node, round) tuple maps to
its own Philox stream, so a trace never depends on the order in which nodes or
trials are evaluated. Round 0 of each (trial, node) stream is reserved for
sampling random objectives; rounds 1..K drive the compressors.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from itertools import repeat
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .algorithms import Algorithm, StepSchedule, advance, initial_state, step_size
from .compression import Compressor, CompressorKind
from .graph import (
    ConsensusMatrix, Graph, build_path, build_ring, build_star, explicit_matrix, from_edges,
    metropolis_matrix,
)
from .metrics import (
    RoundMetrics, local_gradient_norm, lyapunov_gradient_norm_sq, round_metrics, step_size_admissibility,
)
from .objectives import ObjectiveSet, QuadraticObjective, random_quadratics
from adc_dgd.utils.error_handling import (
    CompressionOverflowError, ConfigError, DivergenceError, describe_error,
)

logger = logging.getLogger(__name__)

RANDOM_QUADRATIC = "random_quadratic"
# a ~ U[0, 10] bounds the Lipschitz constant of a random quadratic by 20
RANDOM_QUADRATIC_LIPSCHITZ = 20.0

METRIC_COLUMNS = ("grad_norm_sq", "consensus_err", "objective", "lyapunov", "bytes_cum", "max_transmitted")
# recorded and averaged per round, not exported
DIAGNOSTIC_COLUMNS = ("lyapunov_grad_sq",)
TRACE_COLUMNS = METRIC_COLUMNS + DIAGNOSTIC_COLUMNS


@dataclass(frozen=True)
class TopologySpec:
    kind: str
    n: int
    edges: Tuple[Tuple[int, int], ...] = ()

    def build(self) -> Graph:
        if self.kind == "ring":
            return build_ring(self.n)
        if self.kind == "star":
            return build_star(self.n)
        if self.kind == "path":
            return build_path(self.n)
        if self.kind == "edges":
            return from_edges(self.n, self.edges)
        raise ConfigError(f"Unknown topology '{self.kind}'", key="topology",
                          suggestion="use one of: ring, star, path, edges")


@dataclass(frozen=True)
class ObjectiveSpec:
    """f(x) = a ||x - b||^2 + offset; a one-element b is broadcast to every coordinate"""
    a: float
    b: Tuple[float, ...]
    offset: float = 0.0

    def build(self, dim: int) -> QuadraticObjective:
        b = np.asarray(self.b, dtype=np.float64)
        if b.size == 1:
            b = np.full(dim, float(b[0]))
        if b.shape != (dim,):
            raise ConfigError(f"Objective center has {b.size} coordinates but P = {dim}", key="b")
        return QuadraticObjective(float(self.a), b, float(self.offset))


@dataclass(frozen=True)
class RunConfig:
    """Everything that determines a run, together with master_seed"""
    topology: TopologySpec
    algorithm: Algorithm
    matrix: Optional[Tuple[Tuple[float, ...], ...]] = None
    objectives: Union[str, Tuple[ObjectiveSpec, ...]] = RANDOM_QUADRATIC
    t: int = 1
    compressor: Compressor = Compressor(CompressorKind.ROUND)
    gamma: float = 1.0
    alpha0: float = 0.02
    eta: float = 0.0
    dim: int = 1
    iters: int = 1000
    trials: int = 1
    master_seed: int = 0
    overflow_policy: str = "terminate"
    allow_small_gamma: bool = False
    allow_inadmissible_step: bool = False
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "algorithm", Algorithm(self.algorithm))

    @property
    def schedule(self) -> StepSchedule:
        return StepSchedule(self.alpha0, self.eta)

    @property
    def name(self) -> str:
        if self.label:
            return self.label
        if self.algorithm is Algorithm.DGD_T:
            return f"dgd_t{self.t}"
        return self.algorithm.value

    def consensus_matrix(self, graph: Optional[Graph] = None) -> ConsensusMatrix:
        graph = graph or self.topology.build()
        if self.matrix is None:
            return metropolis_matrix(graph)
        return explicit_matrix(np.array(self.matrix, dtype=np.float64), graph)

    def objective_set(self, trial: int = 0) -> ObjectiveSet:
        if isinstance(self.objectives, str):
            if self.objectives != RANDOM_QUADRATIC:
                raise ConfigError(f"Unknown objective generator '{self.objectives}'", key="generator")
            n = self.topology.n
            rngs = [derive_stream(self.master_seed, trial, node, 0) for node in range(n)]
            return ObjectiveSet(random_quadratics(n, self.dim, rngs))
        if len(self.objectives) != self.topology.n:
            raise ConfigError(f"{len(self.objectives)} objectives given for {self.topology.n} nodes",
                              key="objective")
        return ObjectiveSet([spec.build(self.dim) for spec in self.objectives])

    def lipschitz_bound(self) -> float:
        if isinstance(self.objectives, str):
            return RANDOM_QUADRATIC_LIPSCHITZ
        return max(2.0 * abs(spec.a) for spec in self.objectives)


def validate_run_config(config: RunConfig) -> RunConfig:
    """Check the run-level invariants; returns the config unchanged"""
    if config.iters < 1:
        raise ConfigError(f"K must be at least 1, got {config.iters}", key="K")
    if config.trials < 1:
        raise ConfigError(f"T must be at least 1, got {config.trials}", key="T")
    if config.dim < 1:
        raise ConfigError(f"P must be at least 1, got {config.dim}", key="P")
    if config.master_seed < 0:
        raise ConfigError(f"seed must be non-negative, got {config.master_seed}", key="seed")
    if config.overflow_policy not in ("terminate", "raise"):
        raise ConfigError(f"Unknown overflow policy '{config.overflow_policy}'", key="overflow",
                          suggestion="use 'terminate' or 'raise'")
    if config.algorithm is Algorithm.DGD_T and config.t < 1:
        raise ConfigError(f"dgd_t needs t >= 1, got {config.t}", key="t")
    if config.algorithm is Algorithm.ADC:
        if config.gamma <= 0.5 and not config.allow_small_gamma:
            raise ConfigError(
                f"gamma = {config.gamma:g} but the amplifying exponent must exceed 1/2",
                key="gamma", suggestion="set allow_small_gamma = true for demonstration runs")
        if config.eta == 0 and not config.allow_inadmissible_step:
            w = config.consensus_matrix()
            lip = config.lipschitz_bound()
            if not step_size_admissibility(config.alpha0, w, lip):
                raise ConfigError(
                    f"alpha = {config.alpha0:g} is not below (1 + lambda_N)/L = "
                    f"{(1.0 + w.lambda_n) / lip:.6g}", key="alpha",
                    suggestion="lower alpha, or set allow_inadmissible_step = true")
    return config


@lru_cache(maxsize=4096)
def _stream_key(master_seed: int, trial: int, node: int) -> Tuple[int, int]:
    state = np.random.SeedSequence(master_seed, spawn_key=(trial, node)).generate_state(2, np.uint64)
    return int(state[0]), int(state[1])


def derive_stream(master_seed: int, trial: int, node: int, round_index: int) -> np.random.Generator:
    """Independent, reproducible stream for one (trial, node, round)"""
    key = np.array(_stream_key(master_seed, trial, node), dtype=np.uint64)
    counter = np.array([0, 0, round_index, 0], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


@dataclass(frozen=True)
class Termination:
    status: str = "completed"
    round_index: Optional[int] = None
    node: Optional[int] = None
    detail: str = ""

    @property
    def completed(self) -> bool:
        return self.status == "completed"

    def __str__(self) -> str:
        if self.status == "diverged":
            return f"diverged({self.round_index})"
        if self.status == "overflow":
            return f"overflow({self.round_index},{self.node})"
        return self.status


@dataclass
class TrialTrace:
    """Column arrays for one trial; row k holds the metrics after round k"""
    trial: int
    columns: Dict[str, np.ndarray]
    termination: Termination
    final_x: Optional[np.ndarray] = None
    max_local_gradient: float = 0.0

    def __len__(self) -> int:
        return int(self.columns["k"].shape[0])

    def rows(self):
        for r in range(len(self)):
            yield RoundMetrics(k=int(self.columns["k"][r]),
                               **{c: self.columns[c][r].item() for c in METRIC_COLUMNS})


@dataclass
class Trace:
    config: RunConfig
    trials: List[TrialTrace]
    aggregate: Dict[str, np.ndarray] = field(default_factory=dict)
    truncated: bool = False

    @property
    def length(self) -> int:
        return int(self.aggregate["k"].shape[0]) if self.aggregate else 0

    def stack(self, column: str) -> np.ndarray:
        """(T, length) array of one metric, truncated to the aggregate length"""
        return np.stack([t.columns[column][:self.length] for t in self.trials])

    @property
    def terminations(self) -> List[Termination]:
        return [t.termination for t in self.trials]


def _aggregate(trials: Sequence[TrialTrace], iters: int) -> Tuple[Dict[str, np.ndarray], bool]:
    length = min(len(t) for t in trials)
    truncated = any(len(t) < iters for t in trials)
    agg = {"k": trials[0].columns["k"][:length].copy()}
    for c in TRACE_COLUMNS:
        agg[c] = np.mean(np.stack([t.columns[c][:length].astype(np.float64) for t in trials]), axis=0)
    return agg, truncated


def run_trial(config: RunConfig, trial: int = 0, w: Optional[ConsensusMatrix] = None) -> TrialTrace:
    """Execute one trial of `config`"""
    w = w or config.consensus_matrix()
    objs = config.objective_set(trial)
    schedule = config.schedule
    algorithm = config.algorithm
    state = initial_state(w, objs, schedule, with_memory=algorithm is Algorithm.ADC)

    iters = config.iters
    cols = {c: np.zeros(iters, dtype=np.float64) for c in TRACE_COLUMNS}
    cols["bytes_cum"] = np.zeros(iters, dtype=np.int64)
    cols["k"] = np.arange(1, iters + 1, dtype=np.int64)
    bytes_cum = 0
    running_max = 0.0
    max_grad = 0.0
    termination = Termination()
    done = 0
    needs_streams = algorithm in (Algorithm.NAIVE, Algorithm.ADC)

    for k in range(1, iters + 1):
        rngs = [derive_stream(config.master_seed, trial, i, k) for i in range(w.n)] if needs_streams else None
        try:
            out = advance(algorithm, state, w, objs, schedule, config.compressor, rngs,
                          gamma=config.gamma, t=config.t)
        except DivergenceError as e:
            termination = Termination("diverged", round_index=k, detail=describe_error(e))
            break
        except CompressionOverflowError as e:
            if config.overflow_policy == "raise":
                raise
            termination = Termination("overflow", round_index=k, node=e.node, detail=describe_error(e))
            break
        state = out.state
        bytes_cum += out.bytes
        running_max = max(running_max, out.max_transmitted)
        max_grad = max(max_grad, local_gradient_norm(state.x, objs))
        r = k - 1
        alpha = step_size(schedule, k)
        metrics = round_metrics(k, state.x, w, objs, alpha, bytes_cum, running_max)
        for c in METRIC_COLUMNS:
            cols[c][r] = getattr(metrics, c)
        cols["lyapunov_grad_sq"][r] = lyapunov_gradient_norm_sq(state.x, w, objs, alpha)
        done = k

    if not termination.completed:
        logger.debug("%s trial %d terminated: %s", config.name, trial, termination.detail)
    return TrialTrace(trial=trial, columns={c: v[:done] for c, v in cols.items()},
                      termination=termination, final_x=state.x.copy(), max_local_gradient=max_grad)


def run(config: RunConfig, trial: int = 0) -> Trace:
    """Single-trial trace; the aggregate is the trial itself"""
    w = config.consensus_matrix()
    tt = run_trial(config, trial, w)
    agg, truncated = _aggregate([tt], config.iters) if len(tt) else ({}, True)
    return Trace(config=config, trials=[tt], aggregate=agg, truncated=truncated)


def is_deterministic(config: RunConfig) -> bool:
    """True when no trial consumes randomness, so every trial is identical"""
    exact = config.algorithm in (Algorithm.DGD, Algorithm.DGD_T) or config.compressor.kind is CompressorKind.IDENTITY
    return exact and not isinstance(config.objectives, str)


def _run_trial_task(config: RunConfig, trial: int) -> TrialTrace:
    return run_trial(config, trial)


def run_trials(config: RunConfig, workers: Optional[int] = None) -> Trace:
    """
    Run config.trials independent trials and average them round by round

    Args:
        config: Validated run configuration
        workers: Worker processes; None or 1 runs trials in this process
    """
    logger.info("running %s: %d trial(s) x %d rounds on %s(n=%d)", config.name, config.trials,
                config.iters, config.topology.kind, config.topology.n)
    if is_deterministic(config) and config.trials > 1:
        first = run_trial(config, 0)
        trials = [replace(first, trial=i, columns={c: v.copy() for c, v in first.columns.items()})
                  for i in range(config.trials)]
    elif workers and workers > 1 and config.trials > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            trials = list(pool.map(_run_trial_task, repeat(config), range(config.trials)))
    else:
        w = config.consensus_matrix()
        trials = [run_trial(config, trial, w) for trial in range(config.trials)]
    if min(len(t) for t in trials) == 0:
        return Trace(config=config, trials=trials, aggregate={}, truncated=True)
    agg, truncated = _aggregate(trials, config.iters)
    if truncated:
        failed = sum(1 for t in trials if not t.termination.completed)
        logger.warning("%s: %d of %d trials terminated early; aggregate truncated to %d rounds",
                       config.name, failed, len(trials), len(agg["k"]))
    return Trace(config=config, trials=trials, aggregate=agg, truncated=truncated)


def with_overrides(config: RunConfig, **changes) -> RunConfig:
    return replace(config, **changes)
