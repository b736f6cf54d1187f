"""
Objectives: per-node local functions f_i with gradients and Lipschitz bounds
"""

import logging
import math
import warnings
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np

from adc_dgd.utils.error_handling import (
    AssumptionViolationWarning, NoFiniteMinimizerError, ObjectiveError,
)

logger = logging.getLogger(__name__)


class Objective(ABC):
    """A differentiable local objective f: R^P -> R"""

    dim: int
    lipschitz: float

    @abstractmethod
    def value(self, x: np.ndarray) -> float:
        ...

    @abstractmethod
    def gradient(self, x: np.ndarray) -> np.ndarray:
        ...

    def _as_point(self, x) -> np.ndarray:
        arr = np.atleast_1d(np.asarray(x, dtype=np.float64))
        if arr.shape != (self.dim,):
            raise ObjectiveError(f"Expected a point of dimension {self.dim}, got shape {arr.shape}")
        return arr


@dataclass(frozen=True, eq=False)
class QuadraticObjective(Objective):
    """f(x) = a * ||x - b||^2 + offset"""
    a: float
    b: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        b = np.atleast_1d(np.asarray(self.b, dtype=np.float64)).copy()
        if b.ndim != 1:
            raise ObjectiveError(f"Center must be a vector, got shape {b.shape}")
        b.setflags(write=False)
        object.__setattr__(self, "b", b)

    @property
    def dim(self) -> int:
        return int(self.b.shape[0])

    @property
    def lipschitz(self) -> float:
        return 2.0 * abs(self.a)

    def value(self, x) -> float:
        d = self._as_point(x) - self.b
        return float(self.a * np.dot(d, d) + self.offset)

    def gradient(self, x) -> np.ndarray:
        return 2.0 * self.a * (self._as_point(x) - self.b)

    def shifted(self, offset: float) -> "QuadraticObjective":
        return QuadraticObjective(self.a, self.b, self.offset + offset)


@dataclass(frozen=True, eq=False)
class FunctionObjective(Objective):
    """Objective backed by plain callables; used for the non-quadratic examples"""
    fn: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    lipschitz: float = math.inf
    dim: int = 1
    name: str = "function"

    def value(self, x) -> float:
        return float(self.fn(self._as_point(x)))

    def gradient(self, x) -> np.ndarray:
        return np.asarray(self.grad(self._as_point(x)), dtype=np.float64).reshape(self.dim)


def quadratic(a: float, b) -> QuadraticObjective:
    return QuadraticObjective(float(a), np.atleast_1d(np.asarray(b, dtype=np.float64)))


def quartic_cubic() -> FunctionObjective:
    """x^4 + 5x^3, a coercive non-convex function with no global gradient Lipschitz bound"""
    return FunctionObjective(
        fn=lambda x: float(np.sum(x ** 4 + 5.0 * x ** 3)),
        grad=lambda x: 4.0 * x ** 3 + 15.0 * x ** 2,
        lipschitz=math.inf, dim=1, name="quartic_cubic",
    )


def sine_quadratic() -> FunctionObjective:
    """10 sin(x) + x^2; gradient Lipschitz constant 12"""
    return FunctionObjective(
        fn=lambda x: float(np.sum(10.0 * np.sin(x) + x ** 2)),
        grad=lambda x: 10.0 * np.cos(x) + 2.0 * x,
        lipschitz=12.0, dim=1, name="sine_quadratic",
    )


def random_quadratics(n: int, dim: int, rngs: Sequence[np.random.Generator]) -> List[QuadraticObjective]:
    """Per-node a ~ U[0, 10], b ~ U[0, 1]^P, one generator per node"""
    if len(rngs) != n:
        raise ObjectiveError(f"Need one random stream per node ({n}), got {len(rngs)}")
    objs = []
    for rng in rngs:
        a = rng.uniform(0.0, 10.0)
        b = rng.uniform(0.0, 1.0, size=dim)
        objs.append(QuadraticObjective(float(a), b))
    return objs


def _common_dim(objs: Sequence[Objective]) -> int:
    if not objs:
        raise ObjectiveError("At least one objective is required")
    dims = {o.dim for o in objs}
    if len(dims) != 1:
        raise ObjectiveError(f"Objectives disagree on dimension: {sorted(dims)}")
    return dims.pop()


class ObjectiveSet:
    """The local objectives of all nodes, evaluated on stacked (N, P) arrays"""

    def __init__(self, objectives: Sequence[Objective]):
        self.objectives: List[Objective] = list(objectives)
        self.dim = _common_dim(self.objectives)
        self.quadratic = all(isinstance(o, QuadraticObjective) for o in self.objectives)
        if self.quadratic:
            self._a = np.array([o.a for o in self.objectives], dtype=np.float64)
            self._b = np.stack([o.b for o in self.objectives])
            self._offset = np.array([o.offset for o in self.objectives], dtype=np.float64)

    def __len__(self) -> int:
        return len(self.objectives)

    def __iter__(self):
        return iter(self.objectives)

    def __getitem__(self, i: int) -> Objective:
        return self.objectives[i]

    def _check_stack(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (len(self), self.dim):
            raise ObjectiveError(f"Expected stacked iterates of shape ({len(self)}, {self.dim}), got {x.shape}")
        return x

    def gradients(self, x: np.ndarray) -> np.ndarray:
        """Row i holds grad f_i(x_i)"""
        x = self._check_stack(x)
        if self.quadratic:
            return 2.0 * self._a[:, None] * (x - self._b)
        return np.stack([o.gradient(x[i]) for i, o in enumerate(self.objectives)])

    def values(self, x: np.ndarray) -> np.ndarray:
        x = self._check_stack(x)
        if self.quadratic:
            d = x - self._b
            return self._a * np.einsum("ij,ij->i", d, d) + self._offset
        return np.array([o.value(x[i]) for i, o in enumerate(self.objectives)])

    def total(self, x: np.ndarray) -> float:
        """sum_i f_i(x_i)"""
        return float(np.sum(self.values(x)))

    def lipschitz(self) -> float:
        return lipschitz_bound(self.objectives)

    def curvatures(self) -> Optional[np.ndarray]:
        return self._a.copy() if self.quadratic else None


def sum_gradient(objs: Sequence[Objective], x_bar) -> np.ndarray:
    """Mean gradient (1/N) sum_i grad f_i at a common point"""
    dim = _common_dim(objs)
    point = np.atleast_1d(np.asarray(x_bar, dtype=np.float64))
    if point.shape != (dim,):
        raise ObjectiveError(f"Point has shape {point.shape}, objectives have dimension {dim}")
    total = np.zeros(dim)
    for o in objs:
        total = total + o.gradient(point)
    return total / len(objs)


def global_minimizer_quadratic(objs: Sequence[QuadraticObjective]) -> np.ndarray:
    """Unique stationary point sum(a_i b_i) / sum(a_i) of a quadratic family"""
    _common_dim(objs)
    a = np.array([o.a for o in objs], dtype=np.float64)
    total = float(a.sum())
    if total <= 0.0:
        raise NoFiniteMinimizerError(
            f"Sum of curvatures is {total:g}; the total objective has no finite minimizer",
            suggestion="use local curvatures whose sum is positive")
    return np.sum(a[:, None] * np.stack([o.b for o in objs]), axis=0) / total


def lipschitz_bound(objs: Sequence[Objective]) -> float:
    return float(max(o.lipschitz for o in objs))


def check_lipschitz(obj: Objective, rng: np.random.Generator, samples: int = 100,
                    radius: float = 10.0) -> float:
    """Largest sampled ||grad f(x) - grad f(y)|| / ||x - y||"""
    worst = 0.0
    for _ in range(samples):
        x = rng.uniform(-radius, radius, size=obj.dim)
        y = rng.uniform(-radius, radius, size=obj.dim)
        gap = float(np.linalg.norm(x - y))
        if gap == 0.0:
            continue
        worst = max(worst, float(np.linalg.norm(obj.gradient(x) - obj.gradient(y))) / gap)
    return worst


def growth_ratio_check(objs: Sequence[Objective], radius: float, samples: int = 100,
                       rng: Optional[np.random.Generator] = None) -> float:
    """
    Sample sum ||x_i|| / sum f_i(x_i) with every ||x_i|| = radius

    A ratio tending to 0 as the radius grows indicates the total objective grows
    faster than linearly at infinity.

    Returns:
        Maximum sampled ratio (inf if a sample had a non-positive total)
    """
    if radius <= 0:
        raise ObjectiveError(f"Radius must be positive, got {radius}")
    dim = _common_dim(objs)
    rng = rng or np.random.default_rng(0)
    worst = 0.0
    violated = False
    for s in range(samples):
        if dim == 1:
            # alternate signs so both tails get sampled
            signs = np.where(rng.random(len(objs)) < 0.5, -1.0, 1.0) if s else np.ones(len(objs))
            points = [np.array([sg * radius]) for sg in signs]
        else:
            raw = rng.standard_normal((len(objs), dim))
            points = [radius * r / np.linalg.norm(r) for r in raw]
        total = sum(o.value(p) for o, p in zip(objs, points))
        if total <= 0.0:
            violated = True
            continue
        worst = max(worst, len(objs) * radius / total)
    if violated:
        warnings.warn(
            f"Sum of objectives is non-positive at radius {radius:g}; growth condition fails there",
            AssumptionViolationWarning, stacklevel=2)
        return math.inf
    logger.debug("growth ratio at radius %g: %.3e", radius, worst)
    return worst
