"""
Tests for the round kernels
"""

import itertools

import numpy as np
import pytest

from adc_dgd.core.algorithms import (
    Algorithm, NetworkState, StepSchedule, adc_round, advance, check_memory_consistency, dgd_round,
    dgd_t_round, initial_state, naive_compressed_round, step_size,
)
from adc_dgd.core.compression import decode, identity, stochastic_rounding
from adc_dgd.core.graph import averaging_matrix, build_path, build_ring, build_star, metropolis_matrix
from adc_dgd.core.objectives import ObjectiveSet, quadratic
from adc_dgd.utils.error_handling import (
    CompressionOverflowError, DivergenceError, ScheduleError, SimulationError,
)


class FixedDraw:
    """Stand-in generator whose uniforms are all `u`, to force one rounding outcome"""

    def __init__(self, u: float):
        self.u = u

    def random(self, shape=None):
        return np.full(shape, self.u)


UP, DOWN = FixedDraw(0.0), FixedDraw(1.0 - 1e-9)


def two_node_objectives() -> ObjectiveSet:
    return ObjectiveSet([quadratic(4.0, [2.0]), quadratic(2.0, [-3.0])])


def streams(n: int, seed: int, k: int = 0):
    return [np.random.default_rng([seed, k, i]) for i in range(n)]


class TestStepSchedule:
    """Test cases for alpha_k = alpha0 / k^eta"""

    def test_constant(self):
        s = StepSchedule(0.001)
        assert all(step_size(s, k) == 0.001 for k in (1, 2, 10, 1000))

    def test_sqrt(self):
        assert step_size(StepSchedule(0.02, 0.5), 4) == pytest.approx(0.01)

    def test_round_zero_rejected(self):
        with pytest.raises(ScheduleError):
            step_size(StepSchedule(0.1), 0)

    def test_negative_parameters(self):
        with pytest.raises(ScheduleError):
            StepSchedule(-0.1)
        with pytest.raises(ScheduleError):
            StepSchedule(0.1, -1.0)

    def test_callable(self):
        assert StepSchedule(1.0, 1.0)(5) == pytest.approx(0.2)


class TestDGDRound:
    """Test cases for exact-communication DGD"""

    def setup_method(self):
        self.w = averaging_matrix(2)
        self.objs = two_node_objectives()

    def test_two_node_step(self):
        state = NetworkState(x=np.zeros((2, 1)), x_tilde=np.zeros((2, 1)), y=np.zeros((2, 1)), k=1)
        out = dgd_round(state, self.w, self.objs, 0.001)
        assert np.allclose(out.state.x, [[0.016], [-0.012]])
        assert out.state.k == 2

    def test_common_stationary_point_is_fixed(self):
        objs = ObjectiveSet([quadratic(1.0, [0.5]), quadratic(3.0, [0.5]), quadratic(2.0, [0.5])])
        w = metropolis_matrix(build_ring(3))
        x = np.full((3, 1), 0.5)
        out = dgd_round(NetworkState(x=x, x_tilde=x, y=np.zeros_like(x), k=3), w, objs, 0.1)
        assert np.allclose(out.state.x, x, atol=1e-15)

    def test_mean_preserved_without_gradients(self):
        w = metropolis_matrix(build_star(5))
        objs = ObjectiveSet([quadratic(0.0, [0.0, 0.0]) for _ in range(5)])
        x = np.random.default_rng(0).standard_normal((5, 2))
        out = dgd_round(NetworkState(x=x, x_tilde=x, y=np.zeros_like(x), k=1), w, objs, 0.1)
        assert np.allclose(out.state.x.mean(axis=0), x.mean(axis=0), atol=1e-14)

    def test_bytes_eight_per_coordinate_per_link(self):
        w = metropolis_matrix(build_star(4))
        objs = ObjectiveSet([quadratic(1.0, [0.0, 0.0, 0.0]) for _ in range(4)])
        state = initial_state(w, objs, StepSchedule(0.01))
        assert dgd_round(state, w, objs, 0.01).bytes == 8 * 3 * 6

    def test_divergence_detected(self):
        x = np.array([[1e13], [1e13]])
        state = NetworkState(x=x, x_tilde=x, y=np.zeros_like(x), k=7)
        with pytest.raises(DivergenceError) as exc:
            dgd_round(state, metropolis_matrix(build_path(2)), two_node_objectives(), 0.001)
        assert exc.value.round_index == 7


class TestDGDt:
    """Test cases for t consensus steps per gradient step"""

    def setup_method(self):
        self.w = metropolis_matrix(build_ring(6))
        self.objs = ObjectiveSet([quadratic(1.0 + i, [0.1 * i]) for i in range(6)])
        self.state = initial_state(self.w, self.objs, StepSchedule(0.05))

    def test_t1_matches_dgd(self):
        a = dgd_round(self.state, self.w, self.objs, 0.05)
        b = dgd_t_round(self.state, self.w, self.objs, 0.05, 1)
        assert np.array_equal(a.state.x, b.state.x)
        assert a.bytes == b.bytes

    def test_bytes_scale_with_t(self):
        base = dgd_round(self.state, self.w, self.objs, 0.05).bytes
        assert dgd_t_round(self.state, self.w, self.objs, 0.05, 3).bytes == 3 * base
        assert dgd_t_round(self.state, self.w, self.objs, 0.05, 5).bytes == 5 * base

    @pytest.mark.parametrize("t", [1, 3, 5])
    def test_disagreement_shrinks_by_beta_power(self, t):
        objs = ObjectiveSet([quadratic(0.0, [0.0]) for _ in range(6)])
        x = np.random.default_rng(t).standard_normal((6, 1))
        out = dgd_t_round(NetworkState(x=x, x_tilde=x, y=np.zeros_like(x), k=1), self.w, objs, 0.05, t)
        before = np.linalg.norm(x - x.mean())
        after = np.linalg.norm(out.state.x - out.state.x.mean())
        assert after <= self.w.beta ** t * before + 1e-12

    def test_zero_steps_rejected(self):
        with pytest.raises(SimulationError):
            dgd_t_round(self.state, self.w, self.objs, 0.05, 0)


class TestNaiveCompressedRound:
    """Test cases for compressing the iterates directly"""

    def setup_method(self):
        self.w = metropolis_matrix(build_path(2))
        self.objs = two_node_objectives()
        x = np.array([[0.3], [-0.6]])
        self.state = NetworkState(x=x, x_tilde=x, y=np.zeros_like(x), k=3)

    def test_identity_matches_dgd(self):
        a = naive_compressed_round(self.state, self.w, self.objs, 0.001, identity(), streams(2, 0))
        b = dgd_round(self.state, self.w, self.objs, 0.001)
        assert np.array_equal(a.state.x, b.state.x)

    def test_expectation_equals_dgd(self):
        """Weighted sum over the four rounding outcomes"""
        probs = {0: (0.3, 0.7), 1: (0.4, 0.6)}
        expected = np.zeros((2, 1))
        for draws in itertools.product((UP, DOWN), repeat=2):
            weight = np.prod([probs[i][0] if d is UP else probs[i][1] for i, d in enumerate(draws)])
            out = naive_compressed_round(self.state, self.w, self.objs, 0.001, stochastic_rounding(), draws)
            expected += weight * out.state.x
        exact = dgd_round(self.state, self.w, self.objs, 0.001).state.x
        assert np.allclose(expected, exact, atol=1e-12)

    def test_bytes_two_per_coordinate(self):
        out = naive_compressed_round(self.state, self.w, self.objs, 0.001, stochastic_rounding(), streams(2, 1))
        assert out.bytes == 2 * 1 * 2
        assert len(out.messages) == 2


class TestADCRound:
    """Test cases for amplified-differential compression"""

    def setup_method(self):
        self.w = metropolis_matrix(build_path(2))
        self.objs = two_node_objectives()
        self.schedule = StepSchedule(0.001)

    def _state(self, x, y, k):
        x = np.asarray(x, dtype=np.float64)
        x_tilde = x - np.asarray(y, dtype=np.float64)
        memory = np.broadcast_to(x_tilde[None, :, :], (2, 2, 1)).copy()
        return NetworkState(x=x, x_tilde=x_tilde, y=x - x_tilde, k=k, memory=memory)

    def test_initialization(self):
        """x_1 = y_1 = -alpha_1 grad f(0)"""
        state = initial_state(self.w, self.objs, self.schedule, with_memory=True)
        assert np.allclose(state.x, [[0.016], [-0.012]])
        assert np.array_equal(state.y, state.x)
        assert np.array_equal(state.x_tilde, np.zeros((2, 1)))
        assert state.k == 1

    def test_identity_trajectory_matches_dgd(self):
        w = metropolis_matrix(build_star(4))
        objs = ObjectiveSet([quadratic(-4.0, [0.0]), quadratic(2.0, [0.2]), quadratic(2.0, [-0.3]),
                             quadratic(5.0, [0.1])])
        schedule = StepSchedule(0.02, 0.5)
        exact = initial_state(w, objs, schedule)
        adc = initial_state(w, objs, schedule, with_memory=True)
        for k in range(1, 60):
            alpha = step_size(schedule, k)
            exact = dgd_round(exact, w, objs, alpha).state
            adc = adc_round(adc, w, objs, alpha, 1.3, identity(), streams(4, 0, k)).state
            assert np.array_equal(exact.x, adc.x)

    def test_expectation_equals_exact_round(self):
        """k^gamma y = (0.3, -0.7): both nodes round up with probability 0.3"""
        state = self._state([[0.5], [-0.2]], [[0.15], [-0.35]], k=2)
        expected = np.zeros((2, 1))
        for draws in itertools.product((UP, DOWN), repeat=2):
            weight = np.prod([0.3 if d is UP else 0.7 for d in draws])
            out = adc_round(state, self.w, self.objs, 0.001, 1.0, stochastic_rounding(), draws)
            expected += weight * out.state.x
        exact = dgd_round(state, self.w, self.objs, 0.001).state.x
        assert np.allclose(expected, exact, atol=1e-12)

    def test_receiver_memories_agree(self):
        w = metropolis_matrix(build_ring(5))
        objs = ObjectiveSet([quadratic(1.0 + i, [0.2 * i, -0.1 * i]) for i in range(5)])
        state = initial_state(w, objs, self.schedule, with_memory=True)
        for k in range(1, 30):
            state = adc_round(state, w, objs, 0.01, 1.0, stochastic_rounding(), streams(5, 3, k)).state
            assert check_memory_consistency(state, w)
        view = state.node(2, w.graph.neighbors(2))
        assert sorted(view.x_tilde_neighbors) == [1, 3]
        assert np.allclose(view.x_tilde_neighbors[3], state.x_tilde[3], atol=1e-12)

    def test_receivers_integrate_codewords(self):
        """A receiver's copy moves by exactly the de-amplified codeword it received"""
        w = metropolis_matrix(build_ring(5))
        objs = ObjectiveSet([quadratic(1.0 + i, [0.2 * i, -0.1 * i]) for i in range(5)])
        state = initial_state(w, objs, self.schedule, with_memory=True)
        state = adc_round(state, w, objs, 0.01, 1.0, stochastic_rounding(), streams(5, 3, 1)).state
        out = adc_round(state, w, objs, 0.01, 2.0, stochastic_rounding(), streams(5, 3, 2))
        expected = state.memory[2, 3] + decode(out.messages[3]) / 4.0
        assert np.array_equal(out.state.memory[2, 3], expected)
        assert np.array_equal(out.state.memory[2, 0], state.memory[2, 0])

    def test_corrupted_receiver_copy_detected(self):
        w = metropolis_matrix(build_ring(5))
        objs = ObjectiveSet([quadratic(1.0 + i, [0.2 * i, -0.1 * i]) for i in range(5)])
        state = initial_state(w, objs, self.schedule, with_memory=True)
        for k in range(1, 4):
            state = adc_round(state, w, objs, 0.01, 1.0, stochastic_rounding(), streams(5, 3, k)).state
        memory = state.memory.copy()
        memory[1, 2] += 123.0
        corrupted = NetworkState(x=state.x, x_tilde=state.x_tilde, y=state.y, k=state.k, memory=memory)
        assert not check_memory_consistency(corrupted, w)
        with pytest.raises(SimulationError, match="Receiver memories disagree"):
            adc_round(corrupted, w, objs, 0.01, 1.0, stochastic_rounding(), streams(5, 3, 4))

    def test_mean_iterate_recursion(self):
        """x_bar' = x_bar - alpha mean grad + mean noise"""
        w = metropolis_matrix(build_star(4))
        objs = ObjectiveSet([quadratic(1.0, [0.0]), quadratic(2.0, [0.2]), quadratic(2.0, [-0.3]),
                             quadratic(5.0, [0.1])])
        state = initial_state(w, objs, self.schedule, with_memory=True)
        for k in range(1, 20):
            out = adc_round(state, w, objs, 0.02, 1.0, stochastic_rounding(), streams(4, 5, k))
            predicted = (state.x.mean(axis=0) - 0.02 * objs.gradients(state.x).mean(axis=0)
                         + out.noise.mean(axis=0))
            assert np.allclose(out.state.x.mean(axis=0), predicted, atol=1e-12)
            state = out.state

    def test_quarter_of_dgd_bytes(self):
        w = metropolis_matrix(build_star(4))
        objs = ObjectiveSet([quadratic(1.0, [0.0]) for _ in range(4)])
        state = initial_state(w, objs, self.schedule, with_memory=True)
        adc = adc_round(state, w, objs, 0.001, 1.0, stochastic_rounding(), streams(4, 0))
        dgd = dgd_round(state, w, objs, 0.001)
        assert adc.bytes == 12
        assert dgd.bytes == 48

    def test_max_transmitted_is_amplified(self):
        state = self._state([[0.5], [-0.2]], [[0.15], [-0.35]], k=2)
        out = adc_round(state, self.w, self.objs, 0.001, 1.0, stochastic_rounding(), streams(2, 0))
        assert out.max_transmitted == pytest.approx(0.7)

    def test_overflow_names_node_and_round(self):
        state = self._state([[0.0], [1e5]], [[0.0], [1e5]], k=1)
        with pytest.raises(CompressionOverflowError) as exc:
            adc_round(state, self.w, self.objs, 0.001, 1.0, stochastic_rounding(), streams(2, 0))
        assert exc.value.node == 1
        assert exc.value.round_index == 1
        assert "reduce gamma" in str(exc.value)

    def test_missing_memory_rejected(self):
        state = initial_state(self.w, self.objs, self.schedule)
        with pytest.raises(SimulationError):
            adc_round(state, self.w, self.objs, 0.001, 1.0, stochastic_rounding(), streams(2, 0))


class TestAdvance:
    """Test cases for the kernel dispatcher"""

    def test_compressed_algorithms_need_streams(self):
        w = metropolis_matrix(build_path(2))
        objs = two_node_objectives()
        state = initial_state(w, objs, StepSchedule(0.001), with_memory=True)
        with pytest.raises(SimulationError):
            advance(Algorithm.ADC, state, w, objs, StepSchedule(0.001))

    def test_uses_schedule_at_round(self):
        w = metropolis_matrix(build_path(2))
        objs = two_node_objectives()
        schedule = StepSchedule(0.04, 1.0)
        state = initial_state(w, objs, schedule)
        state = NetworkState(x=state.x, x_tilde=state.x, y=state.y, k=4)
        out = advance("dgd", state, w, objs, schedule)
        assert np.array_equal(out.state.x, dgd_round(state, w, objs, 0.01).state.x)
