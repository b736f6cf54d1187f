"""
Tests for local objectives
"""

import math

import numpy as np
import pytest

from adc_dgd.core.objectives import (
    ObjectiveSet, QuadraticObjective, check_lipschitz, global_minimizer_quadratic,
    growth_ratio_check, lipschitz_bound, quadratic, quartic_cubic, random_quadratics,
    sine_quadratic, sum_gradient,
)
from adc_dgd.utils.error_handling import (
    AssumptionViolationWarning, NoFiniteMinimizerError, ObjectiveError,
)


class TestQuadratic:
    """Test cases for a ||x - b||^2"""

    def test_value_and_gradient(self):
        f = quadratic(4.0, [2.0])
        assert f.value(np.array([0.0])) == pytest.approx(16.0)
        assert np.allclose(f.gradient(np.array([0.0])), [-16.0])

    def test_negative_curvature(self):
        f = quadratic(-4.0, [0.0])
        assert f.value([1.0]) == pytest.approx(-4.0)
        assert np.allclose(f.gradient([1.0]), [-8.0])
        assert f.lipschitz == 8.0

    def test_offset(self):
        f = quadratic(1.0, [1.0, 2.0]).shifted(3.0)
        assert f.value([1.0, 2.0]) == pytest.approx(3.0)

    def test_dimension_mismatch(self):
        f = quadratic(1.0, [0.0, 0.0])
        with pytest.raises(ObjectiveError):
            f.gradient(np.zeros(3))

    def test_center_is_read_only(self):
        f = QuadraticObjective(1.0, np.array([1.0]))
        with pytest.raises(ValueError):
            f.b[0] = 2.0


class TestExamples:
    """Test cases for the non-quadratic example objectives"""

    def test_quartic_cubic(self):
        f = quartic_cubic()
        assert f.value([1.0]) == pytest.approx(6.0)
        assert np.allclose(f.gradient([1.0]), [19.0])
        assert math.isinf(f.lipschitz)

    def test_sine_quadratic(self):
        f = sine_quadratic()
        assert f.value([0.0]) == pytest.approx(0.0)
        assert np.allclose(f.gradient([0.0]), [10.0])
        assert f.lipschitz == 12.0

    def test_sine_quadratic_lipschitz_holds(self):
        f = sine_quadratic()
        ratio = check_lipschitz(f, np.random.default_rng(0), samples=500)
        assert ratio <= 12.0 + 1e-9


class TestObjectiveSet:
    """Test cases for stacked evaluation"""

    def setup_method(self):
        self.objs = ObjectiveSet([quadratic(4.0, [2.0]), quadratic(2.0, [-3.0])])

    def test_gradients_rowwise(self):
        x = np.array([[1.0], [0.0]])
        assert np.allclose(self.objs.gradients(x), [[-8.0], [12.0]])

    def test_total(self):
        x = np.array([[1.0], [0.0]])
        assert self.objs.total(x) == pytest.approx(4.0 + 18.0)

    def test_vectorized_matches_scalar(self):
        mixed = ObjectiveSet([sine_quadratic(), sine_quadratic()])
        x = np.array([[0.3], [-1.2]])
        expected = np.stack([sine_quadratic().gradient(x[0]), sine_quadratic().gradient(x[1])])
        assert np.allclose(mixed.gradients(x), expected)
        assert mixed.curvatures() is None

    def test_shape_checked(self):
        with pytest.raises(ObjectiveError):
            self.objs.gradients(np.zeros((3, 1)))

    def test_mixed_dimensions_rejected(self):
        with pytest.raises(ObjectiveError):
            ObjectiveSet([quadratic(1.0, [0.0]), quadratic(1.0, [0.0, 1.0])])

    def test_lipschitz_bound(self):
        assert lipschitz_bound(self.objs) == 8.0
        assert self.objs.lipschitz() == 8.0


class TestMinimizer:
    """Test cases for quadratic global minimizers"""

    def test_two_node_minimizer(self):
        """(4*2 + 2*(-3)) / 6 = 1/3"""
        objs = [quadratic(4.0, [2.0]), quadratic(2.0, [-3.0])]
        x_star = global_minimizer_quadratic(objs)
        assert np.allclose(x_star, [1.0 / 3.0])
        assert np.allclose(sum_gradient(objs, x_star), [0.0], atol=1e-12)

    def test_four_node_minimizer(self):
        objs = [quadratic(-4.0, [0.0]), quadratic(2.0, [0.2]), quadratic(2.0, [-0.3]), quadratic(5.0, [0.1])]
        assert np.allclose(global_minimizer_quadratic(objs), [0.1 / 5.0])

    def test_no_finite_minimizer(self):
        objs = [quadratic(-4.0, [0.0]), quadratic(2.0, [1.0])]
        with pytest.raises(NoFiniteMinimizerError):
            global_minimizer_quadratic(objs)


class TestGrowth:
    """Test cases for the sampled coercivity ratio"""

    def test_ratio_shrinks_with_radius(self):
        objs = [quadratic(-4.0, [0.0]), quadratic(2.0, [0.2]), quadratic(2.0, [-0.3]), quadratic(5.0, [0.1])]
        rng = np.random.default_rng(1)
        near = growth_ratio_check(objs, 10.0, rng=rng)
        far = growth_ratio_check(objs, 1000.0, rng=rng)
        assert far < near

    def test_violation_warns(self):
        objs = [quadratic(-4.0, [0.0]), quadratic(1.0, [0.0])]
        with pytest.warns(AssumptionViolationWarning):
            ratio = growth_ratio_check(objs, 10.0, samples=5)
        assert math.isinf(ratio)

    def test_bad_radius(self):
        with pytest.raises(ObjectiveError):
            growth_ratio_check([quadratic(1.0, [0.0])], 0.0)


class TestRandomQuadratics:
    """Test cases for the random quadratic generator"""

    def test_ranges(self):
        rngs = [np.random.default_rng(i) for i in range(6)]
        objs = random_quadratics(6, 3, rngs)
        for o in objs:
            assert 0.0 <= o.a <= 10.0
            assert o.b.shape == (3,)
            assert np.all((o.b >= 0.0) & (o.b <= 1.0))

    def test_stream_count_checked(self):
        with pytest.raises(ObjectiveError):
            random_quadratics(3, 1, [np.random.default_rng(0)])
