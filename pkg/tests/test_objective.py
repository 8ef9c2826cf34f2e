import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qknn.errors import DimensionError, ParameterError
from qknn.graph import KnnGraph, build_knn_graph, incidence_apply
from qknn.objective import dn2_loss, mse, pinball, quantile_objective

finite_floats = st.floats(-1e6, 1e6, allow_nan=False)
taus = st.floats(0.01, 0.99)


class TestPinball:
    def test_zero_at_origin(self):
        assert pinball(0.0, 0.3) == 0.0

    def test_positive_side(self):
        assert pinball(2.0, 0.5) == 1.0

    def test_negative_side(self):
        assert pinball(-1.0, 0.9) == pytest.approx(0.1)

    @given(finite_floats, taus)
    def test_nonnegative(self, t, tau):
        assert pinball(t, tau) >= 0.0

    @given(finite_floats, taus)
    def test_reflection_identity(self, t, tau):
        # complementary levels split |t|: pinball(t, tau) + pinball(t, 1-tau) = |t|
        total = pinball(t, tau) + pinball(t, 1.0 - tau)
        assert total == pytest.approx(abs(t), rel=1e-12, abs=1e-12)
        # and reflecting both argument and level is a symmetry (t != 0)
        if t != 0.0:
            assert pinball(-t, 1.0 - tau) == pytest.approx(
                pinball(t, tau), rel=1e-12, abs=1e-12
            )

    @given(finite_floats)
    def test_median_is_half_abs(self, t):
        assert pinball(t, 0.5) == pytest.approx(abs(t) / 2, rel=1e-12, abs=1e-12)

    @given(finite_floats, finite_floats, taus, st.floats(0, 1))
    @settings(max_examples=50)
    def test_convex_in_t(self, a, b, tau, w):
        mid = pinball(w * a + (1 - w) * b, tau)
        assert mid <= w * pinball(a, tau) + (1 - w) * pinball(b, tau) + 1e-9

    def test_tau_range_checked(self):
        with pytest.raises(ParameterError):
            pinball(1.0, 0.0)
        with pytest.raises(ParameterError):
            pinball(1.0, 1.0)


class TestQuantileObjective:
    def setup_method(self):
        rng = np.random.default_rng(0)
        self.G = build_knn_graph(rng.uniform(size=(12, 2)), 3)
        self.rng = rng

    def test_perfect_fit_leaves_penalty(self):
        y = self.rng.normal(size=12)
        lam = 0.7
        expected = lam * np.abs(incidence_apply(self.G, y)).sum()
        assert quantile_objective(y, y, 0.5, lam, self.G) == pytest.approx(expected)

    def test_two_point_hand_value(self):
        G = KnnGraph(n=2, k=1, edges=np.array([[0, 1]]))
        val = quantile_objective(
            np.array([0.0, 2.0]), np.array([0.0, 0.0]), 0.5, 0.0, G
        )
        assert val == 1.0

    def test_matches_term_by_term(self):
        y = self.rng.normal(size=12)
        theta = self.rng.normal(size=12)
        tau, lam = 0.3, 1.3
        res = y - theta
        fit = sum(
            (tau - 1) * r if r <= 0 else tau * r for r in res
        )
        pen = lam * sum(
            abs(theta[i] - theta[j]) for i, j in self.G.edges
        )
        assert quantile_objective(y, theta, tau, lam, self.G) == pytest.approx(
            fit + pen, rel=1e-12
        )

    def test_convexity_random(self):
        y = self.rng.normal(size=12)
        for _ in range(20):
            a = self.rng.normal(size=12)
            b = self.rng.normal(size=12)
            t = self.rng.uniform()
            lhs = quantile_objective(y, t * a + (1 - t) * b, 0.7, 0.5, self.G)
            rhs = t * quantile_objective(y, a, 0.7, 0.5, self.G) + (
                1 - t
            ) * quantile_objective(y, b, 0.7, 0.5, self.G)
            assert lhs <= rhs + 1e-12

    def test_dimension_error(self):
        with pytest.raises(DimensionError):
            quantile_objective(np.zeros(12), np.zeros(11), 0.5, 1.0, self.G)

    def test_negative_lambda_rejected(self):
        with pytest.raises(ParameterError):
            quantile_objective(np.zeros(12), np.zeros(12), 0.5, -1.0, self.G)


class TestDn2Loss:
    def test_zero(self):
        assert dn2_loss(np.zeros(5)) == 0.0

    def test_small_value_squares(self):
        assert dn2_loss(np.array([0.5])) == 0.25

    def test_mixed(self):
        assert dn2_loss(np.array([2.0, -0.1])) == pytest.approx(1.005)

    def test_unnormalized_flag(self):
        delta = np.array([2.0, -0.1])
        assert dn2_loss(delta, normalized=False) == pytest.approx(2.01)

    def test_bounded_by_l1_and_l2(self):
        rng = np.random.default_rng(4)
        delta = rng.standard_cauchy(100)
        val = dn2_loss(delta)
        assert val <= np.abs(delta).mean() + 1e-12
        assert val <= (delta**2).mean() + 1e-12


class TestMse:
    def test_zero_on_equal(self):
        v = np.arange(5.0)
        assert mse(v, v) == 0.0

    def test_constant_shift(self):
        v = np.arange(5.0)
        assert mse(v + 3.0, v) == pytest.approx(9.0)

    def test_matches_direct_sum(self):
        rng = np.random.default_rng(7)
        a, b = rng.normal(size=50), rng.normal(size=50)
        assert mse(a, b) == pytest.approx(sum((x - y) ** 2 for x, y in zip(a, b)) / 50)

    def test_dimension_error(self):
        with pytest.raises(DimensionError):
            mse(np.zeros(3), np.zeros(4))
