import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fbftrack import (ContinuousTransferFunction, DiscreteStateSpace,
                      LiftedOperator, discretize_zoh, effective_impulse_length,
                      impulse_response, lifted_filter, simulate)
from fbftrack.lifted import ModelError
from fbftrack.oracles import continuous_step_response

from conftest import TS


def delay_model():
    # one-step delay realization
    return DiscreteStateSpace(np.zeros((1, 1)), np.ones((1, 1)),
                              np.ones((1, 1)), 0.0, TS)


class TestTransferFunction:
    def test_pure_gain(self):
        tf = ContinuousTransferFunction([3.0], [1.0])
        model = discretize_zoh(tf, TS)
        assert model.order == 0
        assert model.d == 3.0

    def test_improper_rejected(self):
        with pytest.raises(ModelError, match="improper"):
            ContinuousTransferFunction([1.0, 0.0, 0.0], [1.0, 1.0])

    def test_zero_leading_den_rejected(self):
        with pytest.raises(ModelError, match="leading"):
            ContinuousTransferFunction([1.0], [0.0, 1.0])

    def test_unstable_rejected(self):
        tf = ContinuousTransferFunction([1.0], [1.0, -1.0])
        with pytest.raises(ModelError, match="unstable"):
            discretize_zoh(tf, TS)

    def test_axis_model_dc_gain_is_unity(self, axis_x_tf):
        # constant numerator and denominator terms are identical
        model = discretize_zoh(axis_x_tf, TS)
        assert abs(model.dc_gain() - 1.0) < 1e-6


class TestDiscretizeZoh:
    def test_first_order_pole_closed_form(self):
        a = 10.0
        tf = ContinuousTransferFunction([1.0], [1.0, a])
        model = discretize_zoh(tf, TS)
        pole = np.linalg.eigvals(model.a)[0]
        assert pole == pytest.approx(np.exp(-a * TS), rel=1e-12)

    @pytest.mark.parametrize("tf_fixture", ["axis_x_tf", "damped_tf"])
    def test_step_response_matches_continuous(self, tf_fixture, request):
        tf = request.getfixturevalue(tf_fixture)
        model = discretize_zoh(tf, TS)
        n = 800
        discrete = np.cumsum(impulse_response(model, n))
        continuous = continuous_step_response(tf, TS, n)
        scale = np.abs(continuous).max()
        assert np.abs(discrete - continuous).max() < 1e-8 * scale

    def test_negative_ts_rejected(self, axis_x_tf):
        with pytest.raises(ModelError):
            discretize_zoh(axis_x_tf, -1.0)


class TestImpulseResponse:
    def test_pure_gain(self):
        model = discretize_zoh(ContinuousTransferFunction([3.0], [1.0]), TS)
        assert np.array_equal(impulse_response(model, 5), [3, 0, 0, 0, 0])

    def test_one_step_delay(self):
        assert np.array_equal(impulse_response(delay_model(), 4), [0, 1, 0, 0])

    def test_axis_partial_sums_converge_to_dc(self, axis_x_model):
        h = impulse_response(axis_x_model, 4000)
        assert abs(h.sum() - 1.0) < 1e-3

    def test_effective_length_truncates(self, axis_x_model):
        n = effective_impulse_length(axis_x_model)
        h = impulse_response(axis_x_model, 2 * n)
        assert np.abs(h[n:]).max() < 1e-12 * np.abs(h).max()

    def test_effective_length_gain(self):
        model = discretize_zoh(ContinuousTransferFunction([2.0], [1.0]), TS)
        assert effective_impulse_length(model) == 1


class TestLiftedFilter:
    def test_identity_filter(self):
        u = np.arange(5.0)
        assert np.array_equal(lifted_filter([1.0], u), u)

    def test_hand_convolution(self):
        out = lifted_filter([1.0, 0.5], [1.0, 0.0])
        assert np.allclose(out, [1.0, 0.5], atol=0)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10 ** 6))
    def test_matches_state_recursion_fir(self, seed):
        rng = np.random.default_rng(seed)
        h = rng.normal(size=50)
        u = rng.normal(size=200)
        # delay-line realization of the same FIR filter
        n = h.size - 1
        a = np.zeros((n, n))
        a[1:, :-1] = np.eye(n - 1)
        model = DiscreteStateSpace(a, np.eye(n, 1), h[1:].reshape(1, -1),
                                   h[0], TS)
        assert np.abs(lifted_filter(h, u) - simulate(model, u)).max() < 1e-10

    def test_initial_tail_matches_matched_state(self, axis_x_model):
        rng = np.random.default_rng(7)
        tail = rng.normal(size=120)
        u = rng.normal(size=300)
        n = effective_impulse_length(axis_x_model)
        h = impulse_response(axis_x_model, max(n, tail.size + u.size))
        # recursion warmed up on the tail, then run over u
        full = simulate(axis_x_model, np.concatenate([tail, u]))[tail.size:]
        out = lifted_filter(h, u, initial_tail=tail)
        assert np.abs(out - full).max() < 1e-10

    def test_stable_model_lifted_equals_recursion(self, axis_x_model):
        rng = np.random.default_rng(3)
        u = rng.normal(size=400)
        h = impulse_response(axis_x_model,
                             effective_impulse_length(axis_x_model))
        assert np.abs(lifted_filter(h, u)
                      - simulate(axis_x_model, u)).max() < 1e-10


class TestLiftedOperator:
    def test_from_impulse_is_lower_triangular_toeplitz(self, axis_x_model):
        h = impulse_response(axis_x_model, 40)
        op = LiftedOperator.from_impulse(h, 40)
        m = op.matrix
        assert np.array_equal(m, np.tril(m))
        for k in range(40):
            assert np.allclose(np.diagonal(m, -k), h[k], atol=0)

    def test_apply_equals_filter(self, axis_x_model):
        rng = np.random.default_rng(1)
        u = rng.normal(size=64)
        op = LiftedOperator.from_model(axis_x_model, 64)
        assert np.abs(op.apply(u) - simulate(axis_x_model, u)).max() < 1e-10

    def test_non_causal_rejected(self):
        bad = np.array([[0.0, 1.0], [0.0, 0.0]])
        with pytest.raises(ModelError, match="causal"):
            LiftedOperator(bad)

    def test_non_toeplitz_rejected(self):
        bad = np.array([[1.0, 0.0], [0.5, 2.0]])
        with pytest.raises(ModelError, match="Toeplitz"):
            LiftedOperator(bad)


class TestSimulate:
    def test_pure_gain(self):
        model = discretize_zoh(ContinuousTransferFunction([2.0], [1.0]), TS)
        assert np.array_equal(simulate(model, np.ones(4)), 2 * np.ones(4))

    def test_unstable_state_space_rejected(self):
        with pytest.raises(ModelError, match="unstable"):
            DiscreteStateSpace(np.array([[1.1]]), np.ones((1, 1)),
                               np.ones((1, 1)), 0.0, TS)
