import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tabsim.device import (
    MismatchConfig,
    SubthresholdParams,
    TuningCurve,
    branch_output,
    characterize,
    sample_population,
    systematic_vref,
)
from tabsim.errors import DomainError
from tabsim.network import (
    AnalyticNeuronParams,
    AnalyticSource,
    DeviceSource,
    InputMap,
    MeasuredSource,
    OutputWeights,
    analytic_equivalent,
    build_activation_matrix,
    hidden_response,
    predict,
    sample_analytic,
)


def device_source(L=8, seed=0, policy="split_halves"):
    p = SubthresholdParams()
    pop = sample_population(L, p, MismatchConfig(seed=seed), systematic_vref(0.2, 0.8, L), policy)
    return DeviceSource(pop, p)


def test_analytic_zero_at_origin():
    src = AnalyticSource.from_params([AnalyticNeuronParams(1.0, 0.0, 0.0, 1)])
    assert hidden_response(src, 0.0)[0] == 0.0


def test_analytic_direction_negates():
    plus = AnalyticSource([2.0], [0.3], [-0.1], [1])
    minus = AnalyticSource([2.0], [0.3], [-0.1], [-1])
    xs = np.linspace(-1, 1, 17)
    assert np.array_equal(minus.responses(xs), -plus.responses(xs))


def test_analytic_hand_evaluation():
    src = AnalyticSource([1.5, -0.5], [0.1, 0.0], [0.0, 0.2], [1, -1])
    H = build_activation_matrix(src, [-1.0, 0.0, 1.0])
    expected = [[math.tanh(1.5 * x + 0.1), -math.tanh(-0.5 * x + 0.2)] for x in (-1.0, 0.0, 1.0)]
    np.testing.assert_allclose(H, expected, rtol=1e-15)


def test_analytic_multi_input():
    src = AnalyticSource([[1.0, 2.0], [0.5, -1.0]], [0.0, 0.1], [0.0, 0.0], [1, 1])
    X = np.array([[0.2, -0.3]])
    np.testing.assert_allclose(src.responses(X)[0],
                               np.tanh([0.2 - 0.6, 0.1 + 0.3 + 0.1]), rtol=1e-15)


def test_analytic_params_roundtrip():
    src = AnalyticSource([1.0, 2.0], [0.0, 0.1], [0.2, 0.3], [1, -1])
    again = AnalyticSource.from_params(src.params())
    assert np.array_equal(again.w1, src.w1) and np.array_equal(again.d1, src.d1)


def test_measured_midpoint_interpolation():
    curve = TuningCurve(0, np.array([-1.0, 1.0]), np.array([0.0, 10e-9]), 10e-9, 0.0)
    src = MeasuredSource([curve], scale=1e8)
    assert hidden_response(src, 0.0)[0] == pytest.approx(0.5, rel=1e-12)


def test_measured_clamps_outside_span():
    curve = TuningCurve(0, np.array([-0.5, 0.5]), np.array([1.0, 3.0]), 3.0, 0.0)
    src = MeasuredSource([curve])
    np.testing.assert_array_equal(src.responses([-1.0, 1.0])[:, 0], [1.0, 3.0])


def test_empty_sources_rejected():
    with pytest.raises(DomainError):
        AnalyticSource.from_params([])
    with pytest.raises(DomainError):
        DeviceSource([], SubthresholdParams())
    with pytest.raises(DomainError):
        MeasuredSource([])


def test_invalid_analytic_params():
    with pytest.raises(DomainError):
        AnalyticNeuronParams(1.0, 0.0, 0.0, 0)
    with pytest.raises(DomainError):
        AnalyticNeuronParams(float("inf"), 0.0, 0.0, 1)


def test_matrix_single_row_and_duplicates():
    src = sample_analytic(5, np.random.default_rng(0))
    H1 = build_activation_matrix(src, [0.3])
    np.testing.assert_array_equal(H1[0], hidden_response(src, 0.3))
    H = build_activation_matrix(src, [0.1, 0.1, -0.4])
    np.testing.assert_array_equal(H[0], H[1])
    assert not H.flags.writeable


def test_matrix_needs_inputs():
    with pytest.raises(DomainError):
        build_activation_matrix(sample_analytic(3, np.random.default_rng(0)), [])


def test_predict_examples():
    src = sample_analytic(6, np.random.default_rng(1))
    assert predict(src, np.zeros(6), 0.4) == 0.0
    e = np.zeros(6)
    e[2] = 1.0
    assert predict(src, e, 0.4) == hidden_response(src, 0.4)[2]
    with pytest.raises(DomainError):
        predict(src, np.zeros(5), 0.0)


def test_predict_brute_force(rng):
    src = sample_analytic(7, rng)
    w = rng.uniform(-1, 1, 7)
    x = 0.37
    r = [math.tanh(src.w1[i] * x + src.b1[i] + src.o1[i]) * src.d1[i] for i in range(7)]
    assert predict(src, OutputWeights(w), x) == pytest.approx(sum(a * b for a, b in zip(r, w)), rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-3, 3))
def test_predict_linear_in_weights(seed, alpha):
    rng = np.random.default_rng(seed)
    src = sample_analytic(9, rng)
    w1, w2 = rng.uniform(-1, 1, 9), rng.uniform(-1, 1, 9)
    xs = np.linspace(-1, 1, 11)
    lhs = predict(src, alpha * w1 + w2, xs)
    rhs = alpha * predict(src, w1, xs) + predict(src, w2, xs)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12)


def test_predict_matches_matrix_rows(rng):
    src = device_source(10)
    xs = np.linspace(-1, 1, 21)
    H = build_activation_matrix(src, xs)
    w = rng.uniform(-1, 1, 10)
    for n, x in enumerate(xs):
        assert predict(src, w, x) == pytest.approx(H[n] @ w, rel=1e-12)


def test_device_source_matches_device_model():
    src = device_source(6)
    xs = np.linspace(-1, 1, 9)
    v = InputMap()(xs)
    H = src.responses(xs)
    for j, nr in enumerate(src.neurons):
        np.testing.assert_allclose(H[:, j], src.scale * branch_output(nr, v, src.params), rtol=1e-13)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_device_is_affine_in_analytic(seed):
    src = device_source(12, seed)
    eq = analytic_equivalent(src)
    xs = np.linspace(-1, 1, 2001)
    D = src.responses(xs)
    A = eq.responses(xs)
    amp = src.scale * src._gain * src._ib / 2.0
    np.testing.assert_allclose(D, amp * (1.0 + A), rtol=1e-6, atol=1e-12)


def test_measured_replays_device():
    src = device_source(8)
    grid = np.linspace(0.0, 1.0, 2001)
    curves = [characterize(n, grid, src.params, respect_direction=True) for n in src.neurons]
    measured = MeasuredSource(curves, src.scale, src.input_map)
    xs = np.linspace(-0.95, 0.95, 301)
    step = grid[1] - grid[0]
    # linear interpolation error is bounded by step^2/8 * max|f''|; f'' <= 0.1/(nU_T)^2 per unit amplitude
    bound = step**2 / 8 * 0.1 / src.params.nUT**2 * np.max(src.scale * src._gain * src._ib)
    assert np.max(np.abs(measured.responses(xs) - src.responses(xs))) <= bound


def test_subset_keeps_columns():
    src = device_source(10)
    idx = np.array([1, 4, 7])
    xs = np.linspace(-1, 1, 5)
    np.testing.assert_array_equal(src.subset(idx).responses(xs), src.responses(xs)[:, idx])
    a = sample_analytic(10, np.random.default_rng(2))
    np.testing.assert_array_equal(a.subset(idx).responses(xs), a.responses(xs)[:, idx])


def test_sample_analytic_policies():
    rng = np.random.default_rng(0)
    assert list(sample_analytic(5, rng).d1) == [1, 1, 1, -1, -1]
    assert set(sample_analytic(5, rng, direction_policy="positive").d1) == {1.0}
    with pytest.raises(DomainError):
        sample_analytic(0, rng)
    with pytest.raises(DomainError):
        sample_analytic(3, rng, direction_policy="up")


def test_output_weights_box_flag():
    assert OutputWeights([0.5, -0.5]).in_box()
    assert not OutputWeights([1.0]).in_box()
