import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tabsim.device import (
    MismatchConfig,
    NeuronPhysical,
    SubthresholdParams,
    TuningCurve,
    characterize,
    diff_pair_currents,
    neuron_output,
    population_stats,
    sample_population,
    systematic_vref,
)
from tabsim.errors import DomainError

volts = st.floats(-2.0, 2.0, allow_nan=False)
slope = st.floats(1.0, 2.0, exclude_min=True)
thermal = st.floats(0.015, 0.035)


def ideal(V_ref=0.5, I_b=9e-9, gain=1.0, direction=1):
    return NeuronPhysical(0, I_b, V_ref, gain, direction)


def test_params_validation():
    with pytest.raises(DomainError):
        SubthresholdParams(n=1.0)
    with pytest.raises(DomainError):
        SubthresholdParams(n=2.1)
    with pytest.raises(DomainError):
        SubthresholdParams(U_T=0.0)
    with pytest.raises(DomainError):
        SubthresholdParams(I_b_nominal=-1e-9)
    with pytest.raises(DomainError):
        MismatchConfig(sigma_vref=-0.1)
    with pytest.raises(DomainError):
        MismatchConfig(seed=-1)


def test_balanced_pair_splits_evenly():
    p = SubthresholdParams(I_b_nominal=10e-9)
    i1, i2 = diff_pair_currents(0.4, 0.4, p)
    assert i1 == pytest.approx(5e-9, rel=1e-15)
    assert i2 == pytest.approx(5e-9, rel=1e-15)


def test_saturation_ratio_at_100mV():
    p = SubthresholdParams(n=1.0 + 1e-15, U_T=0.025, I_b_nominal=1.0)
    i1, _ = diff_pair_currents(0.6, 0.5, p)
    # e^4 / (e^4 + 1)
    assert i1 == pytest.approx(math.exp(4) / (math.exp(4) + 1), rel=1e-12)
    assert round(i1, 3) == 0.982


def test_deep_cutoff():
    p = SubthresholdParams()
    i1, i2 = diff_pair_currents(0.2, 0.5, p)
    assert i1 < 1e-4 * p.I_b_nominal
    assert (i1 + i2) == pytest.approx(p.I_b_nominal, rel=1e-15)


def test_no_overflow_far_from_balance():
    p = SubthresholdParams()
    i1, i2 = diff_pair_currents(np.array([-1e3, 1e3]), 0.0, p)
    assert np.all(np.isfinite(i1)) and np.all(np.isfinite(i2))
    assert i1[0] == 0.0 and i1[1] == p.I_b_nominal


def test_non_finite_input_rejected():
    with pytest.raises(DomainError):
        diff_pair_currents(float("nan"), 0.5, SubthresholdParams())


@settings(max_examples=300, deadline=None)
@given(volts, volts, slope, thermal)
def test_conservation_and_tanh_identity(v_in, v_ref, n, U_T):
    p = SubthresholdParams(n, U_T, 7e-9)
    i1, i2 = diff_pair_currents(v_in, v_ref, p)
    assert abs(i1 + i2 - 7e-9) <= 1e-12 * 7e-9
    ref = 7e-9 * math.tanh((v_in - v_ref) / (2 * n * U_T))
    if abs(v_in - v_ref) >= 1e-6:
        assert abs((i1 - i2) - ref) <= 1e-9 * abs(ref)
    else:
        # i1 - i2 cancels near balance; only an absolute bound is meaningful
        assert abs((i1 - i2) - ref) <= 4 * np.finfo(float).eps * 7e-9


@settings(max_examples=200, deadline=None)
@given(volts, volts)
def test_antisymmetry(a, b):
    p = SubthresholdParams()
    i1_ab, _ = diff_pair_currents(a, b, p)
    _, i2_ba = diff_pair_currents(b, a, p)
    assert i1_ab == i2_ba


@settings(max_examples=100, deadline=None)
@given(st.lists(volts, min_size=2, max_size=30), st.floats(0.0, 1.0), st.floats(0.5, 1.5))
def test_neuron_output_monotone(vs, V_ref, gain):
    vs = np.sort(vs)
    out = neuron_output(ideal(V_ref=V_ref, gain=gain), vs, SubthresholdParams())
    assert np.all(np.diff(out) >= 0)


def test_neuron_output_examples():
    p = SubthresholdParams()
    assert neuron_output(ideal(V_ref=0.5), 0.5, p) == pytest.approx(4.5e-9, rel=1e-15)
    assert neuron_output(ideal(gain=1.1), 5.0, p) == pytest.approx(1.1 * 9e-9, rel=1e-12)


def test_systematic_vref_taps():
    assert systematic_vref(0.5, 0.5, 3) == [0.5, 0.5, 0.5]
    assert systematic_vref(0.0, 1.0, 2) == [0.25, 0.75]
    assert systematic_vref(0.0, 1.0, 4) == [0.125, 0.375, 0.625, 0.875]
    with pytest.raises(DomainError):
        systematic_vref(0.0, 1.0, 0)


def test_zero_mismatch_population_is_nominal():
    p = SubthresholdParams()
    mm = MismatchConfig(0.0, 0.0, 0.0, seed=3)
    pop = sample_population(4, p, mm, systematic_vref(0.2, 0.8, 4))
    assert [n.direction for n in pop] == [1, 1, -1, -1]
    assert all(n.I_b == p.I_b_nominal and n.mirror_gain == 1.0 for n in pop)
    assert [n.V_ref for n in pop] == systematic_vref(0.2, 0.8, 4)


def test_split_halves_gives_ceil_half_positive():
    pop = sample_population(5, SubthresholdParams(), MismatchConfig(), [0.5] * 5)
    assert [n.direction for n in pop] == [1, 1, 1, -1, -1]


def test_population_deterministic_and_prefix_stable():
    p, mm = SubthresholdParams(), MismatchConfig(seed=77)
    a = sample_population(10, p, mm, [0.5] * 10, "random")
    b = sample_population(10, p, mm, [0.5] * 10, "random")
    assert a == b
    c = sample_population(20, p, mm, [0.5] * 20, "random")
    assert [n.V_ref for n in c[:10]] == [n.V_ref for n in a]


def test_vref_spread_matches_sigma():
    mm = MismatchConfig(sigma_vref=0.010, seed=5)
    pop = sample_population(456, SubthresholdParams(), mm, [0.5] * 456)
    offsets = np.array([n.V_ref for n in pop]) - 0.5
    assert abs(np.std(offsets, ddof=1) - 0.010) < 0.2 * 0.010


def test_clamps_keep_neurons_alive():
    mm = MismatchConfig(sigma_ib_rel=5.0, sigma_mirror_rel=5.0, seed=1)
    pop = sample_population(200, SubthresholdParams(), mm, [0.5] * 200)
    assert min(n.I_b for n in pop) >= 0.01 * 9e-9
    assert min(n.mirror_gain for n in pop) >= 0.01


def test_bad_population_arguments():
    p, mm = SubthresholdParams(), MismatchConfig()
    with pytest.raises(DomainError):
        sample_population(3, p, mm, [0.5, 0.5])
    with pytest.raises(DomainError):
        sample_population(2, p, mm, [0.5, 0.5], "sideways")


def test_characterize_offset_at_vref():
    p = SubthresholdParams()
    grid = np.linspace(0.3, 0.7, 81)
    c = characterize(ideal(V_ref=0.5), grid, p)
    assert c.offset_in_range
    assert abs(c.offset_v - 0.5) < 1e-3
    assert c.amplitude == pytest.approx(np.max(neuron_output(ideal(), grid, p)))


def test_characterize_tracks_vref_shift():
    p = SubthresholdParams()
    grid = np.linspace(0.0, 1.0, 201)
    base = characterize(ideal(V_ref=0.45), grid, p).offset_v
    shifted = characterize(ideal(V_ref=0.50), grid, p).offset_v
    assert shifted - base == pytest.approx(0.05, abs=1e-6)


def test_characterize_out_of_range_flag():
    p = SubthresholdParams()
    # fully saturated across the grid: never drops to half its maximum
    c = characterize(ideal(V_ref=-1.0), np.linspace(0.5, 1.0, 10), p)
    assert not c.offset_in_range
    assert c.offset_v == 0.5
    c = characterize(ideal(V_ref=0.5), np.linspace(0.0, 1.0, 10), p)
    assert c.offset_in_range


def test_characterize_grid_validation():
    with pytest.raises(DomainError):
        characterize(ideal(), np.linspace(0, 1, 7), SubthresholdParams())
    with pytest.raises(DomainError):
        characterize(ideal(), np.linspace(1, 0, 10), SubthresholdParams())


@settings(max_examples=50, deadline=None)
@given(st.floats(0.2, 0.8), st.floats(0.5, 1.5), st.floats(1e-9, 2e-8))
def test_curve_invariants(V_ref, gain, I_b):
    c = characterize(ideal(V_ref=V_ref, gain=gain, I_b=I_b), np.linspace(0, 1, 41),
                     SubthresholdParams())
    assert np.all(np.diff(c.v_in) > 0)
    assert np.all(c.i_out >= 0)
    assert np.all(c.i_out <= c.amplitude * (1 + 1e-9))
    assert c.v_in[0] <= c.offset_v <= c.v_in[-1]


def test_population_stats_hand_values():
    v = np.linspace(0, 1, 8)
    a = TuningCurve(0, v, v * 8e-9, 8e-9, 0.5)
    b = TuningCurve(1, v, v * 10e-9, 10e-9, 0.5)
    s = population_stats([a, b])
    assert s["amplitude"]["mean"] == pytest.approx(9e-9, rel=1e-15)
    assert s["amplitude"]["std"] == pytest.approx(math.sqrt(2) * 1e-9, rel=1e-12)
    assert s["offset_v"]["std"] == 0.0
    counts, edges = s["amplitude"]["histogram"]
    assert counts.sum() == 2 and len(edges) == 21


def test_population_stats_needs_two():
    v = np.linspace(0, 1, 8)
    with pytest.raises(DomainError):
        population_stats([TuningCurve(0, v, v, 1.0, 0.5)])


def test_zero_mismatch_curves_identical():
    p = SubthresholdParams()
    pop = sample_population(6, p, MismatchConfig(0, 0, 0), systematic_vref(0.5, 0.5, 6))
    grid = np.linspace(0, 1, 50)
    curves = [characterize(n, grid, p) for n in pop]
    assert all(np.array_equal(c.i_out, curves[0].i_out) for c in curves)


def test_default_population_amplitudes_near_9nA():
    p = SubthresholdParams()
    pop = sample_population(456, p, MismatchConfig(), systematic_vref(0.5, 0.5, 456))
    curves = [characterize(n, np.linspace(0, 1, 101), p) for n in pop]
    amp = np.median([c.amplitude for c in curves])
    assert 8e-9 <= amp <= 10e-9
