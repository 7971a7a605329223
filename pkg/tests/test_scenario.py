import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from oracles import position_from_measurement, range_pitch_azimuth, turn_ode

from swarmtrack.models import CoordinatedTurn, GeometryError
from swarmtrack.scenario import (
    NoiseSpec,
    ScenarioConfig,
    default_sensors,
    generate_truth,
    observe,
    propagate_state,
    sample_noise,
)

finite = st.floats(-50, 50, allow_nan=False)
rates = st.floats(-1.5, 1.5, allow_nan=False)


def test_zero_turn_is_constant_velocity():
    x = np.array([0, 0, 0, 1, 0, 0.5, 0.0])
    np.testing.assert_array_equal(propagate_state(x, 1.0), [1, 0, 0.5, 1, 0, 0.5, 0])


def test_quarter_turn_closed_form():
    x = np.array([0, 0, 0, 1, 0, 0, math.pi / 2])
    out = propagate_state(x, 1.0)
    np.testing.assert_allclose(out[:3], [2 / math.pi, 2 / math.pi, 0], atol=1e-14)
    np.testing.assert_allclose(out[3:6], [0, 1, 0], atol=1e-14)
    np.testing.assert_allclose(out, turn_ode(x, 1.0), atol=1e-10)


@given(st.tuples(finite, finite, finite, finite, finite, finite, rates), st.floats(0.01, 2.0))
def test_turn_matches_ode(x, dt):
    np.testing.assert_allclose(propagate_state(np.array(x), dt), turn_ode(x, dt), atol=1e-8, rtol=1e-9)


@given(st.tuples(finite, finite, finite, finite, finite, finite, rates))
def test_two_half_steps_equal_one_step(x):
    x = np.array(x)
    np.testing.assert_allclose(propagate_state(propagate_state(x, 0.5), 0.5), propagate_state(x, 1.0),
                               atol=1e-10, rtol=1e-12)


@given(st.tuples(finite, finite, finite, finite, finite, finite, rates), st.floats(0.01, 2.0))
def test_horizontal_speed_conserved(x, dt):
    x = np.array(x)
    out = propagate_state(x, dt)
    assert abs(np.hypot(*out[3:5]) - np.hypot(*x[3:5])) < 1e-10


@given(st.tuples(finite, finite, finite, finite, finite, finite), st.floats(0.01, 2.0))
def test_zero_turn_exactly_linear(x, dt):
    x = np.array(x + (0.0,))
    expect = x.copy()
    expect[:3] += dt * x[3:6]
    assert np.max(np.abs(propagate_state(x, dt) - expect)) < 1e-12


def test_small_turn_branch_is_continuous():
    f = CoordinatedTurn(0.1)
    x = np.array([1, 2, 3, 4, -2, 0.5, 0.0])
    lo, hi = x.copy(), x.copy()
    lo[6], hi[6] = 0.99e-7, 1.01e-7  # straddle |w dt| = 1e-8
    np.testing.assert_allclose(f(lo)[:6], f(hi)[:6], atol=1e-12)


def test_nonpositive_dt_rejected():
    with pytest.raises(ValueError):
        propagate_state(np.zeros(7), 0.0)


def test_observe_examples():
    np.testing.assert_allclose(observe([3, 4, 0, 0, 0, 0, 0], [0, 0, 0]), [5, 0, math.atan2(4, 3)])
    np.testing.assert_allclose(observe([0, 0, 5, 0, 0, 0, 0], [0, 0, 0]), [5, math.pi / 2, 0])
    z = observe([2, 2, 1 + math.sqrt(2), 0, 0, 0, 0], [1, 1, 1])
    np.testing.assert_allclose(z[:2], [2, math.pi / 4], atol=1e-15)
    np.testing.assert_allclose(z, range_pitch_azimuth([2, 2, 1 + math.sqrt(2)], [1, 1, 1]), atol=1e-15)


def test_observe_below_sensor_and_coincident():
    np.testing.assert_allclose(observe([1, 1, -4, 0, 0, 0, 0], [1, 1, 0]), [4, -math.pi / 2, 0])
    with pytest.raises(GeometryError):
        observe([1, 2, 3, 0, 0, 0, 0], [1, 2, 3])


@given(st.tuples(finite, finite, finite), st.tuples(finite, finite, finite))
def test_observe_inverse_geometry(target, sensor):
    if math.hypot(target[0] - sensor[0], target[1] - sensor[1]) < 1e-3:
        return
    z = observe(np.array(target + (0, 0, 0, 0)), np.array(sensor))
    np.testing.assert_allclose(z, range_pitch_azimuth(target, sensor), atol=1e-12)
    np.testing.assert_allclose(position_from_measurement(z, sensor), target, atol=1e-9)
    assert z[0] > 0 and -math.pi / 2 < z[1] <= math.pi / 2 and -math.pi < z[2] <= math.pi


def test_generate_truth_deterministic():
    cfg = ScenarioConfig(seed=42, T=30)
    a, b = generate_truth(cfg), generate_truth(cfg)
    np.testing.assert_array_equal(a.states, b.states)
    np.testing.assert_array_equal(a.measurements, b.measurements)
    assert a.states.shape == (31, 7) and a.measurements.shape == (30, 4, 3)
    c = generate_truth(ScenarioConfig(seed=43, T=30))
    assert not np.array_equal(a.measurements, c.measurements)


def test_noiseless_truth_equals_observe():
    noise = NoiseSpec(np.zeros((7, 7)), [np.zeros((3, 3))] * 4)
    cfg = ScenarioConfig(T=20, noise=noise)
    gt = generate_truth(cfg)
    for k in range(cfg.T):
        np.testing.assert_array_equal(gt.states[k + 1], propagate_state(gt.states[k], cfg.dt))
        for i, pose in enumerate(cfg.sensors):
            np.testing.assert_array_equal(gt.measurements[k, i], observe(gt.states[k + 1], pose))


def test_process_noise_sample_mean_and_cov():
    Q = ScenarioConfig().noise.Q
    draws = sample_noise(np.random.default_rng(5), Q, 100_000)
    sd = np.sqrt(np.diag(Q))
    assert np.all(np.abs(draws.mean(0)) < 3 * sd / math.sqrt(1e5))
    np.testing.assert_allclose(np.cov(draws.T)[np.diag_indices(7)], np.diag(Q), rtol=0.05)


def test_measurement_noise_cov():
    R = np.array([[0.09, 0.01, 0], [0.01, 1e-4, 0], [0, 0, 2e-4]])
    R[1, 0] = R[0, 1] = 0.002
    draws = sample_noise(np.random.default_rng(6), R, 100_000)
    scale = np.sqrt(np.outer(np.diag(R), np.diag(R)))
    assert np.all(np.abs(np.cov(draws.T) - R) <= 0.05 * scale)


@pytest.mark.parametrize("kw", [
    {"dt": 0.0},
    {"T": -1},
    {"T": 2.5},
    {"sensors": np.empty((0, 3))},
    {"initial_state": np.zeros(6)},
])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        ScenarioConfig(**kw)


def test_noise_spec_validation():
    with pytest.raises(ValueError):
        NoiseSpec(-np.eye(7), [np.eye(3)])
    with pytest.raises(ValueError):
        NoiseSpec(np.eye(7), [-np.eye(3)])
    with pytest.raises(ValueError):
        ScenarioConfig(initial_cov=np.zeros((7, 7)))
    Q = np.eye(7)
    Q[0, 1] = 1e-6
    with pytest.raises(ValueError):
        NoiseSpec(Q, [np.eye(3)])


def test_zero_horizon_allowed():
    gt = generate_truth(ScenarioConfig(T=0))
    assert gt.states.shape == (1, 7) and gt.measurements.shape == (0, 4, 3)


def test_default_sensors_square():
    s = default_sensors(4)
    assert s.shape == (4, 3) and np.all(s[:, 2] == 0)
    assert sorted(map(tuple, s[:, :2])) == [(0, 0), (0, 100), (100, 0), (100, 100)]
