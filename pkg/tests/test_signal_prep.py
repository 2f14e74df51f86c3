import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phycnn.dynamics import SystemParams, simulate_sdof, synth_ground_motion
from phycnn.errors import ConfigError, ShapeError
from phycnn.model import correlation
from phycnn.signal_prep import FilterSpec, accel_to_disp, butterworth_highpass


def test_filter_spec_invariants():
    with pytest.raises(ConfigError):
        FilterSpec(cutoff=10.0, sample_rate=20.0)
    with pytest.raises(ConfigError):
        FilterSpec(order=0)
    with pytest.raises(ConfigError):
        FilterSpec(cutoff=0.0)


def test_dc_rejection():
    spec = FilterSpec(2, 0.1, 20.0)
    y = butterworth_highpass(np.full(4000, 3.0), spec)
    assert np.max(np.abs(y[1000:-1000])) < 1e-8 * 3.0


def test_passband_amplitude():
    fs = 50.0
    t = np.arange(0, 60, 1 / fs)
    x = np.sin(2 * np.pi * 5.0 * t)
    y = butterworth_highpass(x, FilterSpec(2, 0.1, fs))
    steady = slice(len(t) // 4, -len(t) // 4)
    ratio = np.max(np.abs(y[steady])) / np.max(np.abs(x[steady]))
    assert abs(ratio - 1) < 0.01


def test_single_pass_gain_at_cutoff_is_minus_3db():
    fs, fc = 20.0, 0.5
    n = 20000
    t = np.arange(n) / fs
    x = np.sin(2 * np.pi * fc * t)
    y = butterworth_highpass(x, FilterSpec(2, fc, fs), zero_phase=False)
    # DFT amplitude at fc over the steady-state tail (integer number of periods)
    tail = slice(n // 2, n)
    k = np.exp(-2j * np.pi * fc * t[tail])
    gain = abs(np.sum(y[tail] * k)) / abs(np.sum(x[tail] * k))
    assert abs(20 * np.log10(gain) + 3.0103) < 0.1


def test_impulse_response_decays():
    for order, fc in [(1, 0.05), (2, 0.1), (4, 0.1), (2, 5.0)]:
        imp = np.zeros(2001)
        imp[0] = 1.0
        y = butterworth_highpass(imp, FilterSpec(order, fc, 20.0), zero_phase=False)
        assert np.max(np.abs(y[-100:])) < 1e-10, (order, fc)


def test_short_signal_rejected():
    with pytest.raises(ShapeError):
        butterworth_highpass(np.ones(6), FilterSpec(2))
    with pytest.raises(ShapeError):
        accel_to_disp(np.ones(7), 0.05)


def test_zero_accel_gives_zero_disp():
    assert np.all(accel_to_disp(np.zeros(500), 0.05) == 0)


def test_sinusoid_double_integration():
    dt, w, A = 0.01, 2 * np.pi * 1.0, 0.3
    t = np.arange(0, 60, dt)
    d = accel_to_disp(-w**2 * A * np.sin(w * t), dt)
    steady = slice(len(t) // 4, -len(t) // 4)
    assert abs(np.max(np.abs(d[steady])) / A - 1) < 0.02


def test_recovers_simulated_displacement():
    gm = synth_ground_motion(3, 50.0, 0.05, (0.2, 5.0), amplitude=3.0)
    tr = simulate_sdof(SystemParams(), gm)
    d = accel_to_disp(tr.a, gm.dt)
    assert correlation(d, tr.x) >= 0.95


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.floats(-5, 5), st.floats(-5, 5))
def test_chain_is_linear(seed, alpha, beta):
    rng = np.random.default_rng(seed)
    a, b = rng.standard_normal((2, 300))
    lhs = accel_to_disp(alpha * a + beta * b, 0.05)
    rhs = alpha * accel_to_disp(a, 0.05) + beta * accel_to_disp(b, 0.05)
    scale = max(1.0, np.max(np.abs(lhs)))
    assert np.max(np.abs(lhs - rhs)) <= 1e-10 * scale
