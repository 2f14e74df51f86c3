from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phycnn.dynamics import (CASE1_OUTPUTS, CASE2_OUTPUTS, GroundMotion, SystemParams,
                             generate_dataset, infer_restoring, restoring_force, simulate_sdof,
                             synth_ground_motion)
from phycnn.errors import DomainError, EmptyDatasetError, ShapeError, SimulationError

DUFFING = SystemParams(m=1.0, c=1.0, k1=20.0, k2=200.0, gamma=1.0)


def free_vibration_exact(t, m, c, k, x0):
    wn = np.sqrt(k / m)
    zeta = c / (2 * np.sqrt(k * m))
    wd = wn * np.sqrt(1 - zeta**2)
    return np.exp(-zeta * wn * t) * (x0 * np.cos(wd * t) + zeta * wn * x0 / wd * np.sin(wd * t))


def test_restoring_force_zero_state():
    assert restoring_force(DUFFING, 0.0, 0.0) == 0.0


def test_restoring_force_reference_values():
    assert restoring_force(DUFFING, 0.1, 0.0) == pytest.approx(2.2, rel=1e-14)


def test_restoring_force_matches_exact_rational_evaluation():
    p = SystemParams(m=2.0, c=1.0, k1=20.0, k2=200.0)
    x, v = Fraction(1, 10), Fraction(1, 2)
    exact = (1 * v + 20 * x + 200 * x**3) / 2
    assert restoring_force(p, 0.1, 0.5) == pytest.approx(float(exact), rel=1e-15)


def test_restoring_force_rejects_nan():
    with pytest.raises(DomainError):
        restoring_force(DUFFING, np.nan, 0.0)


@pytest.mark.parametrize("kw", [dict(m=0.0), dict(c=-1.0), dict(k1=0.0), dict(k2=np.inf)])
def test_system_params_invariants(kw):
    with pytest.raises(DomainError):
        SystemParams(**kw)


def test_zero_excitation_gives_zero_trajectory():
    gm = GroundMotion(np.zeros(101), 0.05)
    tr = simulate_sdof(DUFFING, gm)
    for f in (tr.x, tr.v, tr.a, tr.g):
        assert np.all(f == 0.0)


def test_linear_free_vibration_matches_closed_form():
    p = SystemParams(m=1.0, c=1.0, k1=20.0, k2=0.0)
    dt = 0.005
    gm = GroundMotion(np.zeros(2001), dt)
    tr = simulate_sdof(p, gm, init=(0.1, 0.0))
    exact = free_vibration_exact(gm.time, 1.0, 1.0, 20.0, 0.1)
    rel = np.linalg.norm(tr.x - exact) / np.linalg.norm(exact)
    assert rel < 1e-4


def test_rk4_global_error_is_fourth_order():
    p = SystemParams(m=1.0, c=1.0, k1=20.0, k2=0.0)
    T, dt = 5.0, 0.05

    def run(h):
        n = int(round(T / h)) + 1
        return simulate_sdof(p, GroundMotion(np.zeros(n), h), init=(0.1, 0.0)).x

    ref = run(dt / 8)[::8]
    e1 = np.max(np.abs(run(dt) - ref))
    e2 = np.max(np.abs(run(dt / 2)[::2] - ref))
    assert 12 <= e1 / e2 <= 20


def test_reference_configuration_length():
    gm = synth_ground_motion(1, duration=50.0, dt=0.05, amplitude=2.0)
    assert simulate_sdof(DUFFING, gm).n == 1001


def test_acceleration_closes_equation_of_motion():
    gm = synth_ground_motion(3, amplitude=3.0)
    tr = simulate_sdof(DUFFING, gm)
    assert np.max(np.abs(tr.a + tr.g + DUFFING.gamma * gm.accel)) < 1e-8


def test_energy_decays_after_excitation_stops():
    gm = synth_ground_motion(5, duration=20.0, dt=0.05, amplitude=3.0)
    acc = np.concatenate([gm.accel, np.zeros(400)])
    tr = simulate_sdof(DUFFING, GroundMotion(acc, 0.05))
    tail = slice(gm.n - 1, None)
    x, v = tr.x[tail], tr.v[tail]
    energy = 0.5 * v**2 + 0.5 * DUFFING.k1 * x**2 + 0.25 * DUFFING.k2 * x**4
    assert np.all(np.diff(energy) <= 1e-6)


def test_blowup_reports_step():
    soft = SystemParams(m=1.0, c=0.0, k1=1.0, k2=0.0)
    gm = GroundMotion(np.full(200, 1e5), 0.05)
    with pytest.raises(SimulationError) as info:
        simulate_sdof(soft, gm, blowup=10.0)
    assert info.value.step >= 1


def test_infer_restoring_cases():
    gm = GroundMotion(np.array([1.0, -2.0, 0.5]), 0.1)
    assert np.all(infer_restoring(-gm.accel, gm, 1.0) == 0.0)
    s = np.array([0.3, 0.1, -0.7])
    assert np.array_equal(infer_restoring(s, gm, 0.0), -s)
    with pytest.raises(ShapeError):
        infer_restoring(s[:2], gm, 1.0)


def test_infer_restoring_recovers_simulated_force():
    gm = synth_ground_motion(8, amplitude=2.5)
    tr = simulate_sdof(DUFFING, gm)
    assert np.max(np.abs(infer_restoring(tr.a, gm, DUFFING.gamma) - tr.g)) < 1e-10


def test_synth_is_deterministic_and_sized():
    a = synth_ground_motion(1, 50.0, 0.05)
    b = synth_ground_motion(1, 50.0, 0.05)
    assert a.n == 1001
    assert a.accel.tobytes() == b.accel.tobytes()
    assert abs(a.accel.mean()) < 1e-12
    assert np.max(np.abs(a.accel)) == pytest.approx(1.0)


def test_synth_spectrum_is_band_limited():
    lo, hi, dt = 0.5, 4.0, 0.05
    gm = synth_ground_motion(11, 50.0, dt, (lo, hi), amplitude=1.0)
    # independent plain DFT via explicit complex exponentials
    n = gm.n
    freqs = np.arange(n // 2 + 1) / (n * dt)
    k = np.arange(n)
    power = np.array([abs(np.sum(gm.accel * np.exp(-2j * np.pi * f * dt * k))) ** 2 for f in freqs])
    inside = (freqs >= lo) & (freqs <= hi)
    assert 10 * np.log10(power[inside].mean() / power[~inside].mean()) >= 20


@pytest.mark.parametrize("band", [(2.0, 1.0), (-0.1, 1.0), (0.1, 20.0)])
def test_synth_rejects_bad_band(band):
    with pytest.raises(DomainError):
        synth_ground_motion(0, 10.0, 0.05, band)


def test_generate_dataset_shapes():
    motions = [synth_ground_motion(i, amplitude=2.0) for i in range(10)]
    ds = generate_dataset(DUFFING, motions, CASE1_OUTPUTS)
    assert ds.inputs.shape == (10, 1001, 1)
    assert ds.outputs.shape == (10, 1001, 3)


def test_generate_dataset_case2_shape():
    motions = [synth_ground_motion(i, amplitude=2.0) for i in range(50)]
    ds = generate_dataset(DUFFING, motions, CASE2_OUTPUTS)
    assert ds.outputs.shape == (50, 1001, 1)


def test_generate_dataset_errors():
    with pytest.raises(EmptyDatasetError):
        generate_dataset(DUFFING, [])
    motions = [synth_ground_motion(0, 10.0, 0.05), synth_ground_motion(1, 20.0, 0.05)]
    with pytest.raises(ShapeError):
        generate_dataset(DUFFING, motions)


@settings(max_examples=25, deadline=None)
@given(st.floats(-0.5, 0.5), st.floats(-2, 2), st.floats(0.1, 5.0))
def test_residual_closes_for_any_initial_state(x0, v0, amp):
    gm = synth_ground_motion(2, 10.0, 0.05, amplitude=amp)
    tr = simulate_sdof(DUFFING, gm, init=(x0, v0))
    assert np.max(np.abs(tr.a + tr.g + gm.accel)) < 1e-8
