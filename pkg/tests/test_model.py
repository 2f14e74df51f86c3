import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phycnn import model as M
from phycnn import nn
from phycnn.dynamics import (CASE2_OUTPUTS, GroundMotion, SystemParams, generate_dataset,
                             simulate_sdof, synth_ground_motion)
from phycnn.errors import ConfigError, MetricError, ShapeError, TrainingError

SYS = SystemParams()
TINY = M.ArchitectureSpec(conv_layers=((4, 5), (4, 5)), fc_hidden=(6,), dropout=0.0)


@pytest.fixture(scope="module")
def tiny_data():
    gm = synth_ground_motion(0, duration=5.0, dt=0.05, corner_freqs=(0.2, 4.0), amplitude=3.0)
    return generate_dataset(SYS, [gm])


def test_full_size_spec_last_layer_matches_outputs():
    spec = M.ArchitectureSpec.full_size()
    p = M.build_network(spec, 1, 3)
    assert p.arrays["fc2.W"].shape == (32, 3)
    assert len(spec.conv_layers) == 5 and spec.conv_layers[0] == (64, 50)
    with pytest.raises(ConfigError):
        M.build_network(spec, 1, 1)


def test_parameter_count_closed_form():
    # full-size spec by hand: conv 50*1*64+64, then 4 x (50*64*64+64), FC 64*64+64, 64*32+32, 32*3+3
    hand = (50 * 64 + 64) + 4 * (50 * 64 * 64 + 64) + (64 * 64 + 64) + (64 * 32 + 32) + (32 * 3 + 3)
    spec = M.ArchitectureSpec.full_size()
    assert M.parameter_count(spec) == hand
    assert M.build_network(spec).count == hand


def test_epochs_zero_leaves_params(tiny_data):
    p = M.build_network(TINY, seed=3)
    res = M.train(p, tiny_data, M.TrainingConfig(epochs=0))
    assert res.best_epoch == 0 and res.history == []
    for k in p.arrays:
        assert np.array_equal(p.arrays[k], res.params.arrays[k])


def test_full_state_loss_zero_case():
    z = np.zeros((2, 10, 3))
    rep = M.full_state_loss(z, z, np.zeros((2, 10)), 1.0, 0.05)
    assert rep.total == 0.0 and rep.data == 0.0 and rep.physics == 0.0


def _exact_losses(dt):
    gm = synth_ground_motion(4, 20.0, dt, (0.1, 2.0), amplitude=3.0)
    tr = simulate_sdof(SYS, gm)
    z = np.stack([tr.x, tr.v, tr.g], axis=-1)[None]
    full = M.full_state_loss(z, z, gm.accel[None], 1.0, dt)
    acc = M.accel_only_loss(tr.x[None, :, None], tr.a[None, :, None], dt)
    return full, acc, tr


def test_losses_on_exact_trajectory_are_truncation_error():
    full, acc, tr = _exact_losses(0.05)
    assert full.data == 0.0
    assert acc.data == acc.total and acc.physics == 0.0
    assert full.physics < 1e-2 * np.mean(tr.a**2)
    # squared O(dt^2) truncation error: halving dt shrinks each loss by about 16
    full2, acc2, _ = _exact_losses(0.025)
    assert 8 < full.physics / full2.physics < 32
    assert 8 < acc.total / acc2.total < 32


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.floats(0, 3), st.floats(0, 3))
def test_loss_decomposition_exact(seed, ld, lp):
    rng = np.random.default_rng(seed)
    pred, meas = rng.standard_normal((2, 2, 12, 3))
    ag = rng.standard_normal((2, 12))
    rep = M.full_state_loss(pred, meas, ag, 1.0, 0.1, ld, lp)
    assert rep.total == ld * rep.data + lp * rep.physics
    assert rep.data >= 0 and rep.physics >= 0


def test_lambda_p_zero_is_plain_data_loss():
    rng = np.random.default_rng(1)
    pred, meas = rng.standard_normal((2, 3, 20, 3))
    rep = M.full_state_loss(pred, meas, rng.standard_normal((3, 20)), 1.0, 0.05, 1.0, 0.0)
    plain = sum(nn.mse(pred[..., j], meas[..., j]) for j in range(3))
    assert rep.total == pytest.approx(plain, rel=1e-14)


def test_full_state_loss_shape_errors():
    with pytest.raises(ShapeError):
        M.full_state_loss(np.zeros((1, 5, 3)), np.zeros((1, 5, 2)), np.zeros((1, 5)), 1.0, 0.1)
    with pytest.raises(ShapeError):
        M.full_state_loss(np.zeros((1, 5, 3)), np.zeros((1, 5, 3)), np.zeros((1, 4)), 1.0, 0.1)


def test_loss_gradients_match_finite_differences():
    rng = np.random.default_rng(2)
    pred, meas = rng.standard_normal((2, 2, 9, 3))
    ag = rng.standard_normal((2, 9))
    _, g = M._full_state(pred, meas, ag, 1.3, 0.1, 0.7, 1.1, want_grad=True)
    h = 1e-6
    fd = np.zeros_like(pred)
    for idx in np.ndindex(pred.shape):
        p1, p2 = pred.copy(), pred.copy()
        p1[idx] += h
        p2[idx] -= h
        fd[idx] = (M._full_state(p1, meas, ag, 1.3, 0.1, 0.7, 1.1)[0].total
                   - M._full_state(p2, meas, ag, 1.3, 0.1, 0.7, 1.1)[0].total) / (2 * h)
    assert np.max(np.abs(g - fd)) < 1e-6 * max(1.0, np.max(np.abs(fd)))

    x, a = rng.standard_normal((2, 2, 9, 1))
    _, g = M._accel_only(x, a, 0.1, want_grad=True)
    fd = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        p1, p2 = x.copy(), x.copy()
        p1[idx] += h
        p2[idx] -= h
        fd[idx] = (M.accel_only_loss(p1, a, 0.1).total - M.accel_only_loss(p2, a, 0.1).total) / (2 * h)
    assert np.max(np.abs(g - fd)) < 1e-6 * max(1.0, np.max(np.abs(fd)))


def test_accel_only_loss_cases():
    z = np.zeros((1, 10, 1))
    rep = M.accel_only_loss(z, z, 0.05)
    assert rep.total == 0.0 and rep.physics == 0.0
    with pytest.raises(ShapeError):
        M.accel_only_loss(np.zeros((1, 4, 1)), np.zeros((1, 4, 1)), 0.05)


def test_network_gradient_check():
    spec = M.ArchitectureSpec(conv_layers=((3, 3),), fc_hidden=(4,), dropout=0.0)
    p = M.build_network(spec, 1, 3, seed=1)
    assert p.count <= 200
    rng = np.random.default_rng(0)
    x = rng.standard_normal((2, 7, 1))
    up = rng.standard_normal((2, 7, 3))
    y, cache = M.forward(p, x)
    grads = M.backward(p, up, cache)
    h = 1e-6
    for name, arr in p.arrays.items():
        for idx in np.ndindex(arr.shape):
            old = arr[idx]
            arr[idx] = old + h
            fp = np.sum(M.forward(p, x)[0] * up)
            arr[idx] = old - h
            fm = np.sum(M.forward(p, x)[0] * up)
            arr[idx] = old
            fd = (fp - fm) / (2 * h)
            an = grads[name][idx]
            assert abs(an - fd) <= 1e-5 * max(abs(an), abs(fd), 1e-6), name


def test_time_reversal_makes_outputs_causal():
    p = M.build_network(TINY, seed=0)
    x = np.random.default_rng(0).standard_normal((1, 40, 1))
    x2 = x.copy()
    x2[0, 30:, 0] += 1.0
    y1, y2 = M.predict(p, x), M.predict(p, x2)
    assert np.array_equal(y1[:, :30], y2[:, :30])


def test_tiny_training_reduces_loss(tiny_data):
    p = M.build_network(TINY, seed=0)
    res = M.train(p, tiny_data, M.TrainingConfig(epochs=200, lr=1e-2, seed=0))
    assert len(res.history) == 200
    assert res.history[-1].train.total < 0.1 * res.history[0].train.total


def test_training_is_deterministic(tiny_data):
    def run():
        p = M.build_network(M.ArchitectureSpec(conv_layers=((4, 5),), fc_hidden=(6,), dropout=0.2), seed=0)
        return M.train(p, tiny_data, M.TrainingConfig(epochs=15, seed=4), validation=tiny_data)

    a, b = run(), run()
    assert [h.train.total for h in a.history] == [h.train.total for h in b.history]
    assert a.params.to_bytes() == b.params.to_bytes()


def test_training_selects_lowest_validation(tiny_data):
    p = M.build_network(TINY, seed=0)
    res = M.train(p, tiny_data, M.TrainingConfig(epochs=30, lr=1e-2))
    vals = [h.validation for h in res.history]
    assert res.best_validation == min(vals)
    assert res.history[res.best_epoch - 1].validation == res.best_validation


def test_training_non_finite_raises(tiny_data):
    p = M.build_network(TINY, seed=0)
    p.arrays["fc1.b"][:] = np.nan
    with pytest.raises(TrainingError) as info:
        M.train(p, tiny_data, M.TrainingConfig(epochs=3))
    assert info.value.epoch == 1


def test_case2_training_runs():
    motions = [synth_ground_motion(i, duration=5.0, amplitude=3.0) for i in range(2)]
    ds = generate_dataset(SYS, motions, CASE2_OUTPUTS)
    spec = M.ArchitectureSpec(conv_layers=((4, 5),), fc_hidden=(4,), dropout=0.0,
                              output_mode="displacement-only")
    res = M.train(M.build_network(spec), ds, M.TrainingConfig(epochs=5))
    assert all(h.train.physics == 0.0 for h in res.history)
    assert M.predict(res.params, motions[0]).shape == (1, 101, 1)


def test_predict_deterministic_and_length_generic(tiny_data):
    p = M.build_network(TINY, seed=0)
    res = M.train(p, tiny_data, M.TrainingConfig(epochs=5))
    gm = synth_ground_motion(9, duration=25.0, amplitude=2.0)
    y1, y2 = M.predict(res.params, gm), M.predict(res.params, gm)
    assert y1.shape == (1, 501, 3)
    assert y1.tobytes() == y2.tobytes()
    # retraced forward pass with manual scaling
    in_s, out_s = np.array(res.params.meta["input_scale"]), np.array(res.params.meta["output_scale"])
    y3, _ = M.forward(res.params, gm.accel[None, :, None] / in_s)
    assert np.array_equal(y1, y3 * out_s)


def test_predict_zero_input_zero_bias():
    p = M.build_network(TINY, seed=0)
    assert np.all(M.predict(p, GroundMotion(np.zeros(50), 0.05)) == 0)
    with pytest.raises(ConfigError):
        M.predict(p, np.zeros((1, 50, 2)))


def test_correlation_cases():
    rng = np.random.default_rng(3)
    a = rng.standard_normal(200)
    assert M.correlation(a, a) == 1.0
    assert M.correlation(-a, a) == -1.0
    b = rng.standard_normal(200)
    n = len(a)
    num = n * sum(a * b) - sum(a) * sum(b)
    den = np.sqrt(n * sum(a * a) - sum(a) ** 2) * np.sqrt(n * sum(b * b) - sum(b) ** 2)
    assert abs(M.correlation(a, b) - num / den) < 1e-12
    with pytest.raises(MetricError):
        M.correlation(np.ones(5), a[:5])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31))
def test_correlation_bounded(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.standard_normal((2, 20))
    assert -1.0 <= M.correlation(a, b) <= 1.0


def test_error_pdf_cases():
    t = np.sin(np.linspace(0, 6, 300))
    pdf = M.error_pdf(t, t)
    assert pdf.within == 1.0
    assert pdf.mass[pdf.centers.size // 2] == 1.0
    pdf = M.error_pdf(np.ones(10), np.zeros(10))
    assert pdf.mass[-1] == 1.0 and pdf.centers[-1] == pytest.approx(1.0)
    assert pdf.mass.sum() == pytest.approx(1.0)
    with pytest.raises(MetricError):
        M.error_pdf(np.zeros(5), np.zeros(5))


def test_error_pdf_gaussian_monte_carlo():
    rng = np.random.default_rng(0)
    t = np.sin(np.linspace(0, 60, 100_000))
    pred = t + rng.normal(0, 0.02 * np.max(np.abs(t)), t.size)
    assert abs(M.error_pdf(t, pred).within - 0.987) <= 0.01
