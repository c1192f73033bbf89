import math

import numpy as np
import pytest

from conftest import make_frame
from newsload import kernels
from newsload.errors import CheckpointVersionMismatch, ShapeMismatch, TooFewWindows
from newsload.forecaster import (
    DECILES,
    TrainConfig,
    _forward,
    backward,
    init_params,
    load_model,
    loss_and_grad,
    lstm_step,
    mse_loss,
    pinball_loss,
    predict,
    predict_many,
    save_model,
    sort_quantiles,
    train,
    weekly_persistence,
)
from newsload.optim import AdamState, EarlyStopping, adam_update
from newsload.timeseries import make_windows, stack_windows

BACKENDS = ["numpy"] + (["cython"] if kernels.BACKEND == "cython" else [])


def _zero_params(F=1, H=1, O=1):
    return {"W": np.zeros((4 * H, F)), "U": np.zeros((4 * H, H)), "b": np.zeros(4 * H),
            "V": np.zeros((O, H)), "c": np.zeros(O)}


def _scalar_step(p, x, h, c):
    """Elementwise oracle with explicit loops over the hidden units."""
    H = len(h)
    W, U, b = p["W"], p["U"], p["b"]
    sig = lambda v: 1.0 / (1.0 + math.exp(-v))
    h_new, c_new = np.zeros(H), np.zeros(H)
    for j in range(H):
        pre = []
        for gate in range(4):
            r = gate * H + j
            s = b[r] + sum(W[r, k] * x[k] for k in range(len(x))) + sum(U[r, k] * h[k] for k in range(H))
            pre.append(s)
        i, f, o, g = sig(pre[0]), sig(pre[1]), sig(pre[2]), math.tanh(pre[3])
        c_new[j] = f * c[j] + i * g
        h_new[j] = o * math.tanh(c_new[j])
    return h_new, c_new


def test_zero_weights_step():
    p = _zero_params()
    h, c = lstm_step(p, np.zeros(1), np.zeros(1), np.zeros(1))
    assert h[0] == 0.0 and c[0] == 0.0
    h, c = lstm_step(p, np.zeros(1), np.zeros(1), np.ones(1))
    assert c[0] == 0.5
    assert h[0] == pytest.approx(0.5 * math.tanh(0.5), abs=1e-12)
    assert h[0] == pytest.approx(0.23106, abs=1e-5)


def test_step_matches_scalar_oracle(rng):
    p = init_params(3, 5, 2, seed=1)
    p["b"] = rng.standard_normal(20)
    x, h, c = rng.standard_normal(3), rng.uniform(-1, 1, 5), rng.standard_normal(5)
    got = lstm_step(p, x, h, c)
    want = _scalar_step(p, x, h, c)
    np.testing.assert_allclose(got[0], want[0], atol=1e-12)
    np.testing.assert_allclose(got[1], want[1], atol=1e-12)


@pytest.mark.parametrize("backend", BACKENDS)
def test_recurrence_matches_step_replay(rng, backend):
    p = init_params(4, 6, 3, seed=2)
    X = 3.0 * rng.standard_normal((2, 40, 4))
    out, (hs, cs, _, _) = _forward(p, X, backend)
    for n in range(2):
        h, c = np.zeros(6), np.zeros(6)
        for t in range(40):
            h, c = lstm_step(p, X[n, t], h, c)
            np.testing.assert_allclose(hs[n, t + 1], h, atol=1e-12)
            np.testing.assert_allclose(cs[n, t + 1], c, atol=1e-12)
        np.testing.assert_allclose(out[n], p["V"] @ h + p["c"], atol=1e-12)
    assert np.all(np.abs(hs) < 1.0)
    bound = np.arange(41)[None, :, None]
    assert np.all(np.abs(cs) <= bound + 1e-12)


def test_mse_and_pinball_examples():
    assert mse_loss([1.0, 2.0], [1.0, 4.0]) == 2.0
    assert pinball_loss(np.array([[8.0]]), np.array([10.0]), [0.9]) == pytest.approx(1.8)
    assert pinball_loss(np.array([[12.0]]), np.array([10.0]), [0.9]) == pytest.approx(0.2)


def test_median_pinball_is_half_mae(rng):
    pred, y = rng.standard_normal(48), rng.standard_normal(48)
    assert pinball_loss(pred[None], y, [0.5]) == pytest.approx(0.5 * np.mean(np.abs(pred - y)), rel=1e-12)


def _numeric_check(params, X, Y, mode, backend, quantiles=DECILES, n_probe=12, seed=0):
    """Analytic and central-difference derivatives at randomly probed coordinates."""
    _, grads = loss_and_grad(params, X, Y, mode, quantiles, backend)
    pick = np.random.default_rng(seed)
    eps = 1e-6
    numeric, analytic = [], []
    for name, arr in params.items():
        flat = arr.reshape(-1)
        for i in pick.choice(flat.size, size=min(n_probe, flat.size), replace=False):
            old = flat[i]
            flat[i] = old + eps
            lp = loss_and_grad(params, X, Y, mode, quantiles, backend)[0]
            flat[i] = old - eps
            lm = loss_and_grad(params, X, Y, mode, quantiles, backend)[0]
            flat[i] = old
            numeric.append((lp - lm) / (2 * eps))
            analytic.append(grads[name].reshape(-1)[i])
    return np.array(numeric), np.array(analytic)


@pytest.mark.parametrize("backend", BACKENDS)
def test_point_gradient_finite_differences(rng, backend):
    p = init_params(3, 5, 4, seed=3)
    X, Y = rng.standard_normal((2, 30, 3)), rng.standard_normal((2, 4))
    num, an = _numeric_check(p, X, Y, "point", backend)
    np.testing.assert_allclose(an, num, rtol=1e-5, atol=1e-8)


@pytest.mark.parametrize("backend", BACKENDS)
def test_quantile_gradient_finite_differences(rng, backend):
    q = (0.1, 0.5, 0.9)
    p = init_params(3, 5, 3 * 4, seed=4)
    X, Y = rng.standard_normal((2, 30, 3)), 5.0 + rng.standard_normal((2, 4))
    num, an = _numeric_check(p, X, Y, "quantile", backend, quantiles=q)
    np.testing.assert_allclose(an, num, rtol=1e-5, atol=1e-8)


def test_batch_gradient_is_mean_of_singles(rng):
    p = init_params(3, 4, 2, seed=5)
    X, Y = rng.standard_normal((2, 20, 3)), rng.standard_normal((2, 2))
    _, g2 = loss_and_grad(p, X, Y)
    _, ga = loss_and_grad(p, X[:1], Y[:1])
    _, gb = loss_and_grad(p, X[1:], Y[1:])
    for k in g2:
        np.testing.assert_allclose(g2[k], 0.5 * (ga[k] + gb[k]), atol=1e-13)


def test_zero_loss_has_zero_gradient(rng):
    p = init_params(2, 3, 2, seed=6)
    X = rng.standard_normal((1, 10, 2))
    out, _ = _forward(p, X)
    loss, g = loss_and_grad(p, X, out)
    assert loss == 0.0
    assert all(np.all(v == 0.0) for v in g.values())


@pytest.mark.skipif(kernels.BACKEND != "cython", reason="compiled kernels not built")
def test_backends_agree(rng):
    p = init_params(5, 24, 48, seed=7)
    X, Y = rng.standard_normal((4, 336, 5)), rng.standard_normal((4, 48))
    la, ga = loss_and_grad(p, X, Y, backend="numpy")
    lb, gb = loss_and_grad(p, X, Y, backend="cython")
    assert la == pytest.approx(lb, rel=1e-12)
    for k in ga:
        np.testing.assert_allclose(ga[k], gb[k], rtol=1e-9, atol=1e-12)


def test_adam_first_step_moves_by_lr():
    s = AdamState(lr=0.01)
    out = adam_update(s, {"a": np.array([1.0, -2.0, 3.0])}, {"a": np.array([0.5, -7.0, 1e-3])})
    np.testing.assert_allclose(out["a"], [0.99, -1.99, 2.99], atol=1e-7)
    same = adam_update(AdamState(), {"a": np.ones(3)}, {"a": np.zeros(3)})
    np.testing.assert_array_equal(same["a"], np.ones(3))


def test_adam_minimises_square():
    s = AdamState(lr=0.05)
    p = {"t": np.array([3.0])}
    for _ in range(2000):
        p = adam_update(s, p, {"t": 2 * p["t"]})
    assert abs(p["t"][0]) < 1e-2


def test_early_stopping():
    es = EarlyStopping(patience=2)
    assert es.update(1.0, 0) and not es.update(1.0, 1) and not es.stop
    es.update(2.0, 2)
    assert es.stop and es.best_epoch == 0


@pytest.fixture(scope="module")
def tiny():
    frame = make_frame(40, start="2016-03-01", annual_amplitude=0.2)
    return frame, make_windows(frame, frame.dates[32])


def test_training_is_deterministic(tiny):
    _, (train_w, _) = tiny
    cfg = TrainConfig(max_epochs=3, seed=11, lr=1e-3, hidden=6)
    a, b = train(train_w, cfg), train(train_w, cfg)
    for k in a.params:
        np.testing.assert_array_equal(a.params[k], b.params[k])
    assert a.log == b.log


def test_too_few_windows(tiny):
    with pytest.raises(TooFewWindows):
        train(tiny[1][0][:5])


def test_quantile_predictions_are_sorted_and_checkpoint_round_trips(tiny, tmp_path):
    frame, (train_w, test_w) = tiny
    m = train(train_w, TrainConfig(mode="quantile", max_epochs=2, hidden=5, lr=1e-2))
    X, _, A = stack_windows(test_w)
    point, q = predict_many(m, X)
    assert q.shape == (len(X), 9, 48)
    assert np.all(np.diff(q, axis=1) >= 0)
    np.testing.assert_array_equal(point, q[:, 4])
    save_model(m, tmp_path / "m.json")
    m2 = load_model(tmp_path / "m.json")
    np.testing.assert_array_equal(predict_many(m2, X)[1], q)
    r = predict(m2, X[0], A[0])
    assert r.levels == DECILES and r.quantiles.shape == (9, 48)
    (tmp_path / "junk.json").write_text("{not json")
    with pytest.raises(CheckpointVersionMismatch):
        load_model(tmp_path / "junk.json")
    with pytest.raises(ShapeMismatch):
        predict(m, X[0][:, :-1])
    g = backward(m, train_w[:2], loss="quantile")
    assert set(g) == {"W", "U", "b", "V", "c"}


def test_sort_quantiles_contract(rng):
    q = rng.standard_normal((3, 9, 48))
    s = sort_quantiles(q)
    assert np.all(np.diff(s, axis=1) >= 0)
    # sorting permutes values within a slot and never changes them
    np.testing.assert_array_equal(np.sort(q, axis=1), s)
    np.testing.assert_array_equal(sort_quantiles(s), s)


def test_point_model_residual_sd(tiny):
    m = train(tiny[1][0], TrainConfig(max_epochs=1, hidden=4))
    assert m.residual_sd.shape == (48,) and np.all(m.residual_sd > 0)


def test_weekly_persistence(tiny):
    frame, (_, test_w) = tiny
    A = np.array([w.anchor_day for w in test_w])
    naive = weekly_persistence(frame, A)
    d = frame.daily(frame.target_name)
    idx = (A - frame.dates[0]).astype(int)
    np.testing.assert_array_equal(naive, d[idx - 6])
