import numpy as np
import pytest

from innkf import liegroup as lg
from innkf.errors import CorruptRecord, EmptyDataset, SchemaVersionMismatch, ShapeMismatch
from innkf.seggn.compensator import (
    StreamingCompensator,
    compensate,
    identity_model,
    run_compensated,
)
from innkf.seggn.features import N_FEATURES, error_labels, feature_rows, windows_at
from innkf.seggn.losses import (
    LossWeights,
    rotation_loss,
    total_loss,
    total_loss_grad,
    translation_loss,
)
from innkf.seggn.model import PRESETS, SeggnModel, backward
from innkf.seggn.serialize import model_from_bytes, model_to_bytes
from innkf.seggn.train import Adam, TrainConfig, TrainingSet, train
from innkf.inekf import run_filter

from helpers import gradient_check, randomise


def rot_z(a):
    return lg.exp_so3([0.0, 0.0, a])


def naive_tcn(model, windows):
    """Full-window padded convolutions, no trimming."""
    x = (windows - model.feat_mean) / model.feat_std
    p = model.params

    def conv(name, x, d):
        w = p[f"{name}.w"]
        lag = np.concatenate([np.zeros((x.shape[0], d, x.shape[2])), x[:, :-d]], axis=1)
        return x @ w[1].T + lag @ w[0].T + p[f"{name}.b"]

    for i, blk in enumerate(model.tcn.blocks):
        d = 2**i
        h = np.maximum(conv(f"block{i}.conv1", x, d), 0)
        h = np.maximum(conv(f"block{i}.conv2", h, d), 0)
        res = x @ p[f"block{i}.down.w"].T + p[f"block{i}.down.b"] if blk.down is not None else x
        x = np.maximum(h + res, 0)
    return x[:, -1] @ p["head.w"].T + p["head.b"]


# forward -------------------------------------------------------------------------------


def test_zero_model_gives_identity():
    m = SeggnModel.from_preset("tiny")
    for k in m.params:
        m.params[k][:] = 0.0
    coeffs, e_hat = m.forward(np.ones((3, 6, N_FEATURES)))
    assert np.array_equal(coeffs, np.zeros((3, 9)))
    assert np.array_equal(e_hat, np.broadcast_to(np.eye(5), (3, 5, 5)))


def test_head_bias_example():
    m = SeggnModel.from_preset("tiny")
    m.params["head.w"][:] = 0.0
    m.params["head.b"][:] = [0, 0, np.pi / 2, 0, 0, 0, 0, 0, 0]
    _, e_hat = m.forward(np.zeros((1, 6, N_FEATURES)))
    assert np.allclose(e_hat[0, :3, :3], lg.exp_so3([0, 0, np.pi / 2]), atol=1e-15)


def test_untrained_model_is_near_identity(rng):
    m = SeggnModel.from_preset("desk", seed=1)
    coeffs, _ = m.forward(rng.normal(size=(8, 50, N_FEATURES)))
    assert np.abs(coeffs).max() < 0.05


@pytest.mark.parametrize("preset", ["tiny", "desk", "full"])
def test_trimmed_forward_matches_full_window(rng, preset):
    m = randomise(SeggnModel.from_preset(preset, seed=2), rng, 0.2)
    w = rng.normal(size=(4, m.window, N_FEATURES))
    coeffs, _ = m.forward(w)
    assert np.allclose(coeffs, naive_tcn(m, w), atol=1e-10)


def test_outputs_are_group_elements(rng):
    for seed in range(5):
        m = randomise(SeggnModel.from_preset("tiny", seed=seed), rng, 1.0)
        _, e_hat = m.forward(rng.normal(size=(500, 6, N_FEATURES)) * 3)
        r = e_hat[:, :3, :3]
        ortho = np.linalg.norm(np.swapaxes(r, 1, 2) @ r - np.eye(3), axis=(1, 2))
        assert ortho.max() <= 1e-9
        assert np.abs(np.linalg.det(r) - 1).max() <= 1e-9
        assert np.all(e_hat[:, 3:] == np.eye(5)[3:])


def test_causality(rng):
    feats = rng.normal(size=(80, N_FEATURES))
    m = randomise(SeggnModel.from_preset("desk", seed=3), rng, 0.3)
    before = m.predict(windows_at(feats, np.arange(60)))
    feats[60:] += 5.0
    after = m.predict(windows_at(feats, np.arange(60)))
    assert np.array_equal(before, after)


def test_inference_is_deterministic(rng):
    m = SeggnModel.from_preset("desk", seed=3)
    w = rng.normal(size=(16, 50, N_FEATURES))
    assert np.array_equal(m.forward(w)[1], m.forward(w)[1])


def test_shape_mismatch():
    m = SeggnModel.from_preset("tiny")
    with pytest.raises(ShapeMismatch):
        m.forward(np.zeros((2, 7, N_FEATURES)))
    with pytest.raises(ShapeMismatch):
        backward(m, np.zeros((2, 6, N_FEATURES)), np.zeros((3, 5, 5)))


def test_presets():
    assert PRESETS["full"]["widths"] == (128, 128, 128, 256, 256)
    assert PRESETS["full"]["window"] == 50 and PRESETS["full"]["dropout"] == 0.5
    assert SeggnModel.from_preset("desk").tcn.receptive_field() <= 50


# losses --------------------------------------------------------------------------------


def test_rotation_loss_examples():
    r = rot_z(0.3)
    assert rotation_loss(r, r) == 0.0
    assert rotation_loss(np.eye(3), rot_z(np.pi), 0.0, 1.0) == pytest.approx(np.pi, abs=1e-12)
    assert rotation_loss(np.eye(3), rot_z(np.pi), 1.0, 0.0) == pytest.approx(4.0, abs=1e-12)


def test_translation_loss_examples(rng):
    v, p = rng.normal(size=3), rng.normal(size=3)
    assert translation_loss(v, p, v, p) == 0.0
    assert translation_loss(np.array([1.0, -1, 0]), np.zeros(3), np.zeros(3), np.array([0, 0, -2.0])) == 4.0
    v2, p2 = rng.normal(size=3), rng.normal(size=3)
    assert translation_loss(v, p, v2, p2) == translation_loss(v2, p2, v, p)


def test_total_loss_properties(rng):
    a = lg.exp_se23(rng.normal(size=(6, 9)))
    b = lg.exp_se23(rng.normal(size=(6, 9)))
    assert total_loss(a, a) == 0.0
    w = LossWeights(alpha=0.7, beta=0.2, c1=1.0, c2=0.0)
    rot = rotation_loss(a[:, :3, :3], b[:, :3, :3], 0.7, 0.2).mean()
    assert total_loss(a, b, w) == pytest.approx(rot, rel=1e-14)
    w1, w2 = LossWeights(1, 1, 0.5, 0.25), LossWeights(1, 1, 1.0, 0.5)
    assert total_loss(a, b, w2) == pytest.approx(2 * total_loss(a, b, w1), rel=1e-14)


def test_loss_gradient_along_the_group(rng):
    # directional derivative along a -> a exp(h xi) against <dL/da, a xi^>
    a = lg.exp_se23(rng.normal(size=(3, 9)))
    b = lg.exp_se23(rng.normal(size=(3, 9)))
    w = LossWeights(0.5, 1.5, 1.0, 2.0)
    _, g = total_loss_grad(a, b, w)
    h = 1e-6
    for _ in range(5):
        xi = rng.normal(size=(3, 9))
        num = (total_loss(a @ lg.exp_se23(h * xi), b, w) - total_loss(a @ lg.exp_se23(-h * xi), b, w)) / (2 * h)
        ana = np.sum(g * (a @ lg.hat(xi)))
        assert ana == pytest.approx(num, rel=1e-6, abs=1e-9)


def test_gradient_vanishes_at_zero_loss(rng):
    m = SeggnModel.from_preset("tiny", seed=4)
    w = rng.normal(size=(5, 6, N_FEATURES))
    _, e_hat = m.forward(w)
    loss, grads = backward(m, w, e_hat)
    assert loss == 0.0
    assert max(np.abs(g).max() for g in grads.values()) <= 1e-10


def test_gradients_match_finite_differences(rng):
    m = randomise(SeggnModel.from_preset("tiny", seed=5), rng)
    w = rng.normal(size=(4, 6, N_FEATURES))
    labels = lg.exp_se23(rng.normal(0, 0.5, (4, 9)))
    assert gradient_check(m, w, labels, LossWeights(1.0, 0.5, 1.0, 0.7)) <= 1e-4


def test_single_batch_overfit(rng):
    m = SeggnModel.from_preset("tiny", seed=6, dropout=0.0)
    w = rng.normal(size=(16, 6, N_FEATURES))
    labels = lg.exp_se23(rng.normal(0, 0.3, (16, 9)))
    opt = Adam(m.params, 5e-3)
    losses = []
    for _ in range(200):
        loss, g = backward(m, w, labels)
        opt.step(m.params, g)
        losses.append(loss)
    assert losses[-1] < 0.5 * losses[0]
    assert np.mean(losses[-10:]) < np.mean(losses[:10])


# training ------------------------------------------------------------------------------


def synthetic_set(rng, label_fn, n_seq=2, length=400):
    data = TrainingSet()
    for _ in range(n_seq):
        f = rng.normal(size=(length, N_FEATURES))
        data.add(f, label_fn(f))
    return data


def test_empty_dataset():
    with pytest.raises(EmptyDataset):
        train(TrainingSet(), TrainConfig(epochs=1))


def test_identity_labels_are_learned(rng):
    data = synthetic_set(rng, lambda f: np.broadcast_to(np.eye(5), (len(f), 5, 5)).copy())
    _, hist = train(data, TrainConfig(preset="tiny", epochs=3, lr=5e-4, batch=64), seed=0)
    assert hist.val_rot[-1] < 1e-3


def test_constant_drift_is_recovered(rng):
    xi = np.array([0.02, -0.01, 0.05, 0.1, 0.0, -0.05, 0.3, -0.2, 0.1])
    label = lg.exp_se23(xi)
    data = synthetic_set(rng, lambda f: np.broadcast_to(label, (len(f), 5, 5)).copy())
    model, _ = train(data, TrainConfig(preset="tiny", epochs=40, lr=5e-3, batch=64, dropout=0.0), seed=0)
    coeffs, _ = model.forward(windows_at(data.features[0], np.arange(50, 60), model.window))
    err = np.linalg.norm(coeffs - xi, axis=1).max()
    assert err < 0.05 * np.linalg.norm(xi)


def test_shuffled_labels_do_not_fit(rng):
    a = rng.normal(0, 0.03, (9, N_FEATURES))

    def labels(f):
        return lg.exp_se23(f @ a.T)

    real = synthetic_set(rng, labels)
    shuffled = TrainingSet()
    for f, lab in zip(real.features, real.labels):
        shuffled.add(f, lab[rng.permutation(len(lab))])
    cfg = TrainConfig(preset="desk", epochs=15, lr=5e-3, batch=64, dropout=0.0, val_fraction=0.25)
    _, h_real = train(real, cfg, seed=0)
    _, h_shuf = train(shuffled, cfg, seed=0)
    assert h_real.val_loss[-1] < 0.5 * h_shuf.val_loss[-1]


def test_training_is_deterministic(rng):
    data = synthetic_set(rng, lambda f: lg.exp_se23(0.1 * f[:, :9]))
    cfg = TrainConfig(preset="tiny", epochs=2, batch=32)
    m1, h1 = train(data, cfg, seed=3)
    m2, h2 = train(data, cfg, seed=3)
    assert model_to_bytes(m1) == model_to_bytes(m2)
    assert h1.val_loss == h2.val_loss


def test_loss_curve_csv(tmp_path, rng):
    data = synthetic_set(rng, lambda f: lg.exp_se23(0.1 * f[:, :9]))
    _, hist = train(data, TrainConfig(preset="tiny", epochs=2), seed=0)
    path = tmp_path / "curve.csv"
    hist.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "epoch,train_loss,val_loss,val_rot_loss" and len(lines) == 3


# compensation --------------------------------------------------------------------------


def test_compensate_examples(rng):
    x_plus = lg.exp_se23(rng.normal(size=9))
    x_true = lg.exp_se23(rng.normal(size=9))
    assert np.allclose(compensate(x_plus, np.eye(5)), x_plus, atol=0)
    assert np.allclose(compensate(x_plus, x_plus @ lg.inverse(x_true)), x_true, atol=1e-10)
    e = lg.exp_se23(rng.normal(size=9))
    assert np.allclose(compensate(x_plus, e), np.linalg.inv(e) @ x_plus, atol=1e-12)
    assert lg.is_group(compensate(x_plus, e))


def test_identity_model_leaves_filter_output(flat_zero_noise):
    truth, sensors, _ = flat_zero_noise
    out = run_compensated(sensors[:300], identity_model(), x0=truth.X[0])
    assert np.array_equal(out.X, out.raw.X)


def test_no_feedback_into_filter(flat_zero_noise, rng):
    truth, sensors, _ = flat_zero_noise
    m = randomise(SeggnModel.from_preset("desk", seed=1), rng, 0.05)
    raw = run_filter(sensors[:300], x0=truth.X[0])
    comp = run_compensated(sensors[:300], m, x0=truth.X[0])
    assert np.array_equal(comp.raw.X, raw.X) and np.array_equal(comp.raw.P, raw.P)
    assert not np.allclose(comp.X, raw.X)


def test_streaming_lags_one_tick_and_matches_batch(flat_zero_noise, rng):
    truth, sensors, _ = flat_zero_noise
    recs = sensors[:120]
    m = randomise(SeggnModel.from_preset("desk", seed=1), rng, 0.05)
    stream = StreamingCompensator(m, x0=truth.X[0])
    outputs = []
    for i, rec in enumerate(recs):
        step, out = stream.feed(rec)
        if i == 0:
            assert out is None
        else:
            assert out[0] == recs[i - 1].t
            outputs.append(out[1])
    outputs.append(stream.flush()[1])
    batch = run_compensated(recs, m, x0=truth.X[0])
    assert np.allclose(np.stack(outputs), batch.X, atol=1e-12)


def test_feature_layout_and_labels(flat_zero_noise):
    truth, sensors, _ = flat_zero_noise
    x = truth.X[:10]
    f = feature_rows(sensors[:10], x)
    assert f.shape == (10, 67)
    assert np.array_equal(f[:, 54:58], truth.contact[:10].astype(float))
    assert np.allclose(f[:, 58:], lg.log_se23(x))
    assert np.allclose(error_labels(x, x), np.eye(5), atol=1e-15)
    w = windows_at(f, [0, 3], 50)
    assert np.array_equal(w[0], np.repeat(f[:1], 50, axis=0))
    assert np.array_equal(w[1, -4:], f[:4]) and np.array_equal(w[1, :46], np.repeat(f[:1], 46, axis=0))


# serialisation -------------------------------------------------------------------------


def test_model_file_roundtrip(rng):
    m = randomise(SeggnModel.from_preset("desk", seed=2), rng)
    m.set_normalization(rng.normal(size=N_FEATURES), rng.uniform(0.5, 2, N_FEATURES))
    buf = model_to_bytes(m, {"seed": 2})
    m2, meta = model_from_bytes(buf)
    assert meta == {"seed": 2}
    assert model_to_bytes(m2, {"seed": 2}) == buf
    w = rng.normal(size=(3, 50, N_FEATURES))
    assert np.array_equal(m.forward(w)[1], m2.forward(w)[1])


def test_model_file_errors(rng):
    buf = model_to_bytes(SeggnModel.from_preset("tiny"))
    with pytest.raises(CorruptRecord):
        model_from_bytes(b"NOTAMODL" + buf[8:])
    with pytest.raises(SchemaVersionMismatch):
        model_from_bytes(buf[:8] + (99).to_bytes(4, "little") + buf[12:])
    with pytest.raises(CorruptRecord):
        model_from_bytes(buf[:-16])
