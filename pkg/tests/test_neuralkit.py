import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dlmac.errors import ChecksumError, DegenerateDataError, DimensionError, SchemaError
from dlmac.neuralkit import (Adam, TrainConfig, build_model, cross_entropy, dense_arch,
                             grad_check, load_model, lstm_arch, save_model, train)


def small_dense(seed=0, n_in=6, n_classes=4):
    return build_model(dense_arch(n_in, n_classes, hidden=(8, 5)), (n_in,), range(n_classes),
                       seed=seed)


def small_lstm(seed=0, steps=3, feat=5, n_classes=4):
    return build_model(lstm_arch((steps, feat), n_classes, lstm_hidden=6, dense_hidden=5),
                       (steps, feat), range(n_classes), seed=seed)


def zero_model(model):
    for p in model.params:
        for v in p.values():
            v[...] = 0.0
    return model


def test_probabilities_sum_to_one():
    rng = np.random.default_rng(0)
    for m, shape in ((small_dense(), (6,)), (small_lstm(), (3, 5))):
        p = m.forward(rng.normal(size=(20,) + shape) * 5)
        np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-9)
        assert np.all(p >= 0)


def test_zero_weights_give_uniform():
    m = zero_model(small_lstm(n_classes=10))
    np.testing.assert_allclose(m.forward(np.ones((2, 3, 5))), 0.1, atol=1e-15)


def test_logistic_closed_form():
    arch = [{"kind": "dense", "in": 1, "out": 2, "activation": "none"}, {"kind": "softmax"}]
    m = build_model(arch, (1,), (0, 1))
    w, b, x = 0.7, -0.2, 1.9
    m.params[0]["W"][...] = [[w, 0.0]]
    m.params[0]["b"][...] = [b, 0.0]
    sig = 1 / (1 + np.exp(-(w * x + b)))
    np.testing.assert_allclose(m.forward([[x]])[0], [sig, 1 - sig], atol=1e-15)


def test_shape_mismatch_raises():
    with pytest.raises(DimensionError):
        small_dense().forward(np.zeros((2, 7)))
    with pytest.raises(DimensionError):
        build_model(dense_arch(6, 4, hidden=(8,))[:1] + dense_arch(9, 4, hidden=())[:1]
                    + [{"kind": "softmax"}], (6,), range(4))


def test_dense_grad_check():
    rng = np.random.default_rng(1)
    for seed in range(5):
        m = small_dense(seed)
        assert grad_check(m, rng.normal(size=(4, 6)), rng.integers(0, 4, 4)) < 1e-6


def test_lstm_grad_check():
    rng = np.random.default_rng(2)
    for seed in range(5):
        m = small_lstm(seed)
        assert grad_check(m, rng.normal(size=(4, 3, 5)), rng.integers(0, 4, 4)) < 1e-5


def test_zero_net_output_bias_gradient():
    m = zero_model(small_dense())
    _, grads = m.loss_and_grads(np.zeros((1, 6)), [2])
    want = np.full(4, 0.25)
    want[2] -= 1.0
    np.testing.assert_allclose(grads[-1]["b"], want, atol=1e-15)
    assert grad_check(m, np.zeros(6), 2) < 1e-6


def test_grad_check_refuses_large_models():
    m = build_model(dense_arch(120, 10, hidden=(128,)), (120,), range(10))
    with pytest.raises(ValueError):
        grad_check(m, np.zeros(120), 0)


def separable(n=400, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, 2))
    w = np.array([1.5, -2.0])
    keep = np.abs(x @ w) > 0.3
    return x[keep], (x[keep] @ w > 0).astype(int)


def test_separable_set_is_learned():
    x, y = separable()
    m = build_model(dense_arch(2, 2, hidden=(8,)), (2,), (0, 1), seed=0)
    cfg = TrainConfig(max_epochs=50, learning_rate=1e-2, batch_size=16, class_weights=False)
    m, tlog = train(m, x, y, cfg)
    assert max(tlog.column("val_acc")) >= 0.98


def test_zero_learning_rate_changes_nothing():
    x, y = separable()
    m = build_model(dense_arch(2, 2, hidden=(8,)), (2,), (0, 1), seed=0)
    before = m.copy_params()
    m, tlog = train(m, x, y, TrainConfig(max_epochs=4, learning_rate=0.0))
    for p, q in zip(before, m.params):
        for k in p:
            np.testing.assert_array_equal(p[k], q[k])
    assert len(set(tlog.column("val_loss"))) == 1


def test_training_is_deterministic(tmp_path):
    x, y = separable()
    digests = []
    for k in range(2):
        m = build_model(dense_arch(2, 2, hidden=(8,)), (2,), (0, 1), seed=3)
        m, _ = train(m, x, y, TrainConfig(max_epochs=5, seed=9))
        digests.append(save_model(m, tmp_path / f"m{k}.dlm"))
    assert digests[0] == digests[1]
    assert (tmp_path / "m0.dlm").read_bytes() == (tmp_path / "m1.dlm").read_bytes()


def test_best_so_far_sequence_is_monotone():
    x, y = separable(seed=4)
    m = build_model(dense_arch(2, 2, hidden=(8,)), (2,), (0, 1), seed=0)
    m, tlog = train(m, x, y, TrainConfig(max_epochs=30, learning_rate=3e-2, early_stop_patience=3))
    best = tlog.column("best_val_loss")
    assert all(b <= a for a, b in zip(best, best[1:]))
    # the restored weights are those of the best epoch
    assert tlog.column("val_loss")[tlog.best_epoch] == min(tlog.column("val_loss"))
    assert tlog.column("train_loss")[tlog.best_epoch] <= tlog.column("train_loss")[0]


def test_early_stopping_triggers():
    x, y = separable()
    m = build_model(dense_arch(2, 2, hidden=(8,)), (2,), (0, 1), seed=0)
    _, tlog = train(m, x, y, TrainConfig(max_epochs=500, learning_rate=5e-2, early_stop_patience=2))
    assert tlog.stopped_early and len(tlog.epochs) < 501
    assert len(tlog.epochs) - 1 - tlog.best_epoch == 2


def test_single_class_is_degenerate():
    m = small_dense()
    with pytest.raises(DegenerateDataError):
        train(m, np.zeros((10, 6)), np.zeros(10, dtype=int))


def test_model_file_round_trip(tmp_path):
    m = small_lstm(seed=5)
    m.norm = (-95.0, -40.0)
    m.task = "jcara"
    save_model(m, tmp_path / "m.dlm")
    back = load_model(tmp_path / "m.dlm")
    x = np.random.default_rng(0).uniform(-95, -40, size=(7, 3, 5))
    assert np.array_equal(back.forward(x), m.forward(x))
    assert back.architecture() == m.architecture()


def test_truncated_file_fails_checksum(tmp_path):
    save_model(small_dense(), tmp_path / "m.dlm")
    data = (tmp_path / "m.dlm").read_bytes()
    (tmp_path / "t.dlm").write_bytes(data[:-40])
    with pytest.raises(ChecksumError):
        load_model(tmp_path / "t.dlm")
    flipped = bytearray(data)
    flipped[60] ^= 1
    (tmp_path / "f.dlm").write_bytes(bytes(flipped))
    with pytest.raises(ChecksumError):
        load_model(tmp_path / "f.dlm")


def test_wrong_task_is_schema_error(tmp_path):
    m = small_lstm()
    m.task = "jcara"
    save_model(m, tmp_path / "m.dlm")
    with pytest.raises(SchemaError):
        load_model(tmp_path / "m.dlm", expect_task="switch")
    with pytest.raises(SchemaError):
        load_model(tmp_path / "m.dlm", expect_input_shape=(15,))


@settings(max_examples=20, deadline=None)
@given(start=st.lists(st.floats(-10, 10), min_size=1, max_size=8), seed=st.integers(0, 1000))
def test_adam_reaches_quadratic_minimum(start, seed):
    target = np.random.default_rng(seed).uniform(-10, 10, size=len(start))
    p = [{"w": np.array(start, dtype=np.float64)}]
    opt = Adam(p, lr=0.05)
    for _ in range(5000):
        opt.step([{"w": 2 * (p[0]["w"] - target)}])
        if np.linalg.norm(p[0]["w"] - target) < 1e-3:
            break
    assert np.linalg.norm(p[0]["w"] - target) < 1e-3


@settings(max_examples=100, deadline=None)
@given(z=st.lists(st.floats(-50, 50), min_size=2, max_size=6), k=st.integers(0, 5))
def test_cross_entropy_is_nonnegative(z, k):
    z = np.array([z])
    t = min(k, z.shape[1] - 1)
    loss = cross_entropy(z, [t])[0]
    assert loss >= 0
    assert cross_entropy(np.array([[0.0, 0.0]]), [0])[0] > 0
    p = np.exp(z - z.max())
    p /= p.sum()
    if loss == 0:
        assert p[0, t] == 1.0
