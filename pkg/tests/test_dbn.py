import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from boltzclass import dbn as D
from boltzclass import rbm as R
from boltzclass.core import Prng
from boltzclass.dbn import DbnClassifier, FineTuneConfig
from boltzclass.rbm import Rbm, TrainConfig

from conftest import random_rbm


def toy_dbn(dims=(6, 4), k=3, seed=0) -> DbnClassifier:
    layers = [random_rbm(m, n, seed + i) for i, (m, n) in enumerate(zip(dims, dims[1:]))]
    rng = np.random.default_rng(seed + 100)
    return DbnClassifier(layers, rng.normal(size=(dims[-1], k)), rng.normal(size=k))


def params(model):
    out = []
    for layer in model.layers:
        out += [layer.W, layer.c]
    return out + [model.softmax_W, model.softmax_bias]


def flat_grads(g):
    out = []
    for gW, gc in zip(g["W"], g["c"]):
        out += [gW, gc]
    return out + [g["softmax_W"], g["softmax_bias"]]


def finite_difference(model, X, y, step=1e-5):
    grads = []
    for p in params(model):
        g = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            orig = p[idx]
            p[idx] = orig + step
            up = D.loss_and_grads(model, X, y)[0]
            p[idx] = orig - step
            down = D.loss_and_grads(model, X, y)[0]
            p[idx] = orig
            g[idx] = (up - down) / (2 * step)
        grads.append(g)
    return grads


def max_relative_error(a, b):
    return max(float(np.max(np.abs(x - y) / np.maximum(np.abs(x) + np.abs(y), 1e-8)))
               for x, y in zip(a, b))


# --- structure ------------------------------------------------------------------------

def test_chaining_constraint():
    with pytest.raises(ValueError, match="chaining"):
        DbnClassifier([Rbm.zeros(4, 3), Rbm.zeros(4, 2)], np.zeros((2, 2)), np.zeros(2))
    with pytest.raises(ValueError, match="softmax_W"):
        DbnClassifier([Rbm.zeros(4, 3)], np.zeros((2, 2)), np.zeros(2))


def test_pretrain_single_layer_is_plain_rbm_training():
    data = np.random.default_rng(0).uniform(size=(12, 5))
    cfg = TrainConfig(eta=0.05, epochs=4, batch_size=5)
    model = D.greedy_pretrain([5, 3], data, cfg, Prng(8), num_classes=2)
    rng = Prng(8)
    ref = Rbm.init(5, 3, rng)
    trace = R.train(ref, data, cfg, rng)
    assert model.layers[0].W.tobytes() == ref.W.tobytes()
    assert model.pretrain_traces[0] == trace


def test_pretrain_shapes_dbn2_small_data():
    data = np.random.default_rng(0).uniform(size=(3, 2500))
    model = D.greedy_pretrain([2500, 500, 500], data, TrainConfig(eta=1e-5, epochs=1),
                              Prng(0), num_classes=2)
    assert model.shapes == [(2500, 500), (500, 500)]
    assert model.softmax_W.shape == (500, 2)


def test_pretrain_dimension_mismatch():
    with pytest.raises(ValueError):
        D.greedy_pretrain([4, 3], np.zeros((2, 5)), TrainConfig(epochs=1), Prng(0))


def test_upper_layers_see_mean_field_features():
    data = np.random.default_rng(1).uniform(size=(10, 6))
    cfg = TrainConfig(eta=0.05, epochs=3, batch_size=4)
    model = D.greedy_pretrain([6, 4, 3], data, cfg, Prng(2), num_classes=2)
    rng = Prng(2)
    first = Rbm.init(6, 4, rng)
    R.train(first, data, cfg, rng)
    second = Rbm.init(4, 3, rng)
    R.train(second, R.prob_h_given_v(first, data), cfg, rng)
    assert model.layers[1].W.tobytes() == second.W.tobytes()


@settings(max_examples=15, deadline=None)
@given(st.lists(st.integers(1, 6), min_size=1, max_size=4))
def test_pretrain_chaining_holds(hidden):
    data = np.random.default_rng(0).uniform(size=(4, 5))
    model = D.greedy_pretrain([5] + hidden, data, TrainConfig(eta=0.01, epochs=1), Prng(0))
    dims = [5] + hidden
    assert model.shapes == list(zip(dims, dims[1:]))


# --- forward / predict ----------------------------------------------------------------

def test_zero_model_uniform():
    model = DbnClassifier([Rbm.zeros(4, 3)], np.zeros((3, 5)), np.zeros(5))
    _, probs = D.forward(model, np.ones(4))
    assert np.allclose(probs, 0.2)
    assert D.predict(model, np.ones(4)) == 0


def test_forward_probabilities_normalised():
    model = toy_dbn()
    acts, probs = D.forward(model, np.random.default_rng(0).uniform(size=6))
    assert len(acts) == 2
    assert np.all((probs > 0) & (probs < 1))
    assert abs(probs.sum() - 1.0) < 1e-12


def test_softmax_shift_invariance():
    logits = np.random.default_rng(0).normal(size=5)
    assert np.allclose(D.softmax(logits), D.softmax(logits + 7.0), atol=1e-12)
    model = toy_dbn()
    x = np.full(6, 0.3)
    shifted = model.copy()
    shifted.softmax_bias += 7.0
    assert np.allclose(D.forward(model, x)[1], D.forward(shifted, x)[1], atol=1e-12)


def test_predict_logits():
    model = DbnClassifier([Rbm.zeros(2, 1)], np.zeros((1, 3)), np.array([0.0, 10.0, 0.0]))
    assert D.predict(model, [0.0, 0.0]) == 1


def test_predict_matches_forward_argmax():
    model = toy_dbn(seed=3)
    X = np.random.default_rng(1).uniform(size=(1000, 6))
    assert np.array_equal(D.predict(model, X), np.argmax(D.forward(model, X)[1], axis=1))


def test_forward_dimension_error():
    with pytest.raises(ValueError):
        D.forward(toy_dbn(), np.zeros(5))


# --- fine-tuning ----------------------------------------------------------------------

def test_gradients_match_finite_differences():
    model = toy_dbn((6, 4), 3, seed=5)
    rng = np.random.default_rng(7)
    X, y = rng.uniform(size=(8, 6)), rng.integers(0, 3, 8)
    _, g = D.loss_and_grads(model, X, y)
    assert max_relative_error(flat_grads(g), finite_difference(model, X, y)) < 1e-4


def test_gradients_two_layers():
    model = toy_dbn((5, 4, 3), 2, seed=9)
    rng = np.random.default_rng(8)
    X, y = rng.uniform(size=(6, 5)), rng.integers(0, 2, 6)
    _, g = D.loss_and_grads(model, X, y)
    assert max_relative_error(flat_grads(g), finite_difference(model, X, y)) < 1e-4


def test_fine_tune_zero_eta_constant():
    cfg = object.__new__(FineTuneConfig)
    for k, v in dict(eta=0.0, epochs=5, batch_size=4, seed=0).items():
        object.__setattr__(cfg, k, v)
    model = toy_dbn()
    before = model.copy()
    rng = np.random.default_rng(0)
    trace = D.fine_tune(model, rng.uniform(size=(8, 6)), rng.integers(0, 3, 8), cfg)
    assert all(abs(t - trace[0]) < 1e-12 for t in trace)
    for a, b in zip(params(model), params(before)):
        assert np.array_equal(a, b)


def test_fine_tune_separable():
    rng = np.random.default_rng(4)
    y = np.repeat([0, 1], 20)
    X = np.clip(np.where(y[:, None] == 0, [0.9, 0.9, 0.1, 0.1], [0.1, 0.1, 0.9, 0.9])
                + rng.normal(0, 0.05, (40, 4)), 0, 1)
    model = D.greedy_pretrain([4, 6], X, TrainConfig(eta=0.05, epochs=10, batch_size=8),
                              Prng(0), num_classes=2)
    trace = D.fine_tune(model, X, y, FineTuneConfig(eta=0.5, epochs=100, batch_size=8), Prng(1))
    assert len(trace) == 100 and trace[-1] < trace[0]
    assert np.mean(D.predict(model, X) == y) >= 0.95


def test_fine_tune_label_out_of_range():
    with pytest.raises(ValueError, match="label"):
        D.fine_tune(toy_dbn(), np.zeros((2, 6)), [0, 3], FineTuneConfig(epochs=1))


@pytest.mark.parametrize("bad", [dict(eta=-1.0), dict(epochs=0), dict(batch_size=0)])
def test_fine_tune_config_invariants(bad):
    with pytest.raises(ValueError):
        FineTuneConfig(**bad)


def test_fine_tune_defaults():
    cfg = FineTuneConfig()
    assert (cfg.epochs, cfg.batch_size) == (100, 128)


# --- serialization --------------------------------------------------------------------

def test_binary_round_trip(tmp_path):
    model = toy_dbn((6, 5, 4), 3, seed=2)
    D.save_dbn(model, tmp_path / "m.dbn")
    back = D.load_dbn(tmp_path / "m.dbn")
    for a, b in zip(params(model), params(back)):
        assert a.tobytes() == b.tobytes()
    for la, lb in zip(model.layers, back.layers):
        assert la.b.tobytes() == lb.b.tobytes()


def test_binary_header_and_errors():
    buf = D.dbn_to_bytes(toy_dbn())
    assert buf[:4] == b"EBMN" and buf[4] == 1
    assert int.from_bytes(buf[5:9], "little") == 1
    assert int.from_bytes(buf[9:13], "little") == 3
    assert buf[13:17] == b"EBMR"
    with pytest.raises(ValueError):
        D.dbn_from_bytes(buf[:-1])


def test_json_round_trip():
    model = toy_dbn((6, 4, 2), 3, seed=4)
    back = D.dbn_from_json(D.dbn_to_json(model))
    for a, b in zip(params(model), params(back)):
        assert a.tobytes() == b.tobytes()
