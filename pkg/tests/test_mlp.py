import json

import numpy as np
import pytest

from dualsdp import LoadInstance, Prediction, complete, load_network
from dualsdp.completion import backward
from dualsdp.mlp import (
    MODEL_VERSION,
    ModelFormatError,
    MlpModel,
    adam_step,
    backprop,
    forward,
    from_dict,
    init_mlp,
    load,
    save,
    to_dict,
)

from .conftest import case_path
from .oracles import central_difference


def _set_params(model, flat):
    k = 0
    for p in model.params():
        p[...] = flat[k : k + p.size].reshape(p.shape)
        k += p.size


def _flat(model):
    return np.concatenate([p.ravel() for p in model.params()])


def test_zero_weights_give_zero_output():
    m = init_mlp(4, 6, hidden=(5,), output_gain=0.0)
    Y, _ = forward(m, np.ones((3, 4)))
    assert np.all(Y == 0)


def test_identity_layer_passes_normalised_input():
    m = MlpModel([2, 2], [np.eye(2)], [np.zeros(2)], activation="identity")
    m.norm_mean = np.array([1.0, 2.0])
    m.norm_scale = np.array([2.0, 4.0])
    Y, _ = forward(m, np.array([[3.0, 6.0]]))
    np.testing.assert_allclose(Y, [[1.0, 1.0]])


def test_forward_is_deterministic():
    a = init_mlp(6, 10, seed=3)
    b = init_mlp(6, 10, seed=3)
    x = np.linspace(-1, 1, 12).reshape(2, 6)
    np.testing.assert_array_equal(forward(a, x)[0], forward(b, x)[0])


def test_wrong_input_width():
    with pytest.raises(ValueError):
        forward(init_mlp(3, 2), np.ones((1, 4)))


@pytest.mark.parametrize("activation", ["softplus", "identity"])
def test_backprop_matches_finite_differences(activation):
    rng = np.random.default_rng(0)
    m = init_mlp(3, 4, hidden=(5, 6), activation=activation, seed=1, output_gain=1.0, output_scale=2.5)
    X = rng.normal(size=(7, 3))
    U = rng.normal(size=(7, 4))
    _, cache = forward(m, X)
    grads = np.concatenate([g.ravel() for g in backprop(m, cache, U)])

    def loss(flat):
        mm = m.copy()
        _set_params(mm, flat)
        return float(np.sum(U * forward(mm, X)[0]))

    np.testing.assert_allclose(grads, central_difference(loss, _flat(m), 1e-6), rtol=1e-6, atol=1e-8)


def test_backprop_zero_and_linear_in_upstream():
    m = init_mlp(3, 4, hidden=(5,), seed=2)
    X = np.ones((2, 3))
    _, cache = forward(m, X)
    U = np.arange(8.0).reshape(2, 4)
    assert all(np.all(g == 0) for g in backprop(m, cache, np.zeros_like(U)))
    g1 = backprop(m, cache, U)
    g2 = backprop(m, cache, 2 * U)
    for a, b in zip(g1, g2):
        np.testing.assert_allclose(b, 2 * a)


def test_end_to_end_gradient_two_bus():
    net = load_network(case_path("case2.m"))
    inst = LoadInstance([0.0, 0.55], [0.0, 0.12])
    m = init_mlp(4, Prediction.size(net), hidden=(8,), seed=4, output_gain=1.0, output_scale=10.0)

    def objective(model):
        y, cache = forward(model, inst.features[None, :])
        sol, tape = complete(net, Prediction.from_vector(net, y[0]), inst)
        return sol, tape, cache

    sol, tape, cache = objective(m)
    g = backward(net, inst, tape, sol).to_vector()
    grads = np.concatenate([p.ravel() for p in backprop(m, cache, g[None, :])])

    def f(flat):
        mm = m.copy()
        _set_params(mm, flat)
        return objective(mm)[0].objective

    rng = np.random.default_rng(0)
    idx = rng.choice(grads.size, 20, replace=False)
    base = _flat(m)
    for k in idx:
        e = np.zeros_like(base)
        e[k] = 1e-5
        fd = (f(base + e) - f(base - e)) / 2e-5
        assert grads[k] == pytest.approx(fd, rel=1e-4, abs=1e-6)


def test_adam_single_step_by_hand():
    m = MlpModel([1, 1], [np.zeros((1, 1))], [np.zeros(1)], activation="identity")
    adam_step(m, [np.ones((1, 1)), np.zeros(1)], lr=1e-3)
    # m = 0.1, v = 0.001; bias-corrected both are 1
    assert m.weights[0][0, 0] == pytest.approx(-1e-3 / (1 + 1e-8), rel=1e-12)
    assert m.biases[0][0] == 0.0
    assert m.adam.step == 1


def test_adam_zero_gradient_decays_moments():
    m = MlpModel([1, 1], [np.zeros((1, 1))], [np.zeros(1)], activation="identity")
    adam_step(m, [np.ones((1, 1)), np.zeros(1)])
    w = m.weights[0].copy()
    m1 = m.adam.m[0].copy()
    adam_step(m, [np.zeros((1, 1)), np.zeros(1)])
    np.testing.assert_allclose(m.adam.m[0], 0.9 * m1)
    # stored moments keep pushing the weight in the same direction
    assert m.weights[0][0, 0] < w[0, 0]


def test_adam_deterministic():
    a, b = init_mlp(2, 2, seed=1), init_mlp(2, 2, seed=1)
    g = [np.full_like(p, 0.3) for p in a.params()]
    for _ in range(3):
        adam_step(a, g)
        adam_step(b, g)
    for p, q in zip(a.params(), b.params()):
        np.testing.assert_array_equal(p, q)


def test_save_load_round_trip():
    m = init_mlp(4, 3, hidden=(5,), seed=9, output_scale=7.0)
    m.set_normalization(np.random.default_rng(0).normal(size=(10, 4)))
    adam_step(m, [np.ones_like(p) for p in m.params()])
    back = load(save(m))
    for p, q in zip(m.params(), back.params()):
        np.testing.assert_array_equal(p, q)
    np.testing.assert_array_equal(back.norm_scale, m.norm_scale)
    assert back.output_scale == 7.0
    assert back.adam.step == 1


def test_truncated_file():
    data = save(init_mlp(2, 2))
    with pytest.raises(ModelFormatError):
        load(data[: len(data) // 2])


def test_version_mismatch():
    d = to_dict(init_mlp(2, 2))
    d["version"] = MODEL_VERSION + 1
    with pytest.raises(ModelFormatError, match="unsupported model version"):
        from_dict(d)


def test_malformed_weights():
    d = to_dict(init_mlp(2, 2))
    d["weights"][0] = [[1.0]]
    with pytest.raises(ModelFormatError):
        load(json.dumps(d).encode())


def test_constant_feature_normalisation():
    m = init_mlp(2, 1)
    m.set_normalization(np.array([[1.0, 5.0], [3.0, 5.0]]))
    np.testing.assert_allclose(m.norm_scale, [1.0, 1.0])
    np.testing.assert_allclose(m.norm_mean, [2.0, 5.0])
