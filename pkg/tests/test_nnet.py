import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from noisyrisk import nnet
from noisyrisk.nnet import CostWeights, Layer, MlpParams, OptimState

from .gradcheck import max_rel_error, numeric_grads


def _net(n_in=4, hidden=(5,), seed=0):
    return nnet.init_mlp(n_in, hidden, np.random.default_rng(seed))


# -- forward ----------------------------------------------------------------


def test_zero_params_give_even_odds():
    p = _net().zeros_like()
    _, probs = nnet.forward(p, np.random.default_rng(1).standard_normal((6, 4)))
    assert np.allclose(probs, 0.5)


def test_softmax_known_value():
    probs = nnet.softmax(np.array([[2.0, 0.0]]))
    e2 = math.exp(2.0)
    assert probs[0] == pytest.approx([e2 / (e2 + 1), 1 / (e2 + 1)], abs=1e-12)
    assert probs[0, 0] == pytest.approx(0.8808, abs=1e-4)


@given(arrays(np.float64, (5, 2), elements=st.floats(-50, 50)), st.floats(-100, 100))
def test_softmax_shift_invariance_and_normalization(logits, c):
    p = nnet.softmax(logits)
    assert np.allclose(p.sum(axis=1), 1.0, atol=1e-9)
    assert np.allclose(nnet.softmax(logits + c), p, atol=1e-9)


def test_forward_rejects_bad_shape_and_nonfinite():
    p = _net()
    with pytest.raises(nnet.ShapeError):
        nnet.forward(p, np.zeros((2, 3)))
    x = np.zeros((2, 4))
    x[1, 2] = np.nan
    with pytest.raises(nnet.NonFiniteError):
        nnet.forward(p, x)


def test_params_validate_chain():
    with pytest.raises(nnet.ShapeError):
        MlpParams([Layer(np.zeros((3, 4)), np.zeros(4)), Layer(np.zeros((5, 2)), np.zeros(2))])
    with pytest.raises(nnet.ShapeError):
        MlpParams([Layer(np.zeros((3, 3)), np.zeros(3))])


def test_default_architecture():
    p = nnet.init_mlp(16)
    assert p.sizes == [16, 64, 64, 2]


# -- losses -----------------------------------------------------------------


def test_cs_loss_examples():
    w = CostWeights(1, 20)
    assert nnet.cs_loss_per_sample(np.array([[0.5, 0.5]]), [1], w)[0] == pytest.approx(20 * math.log(2))
    assert nnet.cs_loss_per_sample(np.array([[1.0, 0.0]]), [0], w)[0] == 0.0
    assert nnet.cs_loss_per_sample(np.array([[0.75, 0.25]]), [1])[0] == pytest.approx(-math.log(0.25))


def test_zero_probability_is_floored():
    v = nnet.cs_loss_per_sample(np.array([[1.0, 0.0]]), [1])[0]
    assert np.isfinite(v) and v == pytest.approx(-math.log(1e-12))


@given(st.floats(1e-6, 1 - 1e-6), st.integers(0, 1))
def test_unit_weights_equal_plain_ce(p1, y):
    probs = np.array([[1 - p1, p1]])
    plain = -math.log(probs[0, y])
    assert abs(nnet.cs_loss_per_sample(probs, [y], CostWeights(1, 1))[0] - plain) <= 1e-12


def test_cost_weights_must_be_positive():
    with pytest.raises(ValueError):
        CostWeights(0, 20)


# -- gradients ----------------------------------------------------------------


def test_output_gradient_identity():
    p = _net()
    x = np.random.default_rng(2).standard_normal((1, 4))
    acts = nnet.forward_cached(p, x)
    probs = nnet.softmax(acts[-1])
    g = nnet.backward(p, x, [1], CostWeights(1, 20))
    expected = 20 * (probs - np.array([[0.0, 1.0]]))
    # last layer bias gradient equals d(loss)/d(logits) summed over the batch
    assert np.allclose(g.layers[-1].bias, expected[0])


@pytest.mark.parametrize("weights", [CostWeights(1, 1), CostWeights(1, 20), CostWeights(3, 0.5)])
def test_gradient_matches_finite_differences(weights):
    r = np.random.default_rng(7)
    p = nnet.init_mlp(4, (6,), r)
    x = r.standard_normal((16, 4))
    y = r.integers(0, 2, 16)
    g = nnet.backward(p, x, y, weights)

    def loss():
        return float(nnet.cs_loss_per_sample(nnet.forward(p, x)[1], y, weights).mean())

    assert max_rel_error(g.arrays(), numeric_grads(loss, p)) < 1e-4


def test_gradients_linear_in_weights():
    r = np.random.default_rng(3)
    p = _net()
    x, y = r.standard_normal((8, 4)), r.integers(0, 2, 8)
    g1 = nnet.backward(p, x, y, CostWeights(1, 1))
    g2 = nnet.backward(p, x, y, CostWeights(2, 2))
    assert all(np.array_equal(2 * a, b) for a, b in zip(g1.arrays(), g2.arrays()))


def test_loss_and_grad_agrees_with_backward():
    r = np.random.default_rng(4)
    p = _net()
    x, y = r.standard_normal((8, 4)), r.integers(0, 2, 8)
    w = CostWeights(1, 20)
    loss, g = nnet.loss_and_grad(p, x, y, w)
    assert loss == pytest.approx(nnet.cs_loss_per_sample(nnet.forward(p, x)[1], y, w).mean())
    assert all(np.allclose(a, b) for a, b in zip(g.arrays(), nnet.backward(p, x, y, w).arrays()))


# -- optimizer ----------------------------------------------------------------


def _single(value=0.0):
    return MlpParams([Layer(np.full((1, 2), value), np.zeros(2))])


def test_plain_sgd_step():
    p, g = _single(1.0), _single(0.5)
    st_ = OptimState.for_params(p, momentum=0.0)
    nnet.sgd_momentum_step(p, g, st_, lr=0.1)
    assert np.allclose(p.layers[0].weight, 1.0 - 0.05)


def test_zero_gradient_is_fixed_point():
    p = _net()
    before = p.copy()
    st_ = OptimState.for_params(p)
    for _ in range(5):
        nnet.sgd_momentum_step(p, p.zeros_like(), st_, lr=0.1)
    assert all(np.array_equal(a, b) for a, b in zip(p.arrays(), before.arrays()))


def test_momentum_two_steps_displacement():
    p, g = _single(0.0), _single(1.0)
    st_ = OptimState.for_params(p, momentum=0.9)
    for _ in range(2):
        nnet.sgd_momentum_step(p, g, st_, lr=0.01)
    assert p.layers[0].weight == pytest.approx(-0.01 * (1 + 1.9))


def test_cosine_schedule():
    assert nnet.cosine_lr(0, 200, 0.01) == 0.01
    assert nnet.cosine_lr(100, 200, 0.01) == pytest.approx(0.005)
    assert nnet.cosine_lr(199, 200, 0.01) == pytest.approx(0.005 * (1 + math.cos(199 * math.pi / 200)))
    assert nnet.cosine_lr(199, 200, 0.01) == pytest.approx(6.17e-7, rel=1e-3)
    lrs = [nnet.cosine_lr(e, 60, 0.01) for e in range(60)]
    assert all(a > b for a, b in zip(lrs, lrs[1:]))
    with pytest.raises(ValueError):
        nnet.cosine_lr(200, 200, 0.01)


# -- prediction / checkpoints ----------------------------------------------------


def test_threshold_rule():
    probs = np.array([[0.3, 0.7], [0.5, 0.5], [0.6, 0.4]])
    assert nnet.predict_from_probs(probs, 0.5).tolist() == [1, 1, 0]
    assert nnet.predict_from_probs(probs, 0.9).tolist() == [0, 0, 0]


def test_checkpoint_round_trip(tmp_path):
    p = _net(seed=11)
    nnet.save_checkpoint(p, tmp_path / "m.json")
    q = nnet.load_checkpoint(tmp_path / "m.json")
    assert all(np.array_equal(a, b) for a, b in zip(p.arrays(), q.arrays()))


def test_training_reaches_low_loss_on_separable_data():
    from noisyrisk.datagen import SyntheticSpec, generate_synthetic

    hits = 0
    for seed in range(5):
        train, _, _ = generate_synthetic(SyntheticSpec(n_train=400, class_separation=8.0, seed=seed))
        r = np.random.default_rng(seed)
        p = nnet.init_mlp(train.n_features, (64, 64), r)
        st_ = OptimState.for_params(p, 0.9, 0.01, 50)
        x, y = train.features, train.observed_labels
        for epoch in range(50):
            order = r.permutation(len(y))
            for s in range(0, len(y), 64):
                b = order[s : s + 64]
                _, g = nnet.loss_and_grad(p, x[b], y[b])
                nnet.sgd_momentum_step(p, g, st_, nnet.cosine_lr(epoch, 50, 0.01))
        hits += float(nnet.ce_per_sample(nnet.forward(p, x)[1], y).mean()) < 0.1
    assert hits >= 4
