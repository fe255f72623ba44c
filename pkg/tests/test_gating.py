import numpy as np
import pytest

from app.common.errors import ConfigError, DimensionError
from app.model.experts import ExpertBank, mean_forward, naive_forward
from app.model.forecaster import ZS_MODEL
from app.model.gating import (
    GatingNetwork,
    gate_scores,
    gate_weights,
    mixture_forward,
    rebalance_k,
    softmax_over_active,
    top_k_indices,
    top_k_mask,
)


def test_zero_weight_scores_equal_bias(rng):
    net = GatingNetwork(weight=np.zeros((16, 3)), bias=np.array([0.5, -1.0, 2.0]), top_k=1)
    scores = gate_scores(net, rng.normal(size=(4, 20)))
    np.testing.assert_allclose(scores, np.tile([0.5, -1.0, 2.0], (4, 1)))


def test_top_k_mask():
    masked = top_k_mask(np.array([3.0, 1.0, 2.0]), 2)
    np.testing.assert_array_equal(masked, [[3.0, -np.inf, 2.0]])


def test_top_k_ties_keep_lower_index():
    assert top_k_indices(np.array([1.0, 1.0, 0.0]), 1).tolist() == [[0]]
    assert top_k_indices(np.array([0.0, 2.0, 2.0, 2.0]), 2).tolist() == [[1, 2]]


def test_top_k_rejects_bad_k():
    with pytest.raises(ConfigError):
        top_k_indices(np.zeros((1, 3)), 0)
    with pytest.raises(ConfigError):
        top_k_indices(np.zeros((1, 3)), 4)


def test_softmax_over_active():
    scores = np.array([[0.0, np.log(2.0), 5.0]])
    weights = softmax_over_active(scores, np.array([[1, 0]]))
    np.testing.assert_allclose(weights, [[1 / 3, 2 / 3, 0.0]])


@pytest.mark.parametrize("k", [1, 2, 4, 6])
def test_weights_are_sparse_and_sum_to_one(toy_model, rng, k):
    X = rng.normal(size=(1000, toy_model.lookback)) + rng.normal(0.0, 3.0, size=(1000, 1))
    decision = gate_weights(toy_model.gate, X, k=k)
    assert ((decision.weights > 0).sum(axis=1) == k).all()
    np.testing.assert_allclose(decision.weights.sum(axis=1), 1.0, atol=1e-12)
    assert (decision.weights >= 0).all()
    inactive = np.ones_like(decision.weights, dtype=bool)
    np.put_along_axis(inactive, decision.active, False, axis=1)
    assert not decision.weights[inactive].any()


def test_far_behind_survivor_keeps_a_positive_weight():
    weights = softmax_over_active(np.array([[0.0, -1000.0, 5.0]]), np.array([[0, 1]]))
    assert (weights[0, :2] > 0).all()
    assert weights[0, 2] == 0.0
    assert weights.sum() == pytest.approx(1.0)


def test_gate_rejects_zero_k(toy_model, rng):
    with pytest.raises(ConfigError):
        gate_weights(toy_model.gate, rng.normal(size=(3, toy_model.lookback)), k=0)


def test_active_sets_are_nested(rng):
    scores = rng.normal(size=(200, 9))
    previous = set()
    for k in range(1, 10):
        current = [set(row) for row in top_k_indices(scores, k).tolist()]
        if previous:
            assert all(p <= c for p, c in zip(previous, current))
        previous = current


def test_gate_ignores_input_scale_and_offset(toy_model, rng):
    X = rng.normal(size=(1000, toy_model.lookback))
    base = gate_weights(toy_model.gate, X)
    shifted = gate_weights(toy_model.gate, 4.5 * X - 3.0)
    np.testing.assert_array_equal(base.active, shifted.active)
    np.testing.assert_allclose(base.weights, shifted.weights, atol=1e-9)


def test_inference_is_deterministic(toy_model, rng):
    X = rng.normal(size=(8, toy_model.lookback))
    first = gate_weights(toy_model.gate, X)
    second = gate_weights(toy_model.gate, X)
    np.testing.assert_array_equal(first.weights, second.weights)


def test_training_noise_needs_generator(make_toy_model, rng):
    model = make_toy_model(rng, noise_std=0.5)
    X = rng.normal(size=(3, model.lookback))
    with pytest.raises(ConfigError):
        gate_weights(model.gate, X, training=True)
    noisy = gate_weights(model.gate, X, training=True, rng=np.random.default_rng(1))
    again = gate_weights(model.gate, X, training=True, rng=np.random.default_rng(1))
    np.testing.assert_array_equal(noisy.scores, again.scores)
    assert not np.allclose(noisy.scores, gate_scores(model.gate, X))


def test_rebalance_to_single_expert(toy_model, rng):
    decision = gate_weights(toy_model.gate, rng.normal(size=(5, toy_model.lookback)))
    single = rebalance_k(decision, 1)
    assert single.k == 1
    np.testing.assert_array_equal(single.active[:, 0], decision.active[:, 0])
    np.testing.assert_array_equal(single.weights.max(axis=1), np.ones(5))
    assert (single.active_mask().sum(axis=1) == 1).all()


def test_mixture_of_fixed_experts_matches_hand_computation(rng):
    bank = ExpertBank(frequency_experts=[], lookback=8, horizon=3)
    net = GatingNetwork(weight=np.zeros((8, 2)), bias=np.array([0.0, np.log(2.0)]), top_k=2)
    X = rng.normal(size=(4, 8))
    output, decision = mixture_forward(bank, net, X)
    np.testing.assert_allclose(decision.weights, np.tile([1 / 3, 2 / 3], (4, 1)))
    np.testing.assert_allclose(output, naive_forward(X, 3) / 3 + 2 * mean_forward(X, 3) / 3, atol=1e-12)


def test_single_expert_route_is_that_expert(rng):
    bank = ExpertBank(frequency_experts=[], include_mean=False, lookback=8, horizon=5)
    net = GatingNetwork(weight=np.zeros((4, 1)), bias=np.zeros(1), top_k=1)
    X = rng.normal(size=(3, 8))
    output, _ = mixture_forward(bank, net, X)
    np.testing.assert_array_equal(output, naive_forward(X, 5))


def test_inactive_experts_are_never_evaluated(toy_model, rng, monkeypatch):
    X = rng.normal(size=(32, toy_model.lookback))
    calls = []
    original = toy_model.bank.forward_expert

    def recording(index, rows):
        calls.append((index, rows.shape[0]))
        return original(index, rows)

    monkeypatch.setattr(toy_model.bank, "forward_expert", recording)
    output, decision = toy_model.forward(X)
    mask = decision.active_mask()
    for index, count in calls:
        assert count == mask[:, index].sum()
    assert {i for i, _ in calls} == set(np.flatnonzero(mask.any(axis=0)).tolist())
    expected = sum(decision.weights[:, [i]] * original(i, X) for i in range(toy_model.bank.size))
    np.testing.assert_allclose(output, expected, atol=1e-12)


def test_mixture_rejects_wrong_lookback(toy_model, rng):
    with pytest.raises(DimensionError):
        toy_model.forward(rng.normal(size=(2, toy_model.lookback + 1)))


def test_gate_geometry_mismatch(rng):
    bank = ExpertBank(frequency_experts=[], lookback=8, horizon=2)
    net = GatingNetwork(weight=np.zeros((8, 3)), bias=np.zeros(3), top_k=1)
    with pytest.raises(DimensionError):
        mixture_forward(bank, net, rng.normal(size=(1, 8)))


def test_pretraining_architecture_routes_twelve_of_fifty_one(rng):
    assert ZS_MODEL.num_experts == 51
    net = GatingNetwork.initialize(ZS_MODEL.spectrum_size, ZS_MODEL.num_experts, ZS_MODEL.top_k, ZS_MODEL.noise_std, rng)
    bound = 1.0 / np.sqrt(ZS_MODEL.spectrum_size)
    assert np.abs(net.weight).max() <= bound
    decision = gate_weights(net, rng.normal(size=(6, ZS_MODEL.lookback)))
    assert decision.k == 12
    assert ((decision.weights > 0).sum(axis=1) == 12).all()
    np.testing.assert_allclose(decision.weights.sum(axis=1), 1.0, atol=1e-12)
