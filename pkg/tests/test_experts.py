import numpy as np
import pytest

from app.common.enums import ExpertKind
from app.common.errors import ConfigError, DimensionError
from app.model.experts import (
    REVIN_EPS,
    ExpertBank,
    LinearExpert,
    default_frequency_table,
    expert_forward,
    frequency_label,
    mean_forward,
    naive_forward,
    revin_denormalize,
    revin_normalize,
)


def test_revin_normalize():
    normalized, state = revin_normalize(np.array([[1.0, 2.0, 3.0]]))
    assert state.mu[0, 0] == 2.0
    assert abs(normalized.mean()) < 1e-12
    assert normalized.std() == pytest.approx(1.0, abs=1e-12)


def test_revin_constant_row():
    normalized, state = revin_normalize(np.array([[7.0, 7.0, 7.0]]))
    np.testing.assert_array_equal(normalized, np.zeros((1, 3)))
    assert state.sigma[0, 0] == REVIN_EPS


def test_revin_round_trip(rng):
    X = rng.normal(2.0, 3.0, size=(5, 20))
    normalized, state = revin_normalize(X)
    np.testing.assert_allclose(revin_denormalize(normalized, state), X, atol=1e-12)


def test_copy_last_value_expert_is_naive(rng):
    L, H = 8, 3
    weight = np.zeros((L, H))
    weight[-1, :] = 1.0
    expert = LinearExpert(weight=weight, bias=np.zeros(H), kind=ExpertKind.COMPLEMENTARY)
    X = rng.normal(size=(4, L))
    np.testing.assert_allclose(expert_forward(expert, X), naive_forward(X, H), atol=1e-12)


def test_zero_expert_predicts_the_mean(rng):
    expert = LinearExpert.zeros(8, 3, 1 / 4)
    X = rng.normal(size=(4, 8))
    np.testing.assert_allclose(expert_forward(expert, X), np.repeat(X.mean(axis=1, keepdims=True), 3, axis=1), atol=1e-12)


def test_expert_forward_matches_row_loop(rng, make_expert):
    expert = make_expert(rng, 8, 3)
    X = rng.normal(size=(2, 8))
    expected = np.empty((2, 3))
    for b in range(2):
        mu = X[b].mean()
        sigma = max(X[b].std(), REVIN_EPS)
        z = (X[b] - mu) / sigma
        for h in range(3):
            expected[b, h] = sigma * (sum(z[t] * expert.weight[t, h] for t in range(8)) + expert.bias[h]) + mu
    np.testing.assert_allclose(expert_forward(expert, X), expected, atol=1e-12)


def test_expert_forward_shape_mismatch(rng, make_expert):
    with pytest.raises(DimensionError):
        expert_forward(make_expert(rng, 8, 3), rng.normal(size=(2, 9)))


def test_scale_shift_equivariance(rng, make_expert):
    expert = make_expert(rng, 16, 4, frequency=1 / 8)
    X = rng.normal(size=(6, 16))
    a, c = 3.7, -12.0
    np.testing.assert_allclose(expert_forward(expert, a * X + c), a * expert_forward(expert, X) + c, atol=1e-9)
    np.testing.assert_allclose(naive_forward(a * X + c, 4), a * naive_forward(X, 4) + c, atol=1e-12)
    np.testing.assert_allclose(mean_forward(a * X + c, 4), a * mean_forward(X, 4) + c, atol=1e-12)


def test_linear_in_parameters_in_normalized_space(rng, make_expert):
    first, second = make_expert(rng, 8, 3), make_expert(rng, 8, 3)
    summed = LinearExpert(weight=first.weight + second.weight, bias=first.bias + second.bias, kind=ExpertKind.COMPLEMENTARY)
    X = rng.normal(size=(5, 8))
    normalized, state = revin_normalize(X)

    def inner(expert):
        return (expert_forward(expert, X) - state.mu) / state.sigma

    np.testing.assert_allclose(inner(summed), inner(first) + inner(second), atol=1e-9)
    np.testing.assert_allclose(inner(first), normalized @ first.weight + first.bias, atol=1e-9)


def test_naive_and_mean_experts():
    X = np.array([[1.0, 2.0, 5.5], [0.0, 0.0, -1.0], [4.0, 4.0, 4.0]])
    np.testing.assert_array_equal(naive_forward(X, 4)[0], [5.5] * 4)
    np.testing.assert_array_equal(naive_forward(X, 2)[:, 0], [5.5, -1.0, 4.0])
    assert naive_forward(X, 0).shape == (3, 0)
    np.testing.assert_array_equal(mean_forward(np.array([[1.0, 2.0, 3.0]]), 2), [[2.0, 2.0]])
    np.testing.assert_array_equal(mean_forward(X, 3)[2], [4.0] * 3)


def test_mean_matches_direct_sum(rng):
    X = rng.normal(size=(3, 11))
    expected = np.array([[sum(row) / len(row)] * 5 for row in X])
    np.testing.assert_allclose(mean_forward(X, 5), expected, atol=1e-12)


def test_default_frequency_table():
    table = default_frequency_table()
    assert len(table) == 37
    assert len(set(table)) == 37
    for anchor in (7, 24, 27, 48, 144, 288, 365, 1440, 21600):
        assert 1 / anchor in table
    assert all(0 < f <= 0.5 for f in table)
    periods = [1 / f for f in table]
    assert all(a > b for a, b in zip(periods, periods[1:]))


def test_frequency_label():
    assert frequency_label(1 / 24) == "1/24"
    assert frequency_label(0.5) == "1/2"
    assert frequency_label(0.3) == "3/10"


def test_learnable_expert_validation():
    with pytest.raises(ConfigError):
        LinearExpert(weight=np.zeros((4, 2)), bias=np.zeros(2), kind=ExpertKind.FREQUENCY)
    with pytest.raises(ConfigError):
        LinearExpert(weight=np.zeros((4, 2)), bias=np.zeros(2), kind=ExpertKind.FREQUENCY, assigned_frequency=0.7)
    with pytest.raises(ConfigError):
        LinearExpert(weight=np.zeros((4, 2)), bias=np.zeros(2), kind=ExpertKind.NAIVE)
    with pytest.raises(DimensionError):
        LinearExpert(weight=np.zeros((4, 2)), bias=np.zeros(3), kind=ExpertKind.COMPLEMENTARY)


def test_bank_order_and_names(rng, make_expert):
    bank = ExpertBank(
        frequency_experts=[make_expert(rng, 8, 2, 1 / 4), make_expert(rng, 8, 2, 1 / 24), make_expert(rng, 8, 2, 1 / 7)],
        complementary_experts=[make_expert(rng, 8, 2), make_expert(rng, 8, 2)],
        lookback=8,
        horizon=2,
    )
    assert bank.size == 7
    assert bank.expert_names() == ["freq_24", "freq_7", "freq_4", "comp_0", "comp_1", "naive", "mean"]
    assert bank.frequency_table() == [1 / 24, 1 / 7, 1 / 4]
    assert bank.expert_kinds()[-2:] == [ExpertKind.NAIVE, ExpertKind.MEAN]
    assert bank.assigned_frequencies()[3:] == [None] * 4
    assert bank.learnable_parameter_count() == 5 * (8 * 2 + 2)

    X = rng.normal(size=(3, 8))
    np.testing.assert_array_equal(bank.forward_expert(5, X), naive_forward(X, 2))
    np.testing.assert_array_equal(bank.forward_expert(6, X), mean_forward(X, 2))
    with pytest.raises(IndexError):
        bank.forward_expert(7, X)


def test_bank_rejects_mismatched_experts(rng, make_expert):
    with pytest.raises(DimensionError):
        ExpertBank(frequency_experts=[make_expert(rng, 8, 2, 1 / 4)], lookback=8, horizon=3)
    with pytest.raises(ConfigError):
        ExpertBank(frequency_experts=[], include_naive=False, include_mean=False, lookback=8, horizon=2)
