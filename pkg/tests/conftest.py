import numpy as np
import pytest

from app.common.enums import ExpertKind
from app.model.experts import ExpertBank, LinearExpert
from app.model.forecaster import MixtureForecaster
from app.model.gating import GatingNetwork


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run the training experiments")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: training experiments, run with --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(7)


def random_expert(rng, lookback, horizon, frequency=None, scale=0.3):
    kind = ExpertKind.FREQUENCY if frequency is not None else ExpertKind.COMPLEMENTARY
    return LinearExpert(
        weight=rng.normal(0.0, scale, size=(lookback, horizon)),
        bias=rng.normal(0.0, scale, size=horizon),
        kind=kind,
        assigned_frequency=frequency,
    )


def build_toy_model(
    rng,
    lookback=16,
    horizon=4,
    spectrum_size=32,
    frequencies=(1 / 8, 1 / 4, 1 / 2),
    num_complementary=1,
    include_naive=True,
    include_mean=True,
    top_k=2,
    noise_std=0.0,
    gate_scale=3.0,
):
    """
    Small mixture with random experts and a gate random enough to spread its choices
    """
    bank = ExpertBank(
        frequency_experts=[random_expert(rng, lookback, horizon, f) for f in frequencies],
        complementary_experts=[random_expert(rng, lookback, horizon) for _ in range(num_complementary)],
        include_naive=include_naive,
        include_mean=include_mean,
        lookback=lookback,
        horizon=horizon,
    )
    gate = GatingNetwork(
        weight=rng.normal(0.0, gate_scale, size=(spectrum_size, bank.size)),
        bias=rng.normal(0.0, 0.1, size=bank.size),
        noise_std=noise_std,
        top_k=top_k,
    )
    return MixtureForecaster(bank=bank, gate=gate)


@pytest.fixture
def toy_model(rng):
    return build_toy_model(rng)


@pytest.fixture
def make_toy_model():
    return build_toy_model


@pytest.fixture
def make_expert():
    return random_expert
