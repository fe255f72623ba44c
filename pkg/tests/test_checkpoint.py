import struct

import numpy as np
import pytest

from app.cli.checkpoint import (
    MAGIC,
    decode_checkpoint,
    encode_checkpoint,
    file_sha256,
    load_checkpoint,
    load_model,
    save_checkpoint,
    save_model,
)
from app.common.errors import IntegrityError, VersionError
from app.model.experts import ExpertBank, LinearExpert
from app.model.forecaster import ZS_MODEL, assemble_forecaster
from app.training.stages import complementary_init


@pytest.fixture
def model(make_toy_model, rng):
    toy = make_toy_model(rng, noise_std=0.1)
    toy.bank.frequency_experts[1].frozen = True
    return toy


def test_encode_decode_encode_is_bit_exact(model):
    run_config = {"seed": 3, "model": {"lookback": 16}}
    history = [{"epoch": 1, "train_loss": 0.5}]
    data = encode_checkpoint(model.bank, model.gate, run_config, history)
    assert data[:8] == MAGIC

    loaded = decode_checkpoint(data)
    assert loaded.metadata.run_config == run_config
    assert loaded.metadata.history == history
    assert encode_checkpoint(loaded.bank, loaded.gate, run_config, history) == data


def test_saved_model_forecasts_identically(model, rng, tmp_path):
    path = tmp_path / "model.ckpt"
    digest = save_model(path, model)
    assert digest == file_sha256(path)
    assert not (tmp_path / "model.ckpt.tmp").exists()

    restored = load_model(path)
    assert restored.expert_names() == model.expert_names()
    assert restored.top_k == model.top_k
    assert restored.gate.noise_std == model.gate.noise_std
    assert [e.frozen for e in restored.bank.learnable()] == [e.frozen for e in model.bank.learnable()]
    X = rng.normal(size=(10, model.lookback))
    np.testing.assert_array_equal(restored.predict(X), model.predict(X))

    assert save_model(tmp_path / "again.ckpt", restored) == digest


def test_experts_only_checkpoint(make_expert, rng, tmp_path):
    bank = ExpertBank(frequency_experts=[make_expert(rng, 8, 2, 1 / 24)], include_naive=False, include_mean=False, lookback=8, horizon=2)
    save_checkpoint(tmp_path / "expert.ckpt", bank)
    loaded = load_checkpoint(tmp_path / "expert.ckpt")
    assert loaded.gate is None
    assert loaded.metadata.frequency_table == [1 / 24]
    np.testing.assert_array_equal(loaded.bank.frequency_experts[0].weight, bank.frequency_experts[0].weight)
    with pytest.raises(IntegrityError):
        loaded.model()


@pytest.mark.parametrize("cut", [1, 9, 200])
def test_truncated_checkpoint_is_rejected(model, cut):
    data = encode_checkpoint(model.bank, model.gate)
    with pytest.raises(IntegrityError):
        decode_checkpoint(data[:-cut])


def test_tiny_file_is_rejected():
    with pytest.raises(IntegrityError) as error:
        decode_checkpoint(MAGIC)
    assert error.value.offset == len(MAGIC)


def test_corrupt_array_bytes_are_rejected(model):
    data = bytearray(encode_checkpoint(model.bank, model.gate))
    data[-20] ^= 0xFF
    with pytest.raises(IntegrityError) as error:
        decode_checkpoint(bytes(data))
    assert error.value.offset == len(data) - 4


def test_bad_magic(model):
    data = b"NOTACKPT" + encode_checkpoint(model.bank, model.gate)[8:]
    with pytest.raises(IntegrityError) as error:
        decode_checkpoint(data)
    assert error.value.offset == 0


def test_version_is_checked_at_offset_eight(model):
    data = bytearray(encode_checkpoint(model.bank, model.gate))
    assert struct.unpack_from("<H", data, 8) == (1,)
    struct.pack_into("<H", data, 8, 2)
    with pytest.raises(VersionError) as error:
        decode_checkpoint(bytes(data))
    assert error.value.offset == 8
    assert error.value.exit_code == 4


def test_missing_checkpoint(tmp_path):
    with pytest.raises(IntegrityError):
        load_checkpoint(tmp_path / "absent.ckpt")


def test_pretraining_model_has_the_published_size(rng):
    assert ZS_MODEL.analytic_parameter_count() == 2_540_703
    table = ZS_MODEL.frequency_table()
    experts = [LinearExpert.zeros(ZS_MODEL.lookback, ZS_MODEL.horizon, f) for f in table]
    complementary = complementary_init(ZS_MODEL.num_complementary, ZS_MODEL.lookback, ZS_MODEL.horizon, seed=1)
    model = assemble_forecaster(ZS_MODEL, experts, complementary, rng)
    assert model.bank.size == 51
    assert model.parameter_count() == ZS_MODEL.analytic_parameter_count()
    assert abs(model.parameter_count() - 2_540_703) <= 0.05 * 2_540_703
