import json

import numpy as np
import pandas as pd
import pytest

from app.cli import get_parser
from app.cli.checkpoint import file_sha256, load_checkpoint
from app.cli.options import build_run_config, default_split
from app.cli.schemas.run import MANIFEST_FILE, RUN_CONFIG_FILE, TRAINING_LOG_FILE, ExpertManifest, ManifestEntry
from app.common import config as config_module
from app.common.enums import Command, TrainingMode
from app.common.errors import ConfigError
from app.data.schemas import ETT_SPLIT, LTSF_SPLIT, PRETRAIN_SPLIT, SplitSpec
from app.data.synthetic import tone
from app.training.corpus import FrequencyPool
from main import main

TINY_MODEL = ["--lookback", "16", "--horizon", "4", "--spectrum-size", "16"]
TINY_TRAIN = ["--epochs", "1", "--patience", "1", "--batch-size", "32", "--seed", "3"]


@pytest.fixture
def fresh_settings(monkeypatch):
    monkeypatch.setattr(config_module, "_settings", None)
    return monkeypatch


def write_series(path, period, length=300, columns=("x", "y")):
    frame = pd.DataFrame({"date": np.arange(length)})
    for i, column in enumerate(columns):
        frame[column] = tone(length, period, amplitude=1.0 + i, phase=0.7 * i, offset=i)
    frame.to_csv(path, index=False)
    return path


@pytest.fixture
def corpus(tmp_path):
    a = write_series(tmp_path / "a.csv", 8)
    b = write_series(tmp_path / "b.csv", 4)
    metadata = tmp_path / "metadata.json"
    metadata.write_text(json.dumps([
        {"name": "a", "dominant_frequency": "1/8", "sampling_rate_label": "hourly"},
        {"name": "b", "dominant_frequency": "1/4"},
    ]))
    return {"a": str(a), "b": str(b), "metadata": str(metadata)}


def parse(argv):
    return get_parser().parse_args(argv)


def test_flags_override_file_which_overrides_environment(tmp_path, fresh_settings):
    fresh_settings.setenv("SPECTRAL_MOE_SEED", "5")
    config_file = tmp_path / "run.json"
    config_file.write_text(json.dumps({
        "model": {"lookback": 64, "horizon": 8, "spectrum_size": 64},
        "train": {"epochs": 7, "patience": 2},
        "seed": 11,
    }))
    run = build_run_config(parse(["train-experts", "--config", str(config_file), "--epochs", "9"]), Command.TRAIN_EXPERTS)
    assert run.model.lookback == 64
    assert run.train.epochs == 9
    assert run.train.patience == 2
    assert run.seed == 11
    assert run.train.seed == 11

    run = build_run_config(parse(["train-experts"]), Command.TRAIN_EXPERTS)
    assert run.seed == 5
    assert run.train.seed == 5
    assert run.model.lookback == 512


def test_full_shot_mode_uses_its_preset(fresh_settings):
    run = build_run_config(parse(["train-router", "--mode", "fs", "--no-naive-mean"]), Command.TRAIN_ROUTER)
    assert run.mode == TrainingMode.FULL_SHOT
    assert run.model.num_complementary == 10
    assert run.train.learning_rate == 0.05
    assert run.train.k_sweep == [6, 8, 10, 12, 20]
    assert not run.model.include_naive and not run.model.include_mean


def test_invalid_configuration_is_a_config_error(tmp_path, fresh_settings):
    with pytest.raises(ConfigError):
        build_run_config(parse(["train-experts", "--lookback", "64", "--spectrum-size", "8"]), Command.TRAIN_EXPERTS)
    with pytest.raises(ConfigError):
        build_run_config(parse(["train-experts", "--config", str(tmp_path / "absent.json")]), Command.TRAIN_EXPERTS)
    with pytest.raises(ConfigError):
        build_run_config(parse(["train-experts", "--data", str(tmp_path / "absent.csv")]), Command.TRAIN_EXPERTS)


def test_default_split():
    assert default_split("ETTm2") == ETT_SPLIT
    assert default_split("weather") == LTSF_SPLIT


def test_manifest_upsert_keeps_one_entry_per_frequency():
    manifest = ExpertManifest(lookback=16, horizon=4, seed=1)
    manifest.upsert(ManifestEntry(label="1/4", frequency=0.25, file="a", sha256="0"))
    manifest.upsert(ManifestEntry(label="1/8", frequency=0.125, file="b", sha256="1"))
    manifest.upsert(ManifestEntry(label="1/4", frequency=0.25, file="c", sha256="2"))
    assert [e.file for e in manifest.entries] == ["b", "c"]
    assert manifest.find(0.25).sha256 == "2"
    assert manifest.find(0.5) is None


def test_two_stage_pipeline_end_to_end(tmp_path, corpus, fresh_settings, capsys):
    experts_dir = tmp_path / "experts"
    data = ["--data", corpus["a"], "--data", corpus["b"], "--metadata", corpus["metadata"]]

    argv = ["train-experts", *data, *TINY_MODEL, *TINY_TRAIN, "--freqs", "1/8,1/4", "--output", str(experts_dir)]
    assert main(argv) == 0
    manifest = ExpertManifest.model_validate_json((experts_dir / MANIFEST_FILE).read_text())
    assert [e.label for e in manifest.entries] == ["1/8", "1/4"]
    hashes = {e.file: file_sha256(experts_dir / e.file) for e in manifest.entries}
    assert (experts_dir / TRAINING_LOG_FILE).exists()
    assert (experts_dir / RUN_CONFIG_FILE).exists()

    # Resuming with every expert present retrains nothing
    assert main(argv) == 0
    assert {e.file: file_sha256(experts_dir / e.file) for e in manifest.entries} == hashes

    router_dir = tmp_path / "router"
    argv = ["train-router", *data, *TINY_MODEL, *TINY_TRAIN, "--experts", str(experts_dir),
            "--num-comp", "1", "--top-k", "2", "--output", str(router_dir)]
    assert main(argv) == 0
    checkpoint = router_dir / "model.ckpt"
    loaded = load_checkpoint(checkpoint)
    assert loaded.bank.expert_names() == ["freq_8", "freq_4", "comp_0", "naive", "mean"]
    assert all(e.frozen for e in loaded.bank.frequency_experts)
    assert loaded.metadata.run_config["seed"] == 3

    forecast_dir = tmp_path / "forecast"
    assert main(["forecast", "--checkpoint", str(checkpoint), "--data", corpus["a"], "--horizon", "10",
                 "--output", str(forecast_dir)]) == 0
    forecast = pd.read_csv(forecast_dir / "forecast_a.csv")
    assert list(forecast.columns) == ["step", "x", "y"]
    assert forecast["step"].tolist() == list(range(1, 11))

    eval_dir = tmp_path / "eval"
    assert main(["evaluate", "--checkpoint", str(checkpoint), "--data", corpus["a"], "--horizons", "4,8",
                 "--metric", "mse", "--metric", "mase", "--output", str(eval_dir)]) == 0
    report = pd.read_csv(eval_dir / "eval.csv")
    assert set(report["metric"]) == {"mse", "mase"}
    assert (eval_dir / "expert_histogram.csv").exists()

    analyze_dir = tmp_path / "analyze"
    assert main(["analyze", "--checkpoint", str(checkpoint), "--data", corpus["b"], "--params", "--histogram",
                 "--periodogram", *TINY_MODEL, "--output", str(analyze_dir)]) == 0
    histogram = pd.read_csv(analyze_dir / "expert_histogram.csv")
    assert len(histogram) == 5
    periodogram = pd.read_csv(analyze_dir / "periodogram.csv")
    assert len(periodogram) == 2 * 16
    assert "total:" in capsys.readouterr().out


def test_parameter_count_of_the_default_architecture(fresh_settings, tmp_path, capsys):
    assert main(["analyze", "--params", "--output", str(tmp_path)]) == 0
    assert "total: 2,540,703" in capsys.readouterr().out


def test_exit_codes(tmp_path, corpus, fresh_settings):
    assert main(["analyze", "--output", str(tmp_path)]) == 2
    assert main(["forecast", "--checkpoint", str(tmp_path / "absent.ckpt"), "--data", corpus["a"]]) == 2

    bad_checkpoint = tmp_path / "bad.ckpt"
    bad_checkpoint.write_bytes(b"\x00" * 64)
    assert main(["forecast", "--checkpoint", str(bad_checkpoint), "--data", corpus["a"], "--output", str(tmp_path)]) == 4

    bad_csv = tmp_path / "bad.csv"
    bad_csv.write_text("date,x\n1,1.0\n2,abc\n")
    assert main(["analyze", "--periodogram", "--data", str(bad_csv), "--output", str(tmp_path)]) == 3
    assert main(["train-experts", "--split", "0.5,0.5", "--output", str(tmp_path)]) == 2

    with pytest.raises(SystemExit):
        main(["no-such-command"])


def test_same_seed_and_corpus_give_identical_artifacts(tmp_path, corpus, fresh_settings):
    data = ["--data", corpus["a"], "--data", corpus["b"], "--metadata", corpus["metadata"]]
    digests = []
    for run in ("first", "second"):
        experts_dir = tmp_path / run / "experts"
        router_dir = tmp_path / run / "router"
        assert main(["train-experts", *data, *TINY_MODEL, *TINY_TRAIN, "--freqs", "1/8,1/4", "--threads", "1",
                     "--output", str(experts_dir)]) == 0
        assert main(["train-router", *data, *TINY_MODEL, *TINY_TRAIN, "--experts", str(experts_dir),
                     "--num-comp", "1", "--top-k", "2", "--threads", "1", "--output", str(router_dir)]) == 0
        manifest = ExpertManifest.model_validate_json((experts_dir / MANIFEST_FILE).read_text())
        files = {e.file: file_sha256(experts_dir / e.file) for e in manifest.entries}
        files["manifest"] = file_sha256(experts_dir / MANIFEST_FILE)
        files["model"] = file_sha256(router_dir / "model.ckpt")
        digests.append(files)

    assert len(digests[0]) == 4
    assert digests[0] == digests[1]


def test_train_experts_honours_the_split_flag(tmp_path, corpus, fresh_settings, monkeypatch):
    splits = []
    build = FrequencyPool.build

    def recording_build(*args, **kwargs):
        splits.append(kwargs["split"])
        return build(*args, **kwargs)

    monkeypatch.setattr(FrequencyPool, "build", recording_build)
    data = ["--data", corpus["a"], "--metadata", corpus["metadata"]]
    base = ["train-experts", *data, *TINY_MODEL, *TINY_TRAIN, "--freqs", "1/8"]
    assert main([*base, "--split", "0.5,0.5,0", "--output", str(tmp_path / "half")]) == 0
    assert main([*base, "--output", str(tmp_path / "default")]) == 0
    assert splits == [SplitSpec(train_frac=0.5, val_frac=0.5, test_frac=0.0), PRETRAIN_SPLIT]


def test_star_import_exposes_the_parser_factory():
    namespace = {}
    exec("from app.cli import *", namespace)
    assert namespace["get_parser"] is get_parser
