import json
import logging

import numpy as np
import pandas as pd
import pytest

from app.common.enums import MissingPolicy
from app.common.errors import ConfigError, DataError, EmptyDatasetError, ParseError
from app.data.schemas import CsvSchema, SplitSpec, parse_frequency
from app.data.series import (
    Dataset,
    attach_metadata,
    cap_total,
    chronological_split,
    load_csv,
    load_metadata,
    make_windows,
    prepend_context,
    standardize,
)


def write_frame(path, frame):
    frame.to_csv(path, index=False)
    return path


def test_load_csv_one_channel_per_column(tmp_path, rng):
    frame = pd.DataFrame({
        "date": pd.date_range("2020-01-01", periods=100, freq="h").astype(str),
        "a": rng.normal(size=100),
        "b": rng.normal(size=100),
        "c": rng.normal(size=100),
    })
    dataset = load_csv(write_frame(tmp_path / "three.csv", frame))

    assert dataset.name == "three"
    assert dataset.channel_names == ["a", "b", "c"]
    assert dataset.lengths() == [100, 100, 100]
    np.testing.assert_allclose(dataset.channels[1], frame["b"].to_numpy())


def test_load_csv_selected_columns(tmp_path):
    frame = pd.DataFrame({"a": [1.0, 2.0], "b": [3.0, 4.0]})
    dataset = load_csv(write_frame(tmp_path / "sel.csv", frame), CsvSchema(columns=["b"]))
    assert dataset.channel_names == ["b"]
    with pytest.raises(DataError):
        load_csv(tmp_path / "sel.csv", CsvSchema(columns=["missing"]))


def test_load_csv_bad_cell_names_line_and_column(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("date,x,y\n1,1.0,2.0\n2,oops,3.0\n3,4.0,5.0\n")
    with pytest.raises(ParseError) as error:
        load_csv(path)
    assert error.value.line == 3
    assert error.value.column == "x"


def test_load_csv_empty_file(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("")
    with pytest.raises(EmptyDatasetError):
        load_csv(path)


def test_load_csv_missing_values(tmp_path):
    path = tmp_path / "gaps.csv"
    path.write_text("x,y\n1,10\n,11\nnan,12\n4,13\n")

    filled = load_csv(path)
    np.testing.assert_array_equal(filled.channels[0], [1, 1, 1, 4])
    assert filled.missing_count == 2

    dropped = load_csv(path, CsvSchema(missing_policy=MissingPolicy.DROP_ROW))
    np.testing.assert_array_equal(dropped.channels[1], [10, 13])


def test_split_lengths():
    dataset = Dataset(name="d", channels=[np.arange(10.0)])
    train, val, test = chronological_split(dataset, SplitSpec(train_frac=0.6, val_frac=0.2, test_frac=0.2))
    assert (len(train.channels[0]), len(val.channels[0]), len(test.channels[0])) == (6, 2, 2)

    dataset = Dataset(name="d", channels=[np.arange(20.0)])
    train, val, test = chronological_split(dataset, SplitSpec(train_frac=0.7, val_frac=0.1, test_frac=0.2))
    assert (len(train.channels[0]), len(val.channels[0]), len(test.channels[0])) == (14, 2, 4)


def test_split_is_a_partition(rng):
    channel = rng.normal(size=137)
    parts = chronological_split(Dataset(name="d", channels=[channel]), SplitSpec.parse("0.7,0.1,0.2"))
    np.testing.assert_array_equal(np.concatenate([p.channels[0] for p in parts]), channel)


def test_split_fractions_must_sum_to_one():
    with pytest.raises(ConfigError):
        SplitSpec(train_frac=0.5, val_frac=0.5, test_frac=0.1)
    with pytest.raises(ConfigError):
        SplitSpec.parse("0.5,0.5")


def test_standardize_uses_train_statistics():
    train = Dataset(name="d", channels=[np.array([2.0, 4.0, 6.0])])
    val = Dataset(name="d", channels=[np.array([4.0, 10.0])])
    scaler, (train_std, val_std) = standardize(train, [val])

    assert scaler.mean[0] == 4.0
    assert abs(train_std.channels[0].mean()) < 1e-12
    assert val_std.channels[0][0] == 0.0


def test_standardize_constant_channel(caplog):
    train = Dataset(name="flat", channels=[np.array([5.0, 5.0, 5.0])])
    with caplog.at_level(logging.WARNING):
        scaler, (train_std,) = standardize(train)
    np.testing.assert_array_equal(train_std.channels[0], [0.0, 0.0, 0.0])
    assert scaler.std[0] == 1.0
    assert "constant" in caplog.text


def test_standardize_round_trip(rng):
    train = Dataset(name="d", channels=[rng.normal(3.0, 2.0, size=50), rng.normal(-1.0, 0.5, size=50)])
    scaler, (standardized,) = standardize(train)
    restored = scaler.inverse_transform(standardized)
    for original, back in zip(train.channels, restored.channels):
        np.testing.assert_allclose(back, original, atol=1e-12)


def test_make_windows_counts_and_slices():
    dataset = Dataset(name="d", channels=[np.arange(8.0), np.arange(100.0, 105.0)])
    windows = make_windows(dataset, 4, 2)

    # the length-5 channel is shorter than L + H and contributes nothing
    assert len(windows) == 3
    np.testing.assert_array_equal(windows.inputs[1], [1, 2, 3, 4])
    np.testing.assert_array_equal(windows.targets[2], [6, 7])
    np.testing.assert_array_equal(windows.start_offset, [0, 1, 2])


def test_make_windows_stride_and_order(rng):
    dataset = Dataset(name="d", channels=[rng.normal(size=30), rng.normal(size=30)])
    windows = make_windows(dataset, 5, 3, stride=4)

    assert list(windows.source_channel) == [0] * 6 + [1] * 6
    for row, channel, start in zip(windows.windows, windows.source_channel, windows.start_offset):
        np.testing.assert_array_equal(row, dataset.channels[channel][start : start + 8])


def test_make_windows_cap_is_seeded():
    dataset = Dataset(name="d", channels=[np.arange(105.0)])
    first = make_windows(dataset, 4, 2, cap=5, rng=np.random.default_rng(3))
    second = make_windows(dataset, 4, 2, cap=5, rng=np.random.default_rng(3))

    assert len(first) == 5
    np.testing.assert_array_equal(first.windows, second.windows)
    assert np.all(np.diff(first.start_offset) > 0)
    with pytest.raises(ConfigError):
        make_windows(dataset, 4, 2, cap=5)


def test_make_windows_geometry_errors():
    dataset = Dataset(name="d", channels=[np.arange(10.0)])
    with pytest.raises(ConfigError):
        make_windows(dataset, 0, 2)
    with pytest.raises(ConfigError):
        make_windows(dataset, 4, 2, stride=0)


def test_cap_total():
    windows = make_windows(Dataset(name="d", channels=[np.arange(50.0)]), 4, 2)
    assert len(cap_total(windows, None, np.random.default_rng(0))) == 45
    assert len(cap_total(windows, 10, np.random.default_rng(0))) == 10


def test_prepend_context():
    previous = Dataset(name="d", channels=[np.arange(10.0)])
    current = Dataset(name="d", channels=[np.arange(10.0, 14.0)])
    joined = prepend_context(previous, current, 3)
    np.testing.assert_array_equal(joined.channels[0], [7, 8, 9, 10, 11, 12, 13])

    windows = make_windows(joined, 3, 1)
    np.testing.assert_array_equal(windows.targets[:, 0], [10, 11, 12, 13])


def test_metadata_sidecar(tmp_path):
    path = tmp_path / "meta.json"
    path.write_text(json.dumps([
        {"name": "hourly", "sampling_rate_label": "hourly", "dominant_frequency": "1/24"},
        {"name": "plain"},
    ]))
    metadata = load_metadata(path)

    assert metadata["hourly"].dominant_frequency == 1 / 24
    labelled = attach_metadata(Dataset(name="hourly", channels=[np.zeros(3)]), metadata)
    assert labelled.sampling_rate_label == "hourly"
    assert labelled.dominant_frequency == 1 / 24
    untouched = attach_metadata(Dataset(name="other", channels=[np.zeros(3)]), metadata)
    assert untouched.dominant_frequency is None


def test_metadata_rejects_out_of_range_frequency(tmp_path):
    path = tmp_path / "meta.json"
    path.write_text(json.dumps([{"name": "x", "dominant_frequency": "3/4"}]))
    with pytest.raises(DataError):
        load_metadata(path)


def test_parse_frequency():
    assert parse_frequency("1/24") == 1 / 24
    assert parse_frequency(0.25) == 0.25
    assert parse_frequency(" 0.5 ") == 0.5
    with pytest.raises(ValueError):
        parse_frequency("one/24")
