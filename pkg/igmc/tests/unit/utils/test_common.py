import json

import numpy as np
import pytest

from igmc.core.exceptions import InputError, ParseError
from igmc.utils.common import (batch_slices, config_hash, convert_numpy_to_builtin, derive_rng,
                               read_flat_config, write_json)


class TestDeriveRng:
    """Tests for keyed random streams."""

    def test_same_keys_same_stream(self):
        np.testing.assert_array_equal(derive_rng(5, 3, 1).random(4), derive_rng(5, 3, 1).random(4))

    def test_different_keys_differ(self):
        assert not np.array_equal(derive_rng(5, 3, 1).random(4), derive_rng(5, 3, 2).random(4))
        assert not np.array_equal(derive_rng(5, 3).random(4), derive_rng(6, 3).random(4))


class TestConversions:
    """Tests for JSON helpers."""

    def test_convert_numpy_to_builtin(self):
        data = {"a": np.int64(3), "b": [np.float64(0.5), np.arange(2)], "c": (1, "x")}
        assert convert_numpy_to_builtin(data) == {"a": 3, "b": [0.5, [0, 1]], "c": [1, "x"]}

    def test_config_hash_is_stable_and_order_free(self):
        assert config_hash({"a": 1, "b": 2}) == config_hash({"b": 2, "a": 1})
        assert config_hash({"a": 1}) != config_hash({"a": 2})
        assert len(config_hash({})) == 12

    def test_write_json(self, tmp_path):
        path = tmp_path / "out.json"
        write_json(path, {"rmse": np.float64(0.9)})
        assert json.loads(path.read_text(encoding="utf-8")) == {"rmse": 0.9}


class TestBatchSlices:
    """Tests for minibatch slicing."""

    def test_covers_range(self):
        assert list(batch_slices(5, 2)) == [slice(0, 2), slice(2, 4), slice(4, 5)]

    def test_empty(self):
        assert list(batch_slices(0, 3)) == []


class TestReadFlatConfig:
    """Tests for key=value files."""

    def test_parses_and_normalizes_keys(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("# comment\nepochs = 3\n\nlayer-dims=8,8\n", encoding="utf-8")
        assert read_flat_config(path) == {"epochs": "3", "layer_dims": "8,8"}

    def test_missing_equals(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("epochs 3\n", encoding="utf-8")
        with pytest.raises(ParseError) as exc_info:
            read_flat_config(path)
        assert exc_info.value.line_number == 1

    def test_missing_file(self, tmp_path):
        with pytest.raises(InputError):
            read_flat_config(tmp_path / "nope.cfg")
