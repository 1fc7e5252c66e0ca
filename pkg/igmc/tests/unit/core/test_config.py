import logging

import numpy as np
import pytest
from pydantic import ValidationError

from igmc.core.config import Settings
from igmc.core.exceptions import (ContractError, DataError, DimensionError, GraphIndexError, IGMCError,
                                  NumericalError, ParseError, ScaleError, UsageError, raise_argument_error,
                                  raise_contract_error, raise_dimension_error, raise_parse_error)
from igmc.core.logging_setup import LOG_FORMAT, setup_logging


class TestSettings:
    """Tests for process-wide settings."""

    def test_defaults(self):
        config = Settings(_env_file=None)
        assert config.FLOAT_DTYPE == "float64"
        assert config.dtype == np.float64
        assert config.WORKERS == 1

    @pytest.mark.parametrize("raw,expected", [("float32", "float32"), ("f4", "float32"), ("DOUBLE", "float64")])
    def test_float_dtype_is_normalized(self, raw, expected):
        assert Settings(_env_file=None, FLOAT_DTYPE=raw).FLOAT_DTYPE == expected

    def test_unknown_float_dtype_is_rejected(self):
        with pytest.raises(ValidationError):
            Settings(_env_file=None, FLOAT_DTYPE="float16")

    def test_environment_override(self, monkeypatch):
        monkeypatch.setenv("WORKERS", "3")
        assert Settings(_env_file=None).WORKERS == 3

    def test_workers_must_be_positive(self):
        with pytest.raises(ValidationError):
            Settings(_env_file=None, WORKERS=0)


class TestExceptions:
    """Tests for the error hierarchy and raise helpers."""

    @pytest.mark.parametrize("error,code", [
        (UsageError("x"), 1), (DataError("x"), 2), (ParseError("x"), 2), (ScaleError("x"), 2),
        (GraphIndexError("x"), 2), (ContractError("x"), 2), (NumericalError("x"), 3),
    ])
    def test_exit_codes(self, error, code):
        assert isinstance(error, IGMCError)
        assert error.exit_code == code

    def test_graph_index_error_is_an_index_error(self):
        assert isinstance(GraphIndexError("x"), IndexError)

    def test_raise_parse_error_keeps_line_number(self):
        with pytest.raises(ParseError) as exc_info:
            raise_parse_error("ratings.tsv", 7, "bad record")
        assert exc_info.value.line_number == 7
        assert "ratings.tsv:7" in exc_info.value.detail

    def test_raise_dimension_error_names_both_shapes(self):
        with pytest.raises(DimensionError) as exc_info:
            raise_dimension_error("matmul", (2, 3), (4, 5))
        assert "(2, 3)" in str(exc_info.value) and "(4, 5)" in str(exc_info.value)

    def test_raise_contract_error(self):
        with pytest.raises(ContractError, match="broken"):
            raise_contract_error("broken")

    def test_raise_argument_error_is_a_usage_error(self):
        with pytest.raises(UsageError, match="keep_fraction"):
            raise_argument_error("keep_fraction", 1.5, "a value in (0, 1]")

    def test_scale_error_lists_offenders(self):
        assert ScaleError("x", offenders=[6.0, 7.0]).offenders == [6.0, 7.0]


class TestLogging:
    """Tests for logging setup."""

    def test_setup_logging_writes_file(self, tmp_path):
        config = Settings(_env_file=None, LOG_FILE=str(tmp_path / "run.log"), LOG_LEVEL="DEBUG")
        setup_logging(config)
        logging.getLogger("igmc.test").info("hello")
        for handler in logging.getLogger().handlers:
            handler.flush()
        assert "igmc.test: hello" in (tmp_path / "run.log").read_text(encoding="utf-8")
        assert "%(name)s" in LOG_FORMAT

    def test_setup_logging_without_file(self):
        setup_logging(Settings(_env_file=None, LOG_FILE=""))
        assert not any(isinstance(h, logging.FileHandler) for h in logging.getLogger().handlers)

    def test_default_writes_no_file(self, monkeypatch, tmp_path):
        monkeypatch.delenv("LOG_FILE", raising=False)
        monkeypatch.chdir(tmp_path)
        config = Settings(_env_file=None)
        assert config.LOG_FILE is None
        setup_logging(config)
        logging.getLogger("igmc.test").info("hello")
        assert not any(isinstance(h, logging.FileHandler) for h in logging.getLogger().handlers)
        assert list(tmp_path.iterdir()) == []
