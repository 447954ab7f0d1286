"""
Tests for utils module
"""

import csv
import json
import math

import numpy as np
import pytest

from canaryaudit.exceptions import InvalidInputError, StatMatrixParseError
from canaryaudit.utils import (
    derive_seed,
    ensure_directory,
    read_stat_matrix,
    trial_seed,
    validate_probability,
    write_canaries,
    write_json,
    write_rows,
    write_stat_matrix,
)


class TestSeeds:

    def test_same_keys_same_stream(self):
        """Test seeds depend only on (master, keys)"""
        a = np.random.default_rng(derive_seed(3, 0, 5, 1)).random(4)
        b = np.random.default_rng(derive_seed(3, 0, 5, 1)).random(4)
        assert np.array_equal(a, b)

    def test_roles_are_independent_streams(self):
        draws = {
            role: np.random.default_rng(trial_seed(1, "report", 0, role)).random()
            for role in ("canaries", "mech0", "mech1")
        }
        assert len(set(draws.values())) == 3

    def test_phases_differ(self):
        report = np.random.default_rng(trial_seed(1, "report", 2, "mech1")).random()
        holdout = np.random.default_rng(trial_seed(1, "holdout", 2, "mech1")).random()
        assert report != holdout

    def test_negative_keys(self):
        with pytest.raises(InvalidInputError):
            derive_seed(-1, 0)
        with pytest.raises(InvalidInputError):
            derive_seed(1, -2)


class TestValidateProbability:

    def test_open_interval(self):
        assert validate_probability("beta", 0.05) == 0.05
        with pytest.raises(InvalidInputError, match="beta must be in \\(0, 1\\)"):
            validate_probability("beta", 0.0)

    def test_closed_interval(self):
        assert validate_probability("delta", 0.0, open_interval=False) == 0.0
        with pytest.raises(InvalidInputError):
            validate_probability("delta", 1.5, open_interval=False)


class TestFiles:

    def test_ensure_directory(self, tmp_path):
        """Test nested directories are created and returned"""
        path = ensure_directory(tmp_path / "a" / "b")
        assert path.is_dir()
        assert ensure_directory(path) == path

    def test_stat_matrix_file_format(self, tmp_path, sample_matrix):
        path = tmp_path / "stats.csv"
        write_stat_matrix(path, sample_matrix)
        assert path.read_text().splitlines() == [
            "trial,c1,c2,c3,c4",
            "0,1,1,0,1",
            "1,0,0,0,0",
        ]
        assert np.array_equal(read_stat_matrix(path), sample_matrix)

    @pytest.mark.parametrize(
        "content,message",
        [
            ("", "header"),
            ("row,c1\n0,1\n", "header"),
            ("trial,c1,c2\n0,1\n", "row 1"),
            ("trial,c1,c2\n0,1,0\n1,0,x\n", "row 2"),
            ("trial,c1\n", "no trials"),
        ],
    )
    def test_malformed_stat_matrix(self, tmp_path, content, message):
        path = tmp_path / "stats.csv"
        path.write_text(content)
        with pytest.raises(StatMatrixParseError, match=message):
            read_stat_matrix(path)

    def test_undecodable_stat_matrix(self, tmp_path):
        path = tmp_path / "latin1_stats.csv"
        path.write_bytes(b"trial,c1\n0,\xff\n")
        with pytest.raises(StatMatrixParseError, match="latin1_stats.csv") as exc:
            read_stat_matrix(path)
        assert "UTF-8" in str(exc.value)
        assert isinstance(exc.value.__cause__, UnicodeDecodeError)

    def test_blank_lines_are_skipped(self, tmp_path):
        path = tmp_path / "stats.csv"
        path.write_text("trial,c1\n0,1\n\n1,0\n")
        assert read_stat_matrix(path).tolist() == [[1], [0]]

    def test_write_canaries(self, tmp_path):
        path = tmp_path / "canaries.csv"
        write_canaries(path, np.eye(2), np.array([[0.6, 0.8]]))
        with open(path, encoding="utf-8") as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["role", "index", "v1", "v2"]
        assert rows[1] == ["train", "0", "1.0", "0.0"]
        assert rows[3] == ["null", "0", "0.6", "0.8"]

    def test_write_json(self, tmp_path):
        path = tmp_path / "report.json"
        write_json(path, {"eps_hat": 1.5, "name": "wilson2"})
        text = path.read_text()
        assert text.endswith("\n")
        assert json.loads(text) == {"eps_hat": 1.5, "name": "wilson2"}

    def test_write_rows(self, tmp_path):
        """Test missing values and infinities in CSV rows"""
        path = tmp_path / "results.csv"
        rows = [
            {"k": 1, "eps_hat": math.inf, "corr2": None},
            {"k": 4, "eps_hat": 0.5, "corr2": 0.01, "ignored": "x"},
        ]
        write_rows(path, rows, ["k", "eps_hat", "corr2"])
        assert path.read_text().splitlines() == [
            "k,eps_hat,corr2",
            "1,inf,",
            "4,0.5,0.01",
        ]
