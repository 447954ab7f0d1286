"""
Utility functions for canaryaudit
"""

import csv
import json
import math
from pathlib import Path
from typing import Any, Dict, Iterable, Sequence, Union

import numpy as np

from .exceptions import InvalidInputError, StatMatrixParseError

PathLike = Union[str, Path]

# Stable integer ids for the independent random streams of a trial
SEED_ROLES = {"canaries": 0, "mech0": 1, "mech1": 2}
SEED_PHASES = {"report": 0, "holdout": 1}


def derive_seed(master: int, *keys: int) -> np.random.SeedSequence:
    """
    Derive an independent seed sequence for (master, *keys).

    Args:
        master: Master seed of the audit
        keys: Non-negative integers identifying the stream

    Returns:
        SeedSequence whose state depends only on the arguments
    """
    if master < 0 or any(k < 0 for k in keys):
        raise InvalidInputError("seeds and seed keys must be non-negative")
    return np.random.SeedSequence(master, spawn_key=tuple(keys))


def trial_seed(
    master: int, phase: str, trial_index: int, role: str
) -> np.random.SeedSequence:
    """Seed for one role of one trial: h(master, phase, trial, role)."""
    return derive_seed(master, SEED_PHASES[phase], trial_index, SEED_ROLES[role])


def validate_probability(name: str, value: float, open_interval: bool = True) -> float:
    """
    Validate that a value is a probability.

    Args:
        name: Parameter name used in the error message
        value: Value to check
        open_interval: Require (0, 1) instead of [0, 1]

    Returns:
        The value as float

    Raises:
        InvalidInputError: If the value is out of range
    """
    value = float(value)
    if open_interval and not 0.0 < value < 1.0:
        raise InvalidInputError(f"{name} must be in (0, 1), got {value}")
    if not open_interval and not 0.0 <= value <= 1.0:
        raise InvalidInputError(f"{name} must be in [0, 1], got {value}")
    return value


def ensure_directory(path: PathLike) -> Path:
    """
    Ensure directory exists, create if necessary.

    Args:
        path: Directory path
    """
    directory = Path(path)
    directory.mkdir(parents=True, exist_ok=True)
    return directory


def write_stat_matrix(path: PathLike, rows: np.ndarray) -> None:
    """
    Write a binary statistics matrix as CSV with header trial,c1,...,cK.

    Args:
        path: Output file
        rows: n x K array of 0/1 entries
    """
    rows = np.asarray(rows)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["trial"] + [f"c{j + 1}" for j in range(rows.shape[1])])
        for i, row in enumerate(rows):
            writer.writerow([i] + [int(v) for v in row])


def read_stat_matrix(path: PathLike) -> np.ndarray:
    """
    Read a statistics matrix written by write_stat_matrix.

    Args:
        path: CSV file

    Returns:
        n x K uint8 array

    Raises:
        StatMatrixParseError: On undecodable bytes, a malformed header, a
            ragged row or a non-binary entry
    """
    try:
        return _parse_stat_matrix(path)
    except UnicodeDecodeError as e:
        raise StatMatrixParseError(
            f"{path}: not valid UTF-8 (byte {e.start})"
        ) from e


def _parse_stat_matrix(path: PathLike) -> np.ndarray:
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if not header or header[0] != "trial" or len(header) < 2:
            raise StatMatrixParseError(
                f"{path}: expected header 'trial,c1,...,cK'"
            )
        k = len(header) - 1
        rows = []
        for row_number, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != k + 1:
                raise StatMatrixParseError(
                    f"{path}: row {row_number} has {len(row) - 1} entries, "
                    f"expected {k}"
                )
            cells = [cell.strip() for cell in row[1:]]
            if any(cell not in ("0", "1") for cell in cells):
                raise StatMatrixParseError(
                    f"{path}: row {row_number} contains a non-binary entry"
                )
            rows.append([int(cell) for cell in cells])
    if not rows:
        raise StatMatrixParseError(f"{path}: no trials found")
    return np.array(rows, dtype=np.uint8)


def write_canaries(path: PathLike, training: np.ndarray, null: np.ndarray) -> None:
    """Dump one trial's canaries as CSV, one row per canary."""
    d = training.shape[1]
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["role", "index"] + [f"v{j + 1}" for j in range(d)])
        for role, block in (("train", training), ("null", null)):
            for i, vector in enumerate(block):
                writer.writerow([role, i] + [repr(float(v)) for v in vector])


def write_json(path: PathLike, payload: Dict[str, Any], indent: int = 2) -> None:
    """Write a JSON document with a trailing newline."""
    with open(path, "w", encoding="utf-8") as f:
        f.write(json.dumps(payload, indent=indent, ensure_ascii=False))
        f.write("\n")


def write_rows(
    path: PathLike, rows: Iterable[Dict[str, Any]], columns: Sequence[str]
) -> None:
    """Write dict rows as CSV; None becomes an empty cell, inf the string "inf"."""

    def cell(value: Any) -> Any:
        if value is None:
            return ""
        if isinstance(value, float) and math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value

    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(columns))
        writer.writeheader()
        for row in rows:
            writer.writerow({column: cell(row.get(column)) for column in columns})
