"""File formats: CSV for matrices and traces, JSON for structured results.

All writers go through an atomic temp-file-plus-rename so partially written
outputs never appear; float formatting uses full precision (%.17g) so
round-trips are exact and reruns are byte-identical.
"""

from __future__ import annotations

import csv
import json
import os
import tempfile
from contextlib import contextmanager

import numpy as np

from .cluster import Partition, PathPoint
from .exceptions import InvalidWeightError, ParseError, ShapeMismatchError

__all__ = [
    "atomic_write",
    "write_matrix_csv",
    "read_matrix_csv",
    "write_trace_csv",
    "write_labels_json",
    "read_labels_json",
    "write_truth_json",
    "read_truth_json",
    "write_path_json",
    "read_weights_csv",
]

_FLOAT_FMT = "%.17g"


@contextmanager
def atomic_write(path, mode: str = "w"):
    """Write to a temp file in the target directory, then rename into place."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, mode) as handle:
            yield handle
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_matrix_csv(path, matrix: np.ndarray):
    """Matrix as CSV with a v1..vp header row."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    header = ",".join(f"v{c + 1}" for c in range(matrix.shape[1]))
    with atomic_write(path) as handle:
        handle.write(header + "\n")
        for row in matrix:
            handle.write(",".join(_FLOAT_FMT % value for value in row) + "\n")


def read_matrix_csv(path) -> np.ndarray:
    """Read a CSV matrix (header row required); malformed cells raise
    ParseError with 1-based row/column context."""
    rows: list[list[float]] = []
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        width = len(header)
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise ParseError(f"{path}: row {line_no} has {len(row)} fields, expected {width}")
            parsed = []
            for col_no, cell in enumerate(row, start=1):
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise ParseError(
                        f"{path}: row {line_no}, column {col_no}: not a number: {cell!r}"
                    ) from None
            rows.append(parsed)
    if not rows:
        raise ParseError(f"{path}: no data rows")
    return np.asarray(rows, dtype=np.float64)


def write_trace_csv(path, trace: np.ndarray):
    """Residual trace as iter,primal,dual,objective rows."""
    with atomic_write(path) as handle:
        handle.write("iter,primal,dual,objective\n")
        for it, (primal, dual, objective) in enumerate(np.atleast_2d(trace), start=1):
            handle.write(
                f"{it},{_FLOAT_FMT % primal},{_FLOAT_FMT % dual},{_FLOAT_FMT % objective}\n"
            )


def _labels_list(partition: Partition) -> list[int]:
    return [int(v) for v in partition.labels]


def write_labels_json(path, partition: Partition, **extra):
    payload = {"labels": _labels_list(partition), "num_clusters": partition.k}
    payload.update(extra)
    with atomic_write(path) as handle:
        json.dump(payload, handle, indent=2)
        handle.write("\n")


def read_labels_json(path) -> Partition:
    with open(path) as handle:
        try:
            payload = json.load(handle)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid JSON: {exc}") from None
    if "labels" not in payload:
        raise ParseError(f"{path}: missing 'labels' field")
    return Partition.from_raw(payload["labels"])


def write_truth_json(path, truth, seed: int):
    payload = {
        "labels": _labels_list(truth.membership),
        "sizes": list(truth.sizes),
        "B": [[float(v) for v in row] for row in truth.block_matrix],
        "seed": int(seed),
    }
    with atomic_write(path) as handle:
        json.dump(payload, handle, indent=2)
        handle.write("\n")


def read_truth_json(path) -> dict:
    with open(path) as handle:
        try:
            payload = json.load(handle)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid JSON: {exc}") from None
    if "labels" not in payload:
        raise ParseError(f"{path}: missing 'labels' field")
    payload["partition"] = Partition.from_raw(payload["labels"])
    return payload


def write_path_json(path, points: list[PathPoint]):
    """Path as a JSON array of lambda / cluster-count / labels records."""
    payload = [
        {
            "lambda": pt.lam,
            "num_clusters": pt.num_clusters,
            "labels": _labels_list(pt.partition),
            "objective": pt.objective,
            "converged": pt.converged,
        }
        for pt in points
    ]
    with atomic_write(path) as handle:
        json.dump(payload, handle, indent=2)
        handle.write("\n")


def read_weights_csv(path, p: int) -> dict[tuple[int, int], float]:
    """Explicit fusion weights: CSV with header i,j,w and 1-based indices,
    i < j; unlisted pairs default to weight 0."""
    weights: dict[tuple[int, int], float] = {}
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = [h.strip().lower() for h in next(reader)]
        except StopIteration:
            raise ParseError(f"{path}: empty weights file") from None
        if header[:3] != ["i", "j", "w"]:
            raise ParseError(f"{path}: expected header i,j,w, got {header}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ParseError(f"{path}: row {line_no} has {len(row)} fields, expected 3")
            try:
                i, j, w = int(row[0]), int(row[1]), float(row[2])
            except ValueError:
                raise ParseError(f"{path}: row {line_no}: expected int,int,float") from None
            if not (1 <= i < j <= p):
                raise ParseError(
                    f"{path}: row {line_no}: pair ({i},{j}) must satisfy 1 <= i < j <= {p}"
                )
            if w < 0 or not np.isfinite(w):
                raise InvalidWeightError(
                    f"{path}: row {line_no}: weight must be finite and >= 0, got {w}"
                )
            weights[(i - 1, j - 1)] = w
    return weights
