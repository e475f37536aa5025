#!/usr/bin/env python3
"""
Analytic CIL - Matrix Files
Readers and writers for the feature and label file formats.

Feature files are either binary or CSV:
- binary: magic ``ACILFEAT``, u32 version (1), u64 n_rows, u32 n_cols,
  u8 dtype code (1 = float32, 2 = float64), then row-major little-endian values
- CSV: plain numeric rows, comma separated, no header

Label files are either text (one integer per line) or binary:
- binary: magic ``ACILLABL``, u32 version (1), u64 n_rows, then u32 class ids
"""
from typing import Union
import logging
import os
import struct

import numpy as np
import pandas as pd

from src.core.errors import FormatError

logger = logging.getLogger(__name__)

PathLike = Union[str, "os.PathLike[str]"]

FEATURE_MAGIC = b"ACILFEAT"
LABEL_MAGIC = b"ACILLABL"
FORMAT_VERSION = 1

# magic, version, n_rows, n_cols, dtype code
_FEATURE_HEADER = struct.Struct("<8sIQIB")
# magic, version, n_rows
_LABEL_HEADER = struct.Struct("<8sIQ")

DTYPE_CODES = {1: np.dtype("<f4"), 2: np.dtype("<f8")}


def _read_bytes(path: PathLike) -> bytes:
    try:
        with open(path, "rb") as f:
            return f.read()
    except OSError as e:
        raise FormatError(f"cannot read file: {e.strerror}", str(path)) from e


def read_feature_file(path: PathLike) -> np.ndarray:
    """
    Read a feature matrix from a binary ``ACILFEAT`` file or a headerless CSV.

    Args:
        path: Location of the feature file.

    Returns:
        A float64 matrix of shape (n_rows, n_cols).
    """
    raw = _read_bytes(path)
    if raw.startswith(FEATURE_MAGIC):
        matrix = _parse_feature_binary(raw, str(path))
    else:
        matrix = _parse_feature_csv(path)
    if not np.all(np.isfinite(matrix)):
        raise FormatError("non-finite feature values", str(path))
    logger.debug("Read %d x %d features from %s", matrix.shape[0], matrix.shape[1], path)
    return matrix


def _parse_feature_binary(raw: bytes, path: str) -> np.ndarray:
    if len(raw) < _FEATURE_HEADER.size:
        raise FormatError("malformed header: file shorter than the feature header", path)
    _, version, n_rows, n_cols, code = _FEATURE_HEADER.unpack_from(raw, 0)
    if version != FORMAT_VERSION:
        raise FormatError(f"malformed header: unsupported version {version}", path)
    if code not in DTYPE_CODES:
        raise FormatError(f"unknown dtype code {code}", path)
    if n_cols < 1:
        raise FormatError("malformed header: n_cols must be at least 1", path)
    dtype = DTYPE_CODES[code]
    expected = n_rows * n_cols * dtype.itemsize
    body = raw[_FEATURE_HEADER.size:]
    if len(body) != expected:
        raise FormatError(
            f"malformed header: expected {expected} payload bytes for "
            f"{n_rows}x{n_cols}, found {len(body)}", path)
    values = np.frombuffer(body, dtype=dtype, count=n_rows * n_cols)
    return values.reshape(n_rows, n_cols).astype(np.float64)


def _parse_feature_csv(path: PathLike) -> np.ndarray:
    # rows shorter than the first come back as NaN and fail the finiteness check
    try:
        frame = pd.read_csv(path, header=None, dtype=np.float64, encoding="utf-8-sig",
                            float_precision="round_trip")
    except pd.errors.EmptyDataError as e:
        raise FormatError("empty feature file", str(path)) from e
    except (pd.errors.ParserError, ValueError) as e:
        raise FormatError(f"malformed CSV: {e}", str(path)) from e
    return frame.to_numpy(dtype=np.float64)


def write_feature_file(path: PathLike, features: np.ndarray, dtype_code: int = 2) -> None:
    """
    Write a feature matrix in the binary ``ACILFEAT`` format.

    Args:
        path: Destination path.
        features: 2-D array of shape (n_rows, n_cols).
        dtype_code: 1 for float32 payload, 2 for float64.
    """
    if dtype_code not in DTYPE_CODES:
        raise FormatError(f"unknown dtype code {dtype_code}", str(path))
    matrix = np.asarray(features)
    if matrix.ndim != 2 or matrix.shape[1] < 1:
        raise FormatError("features must be a 2-D matrix with at least one column", str(path))
    header = _FEATURE_HEADER.pack(FEATURE_MAGIC, FORMAT_VERSION,
                                  matrix.shape[0], matrix.shape[1], dtype_code)
    body = np.ascontiguousarray(matrix, dtype=DTYPE_CODES[dtype_code]).tobytes()
    with open(path, "wb") as f:
        f.write(header)
        f.write(body)


def read_label_file(path: PathLike) -> np.ndarray:
    """
    Read integer class ids from a text or binary ``ACILLABL`` label file.

    Returns:
        A 1-D int64 array.
    """
    raw = _read_bytes(path)
    if raw.startswith(LABEL_MAGIC):
        if len(raw) < _LABEL_HEADER.size:
            raise FormatError("malformed header: file shorter than the label header", str(path))
        _, version, n_rows = _LABEL_HEADER.unpack_from(raw, 0)
        if version != FORMAT_VERSION:
            raise FormatError(f"malformed header: unsupported version {version}", str(path))
        body = raw[_LABEL_HEADER.size:]
        if len(body) != 4 * n_rows:
            raise FormatError(
                f"malformed header: expected {n_rows} labels, found {len(body) // 4}", str(path))
        return np.frombuffer(body, dtype="<u4", count=n_rows).astype(np.int64)

    try:
        frame = pd.read_csv(path, header=None, dtype=np.int64, encoding="utf-8-sig")
    except pd.errors.EmptyDataError:
        return np.zeros(0, dtype=np.int64)
    except (pd.errors.ParserError, ValueError) as e:
        raise FormatError(f"malformed label line: {e}", str(path)) from e
    if frame.shape[1] != 1:
        raise FormatError(
            f"label file must hold one id per line, found {frame.shape[1]} columns", str(path))
    return frame[0].to_numpy(dtype=np.int64)


def write_label_file(path: PathLike, labels: np.ndarray, binary: bool = False) -> None:
    """Write class ids as text (one per line) or as a binary ``ACILLABL`` file."""
    ids = np.asarray(labels, dtype=np.int64).ravel()
    if ids.size and (ids.min() < 0 or ids.max() > np.iinfo(np.uint32).max):
        raise FormatError("class ids must fit in u32", str(path))
    if binary:
        with open(path, "wb") as f:
            f.write(_LABEL_HEADER.pack(LABEL_MAGIC, FORMAT_VERSION, ids.size))
            f.write(ids.astype("<u4").tobytes())
    else:
        with open(path, "w") as f:
            f.writelines(f"{int(v)}\n" for v in ids)
