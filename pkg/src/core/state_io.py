#!/usr/bin/env python3
"""
Analytic CIL - State Persistence
Binary serialization of the AnalyticState.

Layout (little-endian):
    magic "ACILSTAT" | u32 version | f64 gamma | u32 d_fe | u32 class count |
    u32 phase_count | u32 class ids[class count] |
    W as row-major f64 (d_fe x class count) | R as row-major f64 (d_fe x d_fe) |
    8-byte checksum trailer (64-bit BLAKE2b of everything before it)

Only W, R and their bookkeeping are written, never training rows.
"""
import hashlib
import logging
import struct

import numpy as np

from src.core.analytic import AnalyticState
from src.core.errors import ChecksumError, FormatError, ValidationError
from src.utils.matrix_io import PathLike

logger = logging.getLogger(__name__)

STATE_MAGIC = b"ACILSTAT"
STATE_VERSION = 1
CHECKSUM_SIZE = 8

_HEADER = struct.Struct("<8sIdIII")


def payload_checksum(body: bytes) -> bytes:
    """64-bit digest stored in the trailer."""
    return hashlib.blake2b(body, digest_size=CHECKSUM_SIZE).digest()


def save_state(state: AnalyticState) -> bytes:
    """
    Serialize a state to bytes.

    The encoding is deterministic: equal states give identical bytes.
    """
    ids = np.asarray(state.class_registry, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() > np.iinfo(np.uint32).max):
        raise ValidationError("class ids must fit in u32 to be saved")
    parts = [
        _HEADER.pack(STATE_MAGIC, STATE_VERSION, state.gamma, state.d_fe,
                     state.n_classes, state.phase_count),
        ids.astype("<u4").tobytes(),
        np.ascontiguousarray(state.W, dtype="<f8").tobytes(),
        np.ascontiguousarray(state.R, dtype="<f8").tobytes(),
    ]
    body = b"".join(parts)
    return body + payload_checksum(body)


def load_state(data: bytes) -> AnalyticState:
    """
    Deserialize a state written by save_state.

    Raises:
        ChecksumError: the payload is truncated or corrupt.
        FormatError: bad magic, version mismatch or inconsistent sizes.
    """
    if len(data) < _HEADER.size + CHECKSUM_SIZE:
        raise ChecksumError(f"state payload truncated ({len(data)} bytes)")
    body, trailer = data[:-CHECKSUM_SIZE], data[-CHECKSUM_SIZE:]
    if payload_checksum(body) != trailer:
        raise ChecksumError("state payload checksum mismatch (corrupt or truncated)")

    magic, version, gamma, d_fe, n_classes, phase_count = _HEADER.unpack_from(body, 0)
    if magic != STATE_MAGIC:
        raise FormatError(f"not a state payload (magic {magic!r})")
    if version != STATE_VERSION:
        raise FormatError(f"state version mismatch: found {version}, expected {STATE_VERSION}")

    offset = _HEADER.size
    expected = offset + 4 * n_classes + 8 * d_fe * n_classes + 8 * d_fe * d_fe
    if len(body) != expected:
        raise FormatError(f"state payload has {len(body)} bytes, header implies {expected}")
    ids = np.frombuffer(body, dtype="<u4", count=n_classes, offset=offset)
    offset += 4 * n_classes
    W = np.frombuffer(body, dtype="<f8", count=d_fe * n_classes, offset=offset)
    offset += 8 * d_fe * n_classes
    R = np.frombuffer(body, dtype="<f8", count=d_fe * d_fe, offset=offset)
    return AnalyticState(
        W=W.reshape(d_fe, n_classes),
        R=R.reshape(d_fe, d_fe),
        class_registry=tuple(int(c) for c in ids),
        gamma=gamma,
        phase_count=phase_count,
    )


def write_state_file(path: PathLike, state: AnalyticState) -> int:
    """Write a state file and return its size in bytes."""
    payload = save_state(state)
    with open(path, "wb") as f:
        f.write(payload)
    logger.info("Wrote state (%d classes, d_fe=%d, %d bytes) to %s",
                state.n_classes, state.d_fe, len(payload), path)
    return len(payload)


def read_state_file(path: PathLike) -> AnalyticState:
    """Read a state file written by write_state_file."""
    try:
        with open(path, "rb") as f:
            data = f.read()
    except OSError as e:
        raise FormatError(f"cannot read state file: {e.strerror}", str(path)) from e
    try:
        return load_state(data)
    except FormatError as e:
        raise e.__class__(str(e), str(path)) from e
