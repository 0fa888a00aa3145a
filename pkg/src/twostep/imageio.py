"""PFM (32-bit float) and PGM (8/16-bit) image codecs.

PFM files are written single channel (``Pf``) with a negative scale, i.e.
little-endian samples, rows stored bottom-to-top as the format requires.
"""

from __future__ import annotations

import os
import re
from pathlib import Path

import numpy as np

from .errors import CodecError

_PFM_HEADER = re.compile(rb"^(Pf|PF)\s+(\d+)\s+(\d+)\s+(\S+)\s")


def write_pfm(path, field) -> None:
    arr = np.asarray(field)
    if arr.ndim != 2:
        raise CodecError(f"PFM writer expects a 2D field, got shape {arr.shape}")
    h, w = arr.shape
    data = np.flipud(arr).astype("<f4")
    try:
        with open(path, "wb") as f:
            f.write(b"Pf\n%d %d\n-1.0\n" % (w, h))
            f.write(data.tobytes())
    except OSError as exc:
        raise CodecError(f"cannot write {path}: {exc}") from exc


def read_pfm(path) -> np.ndarray:
    """Read a single-channel PFM file into a float64 array (top row first)."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise CodecError(f"cannot read {path}: {exc}") from exc
    m = _PFM_HEADER.match(raw[:128])
    if m is None:
        raise CodecError(f"{path}: not a PFM file")
    tag, w, h = m.group(1), int(m.group(2)), int(m.group(3))
    if tag != b"Pf":
        raise CodecError(f"{path}: colour PFM is not supported")
    try:
        scale = float(m.group(4))
    except ValueError as exc:
        raise CodecError(f"{path}: bad PFM scale {m.group(4)!r}") from exc
    if scale == 0.0:
        raise CodecError(f"{path}: PFM scale must be nonzero")
    dtype = "<f4" if scale < 0 else ">f4"
    payload = raw[m.end():]
    if len(payload) != 4 * w * h:
        raise CodecError(f"{path}: expected {4 * w * h} payload bytes, found {len(payload)}")
    arr = np.frombuffer(payload, dtype=dtype).reshape(h, w)
    return np.flipud(arr).astype(np.float64)


def write_pgm(path, field, lo: float, hi: float, bits: int = 8) -> None:
    """Write ``field`` as a binary PGM, mapping ``[lo, hi]`` linearly onto the grey range."""
    if bits not in (8, 16):
        raise CodecError("PGM depth must be 8 or 16 bits")
    if not hi > lo:
        raise CodecError("PGM range needs hi > lo")
    arr = np.asarray(field, dtype=np.float64)
    maxval = (1 << bits) - 1
    q = np.rint((np.clip(arr, lo, hi) - lo) / (hi - lo) * maxval)
    data = q.astype(np.uint8 if bits == 8 else ">u2")
    h, w = arr.shape
    try:
        with open(path, "wb") as f:
            f.write(b"P5\n%d %d\n%d\n" % (w, h, maxval))
            f.write(data.tobytes())
    except OSError as exc:
        raise CodecError(f"cannot write {path}: {exc}") from exc


def read_pgm(path) -> np.ndarray:
    """Read a binary (P5) PGM as an integer array."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise CodecError(f"cannot read {path}: {exc}") from exc
    # strip comments from the header region only
    tokens = []
    pos = 0
    while len(tokens) < 4:
        m = re.compile(rb"\s*(#[^\n]*\n\s*)*(\S+)").match(raw, pos)
        if m is None:
            raise CodecError(f"{path}: truncated PGM header")
        tokens.append(m.group(2))
        pos = m.end()
    if tokens[0] != b"P5":
        raise CodecError(f"{path}: not a binary PGM")
    w, h, maxval = (int(t) for t in tokens[1:])
    pos += 1  # single whitespace after maxval
    dtype = np.uint8 if maxval < 256 else np.dtype(">u2")
    n = w * h * np.dtype(dtype).itemsize
    if len(raw) - pos < n:
        raise CodecError(f"{path}: truncated PGM payload")
    return np.frombuffer(raw[pos:pos + n], dtype=dtype).reshape(h, w).astype(np.int64)


def ensure_dir(path) -> Path:
    p = Path(path)
    try:
        os.makedirs(p, exist_ok=True)
    except OSError as exc:
        raise CodecError(f"cannot create {p}: {exc}") from exc
    return p
