"""Point-matrix file formats.

Two formats are supported. ``csv`` is comma-separated text, one point per
row, rejecting ragged rows and non-finite values. ``f64le`` is a binary
format with a 16-byte header of two little-endian unsigned 64-bit integers
(n, d) followed by n*d little-endian binary64 values in row-major order;
round trips are bit-exact.
"""

import struct

import numpy as np

__all__ = ["load_points", "save_points"]

_HEADER = struct.Struct("<QQ")


def _infer_format(path):
    return "f64le" if str(path).endswith((".f64le", ".bin")) else "csv"


def load_points(path, fmt=None):
    """Load an (n, d) float64 matrix from ``path``.

    Args:
        path: file to read.
        fmt: 'csv' or 'f64le'; inferred from the suffix when None.
    """
    fmt = fmt or _infer_format(path)
    if fmt == "csv":
        try:
            arr = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
        except ValueError as exc:
            raise ValueError(f"malformed CSV in {path}: {exc}") from exc
    elif fmt == "f64le":
        with open(path, "rb") as fh:
            head = fh.read(_HEADER.size)
            if len(head) != _HEADER.size:
                raise ValueError(f"{path}: truncated f64le header")
            n, d = _HEADER.unpack(head)
            payload = fh.read()
        expected = n * d * 8
        if len(payload) != expected:
            raise ValueError(
                f"{path}: header promises {n}x{d} ({expected} bytes), "
                f"payload has {len(payload)}")
        arr = np.frombuffer(payload, dtype="<f8").reshape(n, d).astype(
            np.float64, copy=True)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if arr.size == 0:
        raise ValueError(f"{path}: empty point matrix")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{path}: non-finite values")
    return arr


def save_points(path, points, fmt=None):
    """Write an (n, d) float64 matrix to ``path`` (see load_points)."""
    arr = np.ascontiguousarray(np.asarray(points, dtype=np.float64))
    if arr.ndim != 2:
        raise ValueError("points must be 2-D")
    fmt = fmt or _infer_format(path)
    if fmt == "csv":
        np.savetxt(path, arr, delimiter=",", fmt="%.17g")
    elif fmt == "f64le":
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(arr.shape[0], arr.shape[1]))
            fh.write(arr.astype("<f8").tobytes())
    else:
        raise ValueError(f"unknown format {fmt!r}")
