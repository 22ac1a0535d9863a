"""Matrix files: CSV (optional header) and a raw little-endian float64 format.

The binary layout is an 8-byte magic ``b"SINGMAT\\0"``, the row and column
counts as little-endian uint64, then the entries in row-major order.
"""

from __future__ import annotations

import io
import json
import struct
from pathlib import Path

import numpy as np

from .errors import InvalidInputError

__all__ = ["read_matrix", "write_matrix", "write_json", "read_json", "MAGIC"]

MAGIC = b"SINGMAT\0"
_DIMS = struct.Struct("<QQ")


def _format_of(path, fmt):
    if fmt is not None:
        if fmt not in ("csv", "binary"):
            raise InvalidInputError(f"unknown matrix format {fmt!r}")
        return fmt
    return "binary" if Path(path).suffix.lower() in (".bin", ".smat") else "csv"


def _has_header(first_line):
    for cell in first_line.split(","):
        try:
            float(cell)
        except ValueError:
            return True
    return False


def read_matrix(path, fmt=None, header=None):
    """Read a 2-d float64 matrix (rows are subjects).

    Parameters
    ----------
    path : str or Path
    fmt : {"csv", "binary"}, optional
        Inferred from the suffix when omitted (``.bin``/``.smat`` mean binary).
    header : bool, optional
        Whether the CSV starts with a header row; detected when omitted.

    Returns
    -------
    ndarray
    """
    path = Path(path)
    if not path.is_file():
        raise InvalidInputError(f"matrix file not found: {path}")
    if _format_of(path, fmt) == "binary":
        raw = path.read_bytes()
        if len(raw) < len(MAGIC) + _DIMS.size or raw[: len(MAGIC)] != MAGIC:
            raise InvalidInputError(f"{path} is not a binary matrix file")
        rows, cols = _DIMS.unpack_from(raw, len(MAGIC))
        body = raw[len(MAGIC) + _DIMS.size:]
        if len(body) != 8 * rows * cols:
            raise InvalidInputError(f"{path}: expected {rows}x{cols} entries, file is truncated")
        return np.frombuffer(body, dtype="<f8").reshape(rows, cols).astype(np.float64)

    text = path.read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines:
        raise InvalidInputError(f"{path} is empty")
    if header is None:
        header = _has_header(lines[0])
    try:
        data = np.loadtxt(io.StringIO(text), delimiter=",", skiprows=int(header), ndmin=2,
                          dtype=np.float64)
    except ValueError as exc:
        raise InvalidInputError(f"could not parse {path}: {exc}") from None
    return data


def write_matrix(path, M, fmt=None, header=None):
    """Write ``M`` as CSV at 17 significant digits or in the binary format.

    ``header`` may be a list of column names (CSV only).
    """
    path = Path(path)
    M = np.asarray(M, dtype=np.float64)
    if M.ndim == 1:
        M = M[:, None]
    if M.ndim != 2:
        raise InvalidInputError(f"expected a 2-d matrix, got shape {M.shape}")
    path.parent.mkdir(parents=True, exist_ok=True)
    if _format_of(path, fmt) == "binary":
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(_DIMS.pack(*M.shape))
            fh.write(np.ascontiguousarray(M, dtype="<f8").tobytes())
        return path
    buf = io.StringIO()
    if header is not None:
        if len(header) != M.shape[1]:
            raise InvalidInputError(f"header has {len(header)} names for {M.shape[1]} columns")
        buf.write(",".join(header) + "\n")
    np.savetxt(buf, M, delimiter=",", fmt="%.17g")
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def write_json(path, obj):
    """Deterministic JSON (sorted keys, fixed indentation)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n",
                    encoding="utf-8")
    return path


def read_json(path):
    path = Path(path)
    if not path.is_file():
        raise InvalidInputError(f"file not found: {path}")
    return json.loads(path.read_text(encoding="utf-8"))
