"""Matrix persistence: CSV and the KTM1 binary format.

On disk, rows are samples and columns are features; loaded matrices are
transposed to the package's (d, n) column-sample convention. CSV files may
carry a single header row, detected by a non-numeric first row. The KTM1
binary layout is magic b"KTM1", then two unsigned 64-bit little-endian
integers (rows, cols), then rows*cols IEEE-754 binary64 entries in row-major
order; round trips are bit-exact in both formats.
"""

from __future__ import annotations

import csv
import io
import struct
from pathlib import Path

import numpy as np

from ..errors import InputError, ParseError

MAGIC = b"KTM1"
_HEADER = struct.Struct("<QQ")


def _infer_format(path: Path, fmt: str | None) -> str:
    if fmt is not None:
        if fmt not in ("csv", "bin"):
            raise InputError(f"format must be 'csv' or 'bin', got {fmt!r}")
        return fmt
    return "csv" if path.suffix.lower() == ".csv" else "bin"


def _is_numeric_row(cells) -> bool:
    try:
        for c in cells:
            float(c)
    except ValueError:
        return False
    return True


def _load_csv(path: Path) -> np.ndarray:
    with open(path, newline="") as fh:
        first = fh.readline()
        if first == "":
            raise ParseError(f"{path}: no data rows", line=1)
        cells = next(csv.reader(io.StringIO(first)))
        skip = 0 if _is_numeric_row(cells) else 1
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=skip, ndmin=2)
    except ValueError:
        _reparse_csv_for_error(path, skip)
        raise  # unreachable unless the reparse finds nothing wrong
    if data.shape[0] == 0:
        raise ParseError(f"{path}: no data rows", line=1 + skip)
    return data.T.copy()


def _reparse_csv_for_error(path: Path, skip: int):
    """Slow pass over a CSV that np.loadtxt rejected, to locate the defect."""
    width = None
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if lineno <= skip or not row:
                continue
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise ParseError(
                    f"{path}: ragged row has {len(row)} cells, expected {width}",
                    line=lineno)
            for col, cell in enumerate(row, start=1):
                try:
                    float(cell)
                except ValueError:
                    raise ParseError(f"{path}: non-numeric cell {cell!r}",
                                     line=lineno, column=col) from None
    raise ParseError(f"{path}: malformed CSV")


def _load_bin(path: Path) -> np.ndarray:
    blob = path.read_bytes()
    if blob[:4] != MAGIC:
        raise ParseError(f"{path}: bad magic {blob[:4]!r}, expected {MAGIC!r}",
                         offset=0)
    if len(blob) < 4 + _HEADER.size:
        raise ParseError(f"{path}: truncated header", offset=len(blob))
    rows, cols = _HEADER.unpack_from(blob, 4)
    expected = 4 + _HEADER.size + rows * cols * 8
    if len(blob) != expected:
        raise ParseError(
            f"{path}: expected {expected} bytes for a {rows}x{cols} matrix, "
            f"got {len(blob)}", offset=min(len(blob), expected))
    data = np.frombuffer(blob, dtype="<f8", count=rows * cols,
                         offset=4 + _HEADER.size).reshape(rows, cols)
    if cols < 1:
        raise ParseError(f"{path}: matrix must have at least one column")
    return data.T.copy()


def load_matrix(path, format: str | None = None) -> np.ndarray:
    """Load a matrix as (d, n): features by samples."""
    p = Path(path)
    if not p.exists():
        raise ParseError(f"{p}: file does not exist")
    return _load_csv(p) if _infer_format(p, format) == "csv" else _load_bin(p)


def save_matrix(path, X, format: str | None = None) -> None:
    """Save a (d, n) matrix; on disk rows are samples."""
    p = Path(path)
    M = np.ascontiguousarray(np.asarray(X, dtype=float).T)
    if M.ndim != 2:
        raise InputError(f"matrix must be 2-D, got shape {M.shape}")
    if _infer_format(p, format) == "csv":
        # %.17g round-trips IEEE-754 doubles exactly
        np.savetxt(p, M, delimiter=",", fmt="%.17g")
    else:
        with open(p, "wb") as fh:
            fh.write(MAGIC)
            fh.write(_HEADER.pack(M.shape[0], M.shape[1]))
            fh.write(M.tobytes())


def load_labels(path) -> np.ndarray:
    """Load integer class labels, one per line (optional header row)."""
    p = Path(path)
    if not p.exists():
        raise ParseError(f"{p}: file does not exist")
    out = []
    with open(p, newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            try:
                val = float(text)
            except ValueError:
                if lineno == 1:
                    continue  # header
                raise ParseError(f"{p}: non-numeric label {text!r}",
                                 line=lineno) from None
            if val != int(val):
                raise ParseError(f"{p}: label {text!r} is not an integer",
                                 line=lineno)
            out.append(int(val))
    if not out:
        raise ParseError(f"{p}: no labels found", line=1)
    return np.array(out, dtype=int)


def save_labels(path, labels) -> None:
    lab = np.asarray(labels, dtype=int)
    Path(path).write_text("\n".join(str(int(v)) for v in lab) + "\n")


def one_hot(labels, n_classes: int | None = None) -> np.ndarray:
    """Encode integer labels as {0,1} rows, shape (n_classes, n)."""
    lab = np.asarray(labels, dtype=int)
    if lab.ndim != 1:
        raise InputError(f"labels must be 1-D, got shape {lab.shape}")
    if np.any(lab < 0):
        raise InputError("labels must be >= 0")
    c = int(lab.max()) + 1 if n_classes is None else int(n_classes)
    if np.any(lab >= c):
        raise InputError(f"label {int(lab.max())} out of range for {c} classes")
    Y = np.zeros((c, lab.shape[0]))
    Y[lab, np.arange(lab.shape[0])] = 1.0
    return Y
