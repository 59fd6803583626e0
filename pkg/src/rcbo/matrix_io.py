"""Plain-text matrix exchange format.

::

    # rcbo-matrix 1
    # shape <rows> <cols>
    # seed <int or none>
    <row 0: cols decimal values separated by single spaces>
    ...

Values are written with 17 significant digits, which round-trips every
IEEE double exactly.  Empty matrices have no value lines.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

MAGIC = "# rcbo-matrix"
VERSION = 1


class MatrixFormatError(ValueError):
    pass


def write_matrix(path, M, seed: int | None = None) -> None:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    lines = [f"{MAGIC} {VERSION}", f"# shape {M.shape[0]} {M.shape[1]}",
             f"# seed {seed if seed is not None else 'none'}"]
    lines += [" ".join(f"{v:.17g}" for v in row) for row in M]
    Path(path).write_text("\n".join(lines) + "\n")


def read_matrix(path) -> tuple[np.ndarray, int | None]:
    """Return ``(matrix, seed)``."""
    text = Path(path).read_text().splitlines()
    if len(text) < 3 or not text[0].startswith(MAGIC):
        raise MatrixFormatError(f"{path}: missing '{MAGIC}' header")
    try:
        version = int(text[0].split()[2])
        _, key, r, c = text[1].split()
        rows, cols = int(r), int(c)
        seed_tok = text[2].split()[2]
    except (IndexError, ValueError) as exc:
        raise MatrixFormatError(f"{path}: malformed header") from exc
    if version != VERSION or key != "shape":
        raise MatrixFormatError(f"{path}: unsupported header {text[0]!r} / {text[1]!r}")
    seed = None if seed_tok == "none" else int(seed_tok)
    body = [ln for ln in text[3:] if ln.strip()]
    if len(body) != rows:
        raise MatrixFormatError(f"{path}: expected {rows} rows, found {len(body)}")
    M = np.empty((rows, cols))
    for i, ln in enumerate(body):
        vals = ln.split()
        if len(vals) != cols:
            raise MatrixFormatError(f"{path}: row {i} has {len(vals)} values, expected {cols}")
        M[i] = [float(v) for v in vals]
    return M, seed
