"""CSV/JSON artifact writers shared by the three model engines.

Every numeric value is printed with 12 significant digits and every file
is written atomically (temp file + rename), so reruns with the same seed
produce byte-identical artifacts and parallel writers never interleave.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

__all__ = ["sig12", "atomic_write_text", "write_factor_csv", "write_json"]


def sig12(x) -> str:
    """Format a number with 12 significant digits."""
    return f"{float(x):.12g}"


def atomic_write_text(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_factor_csv(
    path: Path,
    id_column: str,
    row_ids,
    matrix: np.ndarray,
    column_names: list[str] | None = None,
) -> None:
    """Write a factor matrix with a leading id column."""
    matrix = np.asarray(matrix)
    k = matrix.shape[1]
    names = column_names if column_names is not None else [f"topic_{j}" for j in range(k)]
    lines = [",".join([id_column, *names])]
    for rid, row in zip(row_ids, matrix):
        lines.append(",".join([str(rid), *(sig12(v) for v in row)]))
    atomic_write_text(path, "\n".join(lines) + "\n")


def _round_floats(obj):
    if isinstance(obj, float):
        return float(sig12(obj))
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    return obj


def write_json(path: Path, payload: dict) -> None:
    atomic_write_text(
        path, json.dumps(_round_floats(payload), indent=2, sort_keys=False) + "\n"
    )
