"""CSV emission and parsing for experiment results."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .experiments import LearningCurve


def _fmt(v) -> str:
    # 17 significant digits round-trip a double exactly
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def emit_csv(curve: LearningCurve, path: str | Path) -> Path:
    """Write ``x`` then one column per series, in the curve's column order."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow([curve.x_name, *curve.columns])
            for j, x in enumerate(curve.x):
                writer.writerow([_fmt(x)] + [_fmt(col[j]) for col in curve.columns.values()])
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc}") from exc
    return path


def read_csv(path: str | Path) -> tuple[list[str], np.ndarray]:
    """Header and a float array of the rows (shape ``(rows, columns)``)."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    data = np.array([[float(v) for v in row] for row in body]) if body else np.empty((0, len(header)))
    return header, data
