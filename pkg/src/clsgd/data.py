"""Integer datasets (binary or count) with an optional holdout split.

Files on disk are headerless CSVs of integers, one row per observation and
one column per variable. The data kind (binary/count) travels either through
an explicit argument or a JSON sidecar written next to the CSV.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

KINDS = ("binary", "count")


@dataclass(frozen=True)
class Dataset:
    """Immutable n x p integer matrix plus metadata.

    Attributes:
        rows: integer array of shape (n, p).
        kind: "binary" (entries in {0,1}) or "count" (entries >= 0).
        holdout_mask: optional boolean array of length n; rows flagged True are
            held out of every gradient/likelihood used for fitting.
    """

    rows: np.ndarray
    kind: str
    holdout_mask: np.ndarray | None = field(default=None)

    def __post_init__(self):
        rows = np.asarray(self.rows)
        if rows.ndim != 2:
            raise ValueError("rows must be a 2-d integer matrix")
        if not np.issubdtype(rows.dtype, np.integer):
            if not np.all(rows == rows.astype(np.int64)):
                raise ValueError("rows must contain integers")
            rows = rows.astype(np.int64)
        object.__setattr__(self, "rows", rows)
        n, p = rows.shape
        if n < 1 or p < 2:
            raise ValueError(f"need n >= 1 and p >= 2, got shape {rows.shape}")
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.kind == "binary":
            if rows.min() < 0 or rows.max() > 1:
                raise ValueError("binary dataset must contain only 0/1 entries")
        elif rows.min() < 0:
            raise ValueError("count dataset must be nonnegative")
        if self.holdout_mask is not None:
            mask = np.asarray(self.holdout_mask, dtype=bool)
            if mask.shape != (n,):
                raise ValueError("holdout_mask must have one flag per row")
            if mask.all():
                raise ValueError("holdout_mask cannot exclude every row")
            object.__setattr__(self, "holdout_mask", mask)
        self.rows.setflags(write=False)

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def p(self) -> int:
        return self.rows.shape[1]

    @property
    def n_fit(self) -> int:
        if self.holdout_mask is None:
            return self.n
        return int((~self.holdout_mask).sum())

    def fit_rows(self) -> np.ndarray:
        """Rows that participate in fitting (holdout excluded)."""
        if self.holdout_mask is None:
            return self.rows
        return self.rows[~self.holdout_mask]

    def holdout_rows(self) -> np.ndarray:
        if self.holdout_mask is None:
            return self.rows[:0]
        return self.rows[self.holdout_mask]

    def with_holdout_fraction(self, fraction: float, rng) -> "Dataset":
        """Return a copy holding out a uniformly chosen fraction of rows."""
        if not 0.0 < fraction < 1.0:
            raise ValueError("holdout fraction must be in (0, 1)")
        k = int(round(fraction * self.n))
        mask = np.zeros(self.n, dtype=bool)
        mask[rng.choice(self.n, size=k, replace=False)] = True
        return Dataset(self.rows, self.kind, mask)


def save_csv(dataset: Dataset, path) -> None:
    """Write rows as a headerless integer CSV plus a JSON kind sidecar."""
    path = Path(path)
    np.savetxt(path, dataset.rows, fmt="%d", delimiter=",")
    sidecar = path.with_suffix(path.suffix + ".meta.json")
    sidecar.write_text(json.dumps({"kind": dataset.kind}) + "\n")


def load_csv(path, kind: str | None = None) -> Dataset:
    """Load a headerless integer CSV.

    `kind` wins when given; otherwise the sidecar written by save_csv is
    consulted; failing both, an error is raised (the kind is part of the
    data contract, never guessed from values).
    """
    path = Path(path)
    if kind is None:
        sidecar = path.with_suffix(path.suffix + ".meta.json")
        if sidecar.exists():
            kind = json.loads(sidecar.read_text())["kind"]
        else:
            raise ValueError("dataset kind not given and no sidecar found")
    rows = np.loadtxt(path, dtype=np.int64, delimiter=",", ndmin=2)
    return Dataset(rows, kind)
