"""Paired ``(z, z_star)`` beam observations and their CSV form."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import cast_rays


class DatasetFormatError(ValueError):
    """A dataset file could not be parsed; the message names the line."""


@dataclass(frozen=True)
class Dataset:
    z: np.ndarray
    z_star: np.ndarray
    cause: np.ndarray | None = None

    def __post_init__(self):
        z = np.atleast_1d(np.asarray(self.z, dtype=float))
        zs = np.broadcast_to(np.asarray(self.z_star, dtype=float), z.shape).copy()
        if z.ndim != 1 or z.size < 1:
            raise ValueError("a dataset needs at least one row")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "z_star", zs)
        if self.cause is not None:
            cause = np.asarray(self.cause, dtype=str)
            if cause.shape != z.shape:
                raise ValueError("cause column length does not match z")
            object.__setattr__(self, "cause", cause)

    def __len__(self):
        return self.z.size

    def clipped(self, z_max):
        return Dataset(np.clip(self.z, 0.0, z_max), np.clip(self.z_star, 0.0, z_max),
                       self.cause)

    def subset(self, mask):
        cause = None if self.cause is None else self.cause[mask]
        return Dataset(self.z[mask], self.z_star[mask], cause)

    def buckets(self, width=0.0):
        """Split rows by expected range.

        ``width == 0`` groups identical ``z_star`` values; otherwise ``z_star``
        is binned into intervals of that width. Yields ``(centre, Dataset)``.
        """
        if width > 0:
            keys = np.floor(self.z_star / width)
        else:
            keys = self.z_star
        for key in np.unique(keys):
            mask = keys == key
            yield float(np.mean(self.z_star[mask])), self.subset(mask)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            header = ["z", "z_star"] + ([] if self.cause is None else ["cause"])
            writer.writerow(header)
            for i in range(len(self)):
                row = [repr(float(self.z[i])), repr(float(self.z_star[i]))]
                if self.cause is not None:
                    row.append(str(self.cause[i]))
                writer.writerow(row)


def _read_rows(path, required):
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DatasetFormatError(f"{path}: empty file") from None
        missing = [c for c in required if c not in header]
        if missing:
            raise DatasetFormatError(f"{path}:1: missing column(s) {missing}")
        cols = {name: header.index(name) for name in header}
        rows = []
        for line, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DatasetFormatError(
                    f"{path}:{line}: expected {len(header)} fields, got {len(row)}")
            rows.append((line, row))
    if not rows:
        raise DatasetFormatError(f"{path}: no data rows")
    return cols, rows


def _floats(path, cols, rows, names):
    out = np.empty((len(rows), len(names)))
    for i, (line, row) in enumerate(rows):
        for j, name in enumerate(names):
            try:
                out[i, j] = float(row[cols[name]])
            except ValueError:
                raise DatasetFormatError(
                    f"{path}:{line}: column {name!r} is not a number: "
                    f"{row[cols[name]]!r}") from None
            if not np.isfinite(out[i, j]):
                raise DatasetFormatError(f"{path}:{line}: column {name!r} is not finite")
    return out


def load_dataset(path, z_max=None):
    """Read a ``z,z_star[,cause]`` CSV, clipping to ``[0, z_max]`` if given."""
    cols, rows = _read_rows(path, ("z", "z_star"))
    values = _floats(path, cols, rows, ("z", "z_star"))
    cause = None
    if "cause" in cols:
        cause = np.array([row[cols["cause"]].strip() for _, row in rows])
    ds = Dataset(values[:, 0], values[:, 1], cause)
    return ds.clipped(z_max) if z_max is not None else ds


def load_pose_dataset(path, segmap):
    """Read ``z,x,y,heading`` rows and ray-cast ``z_star`` in ``segmap``.

    ``heading`` is the absolute direction of the beam.
    """
    cols, rows = _read_rows(path, ("z", "x", "y", "heading"))
    v = _floats(path, cols, rows, ("z", "x", "y", "heading"))
    z_star = cast_rays(segmap, v[:, 1], v[:, 2], v[:, 3])
    return Dataset(v[:, 0], z_star).clipped(segmap.z_max)
