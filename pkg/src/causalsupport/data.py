"""Study data container, CSV round-trip, outcome rescaling, and seed streams.

A :class:`Dataset` is the single in-memory representation used everywhere
else: an ``(n, p)`` covariate matrix, a binary treatment vector, and a
continuous outcome.  Covariates are kept on their original scale; only the
outcome is rescaled (see :func:`standardize_outcome`) and only internally to
the tree-ensemble fit.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigError,
    DegenerateOutcomeError,
    DegenerateSampleError,
    EmptyGroupError,
    MissingColumnError,
    MissingValueError,
    NonBinaryTreatmentError,
)

# Named substreams hanging off the one user-facing seed.  Every stochastic
# component draws from its own stream so adding draws to one component never
# shifts another.
_STREAM_IDS = {
    "bart-chain": 0,
    "dgp": 1,
    "matching": 2,
    "calibration": 3,
    "study": 4,
}


def rng_for(seed: int, stream: str, *key: int) -> np.random.Generator:
    """Return the generator for a named substream of ``seed``.

    Extra integers in ``key`` index repeated uses of the same stream (for
    example one per simulation replication).
    """
    if stream not in _STREAM_IDS:
        raise ConfigError(f"unknown rng stream {stream!r}")
    ss = np.random.SeedSequence((int(seed), _STREAM_IDS[stream]) + tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def child_seed(seed: int, stream: str, *key: int) -> int:
    """Derive a fresh 63-bit integer seed from a named substream."""
    return int(rng_for(seed, stream, *key).integers(0, 2**63 - 1))


@dataclass(frozen=True, eq=False, repr=False)
class Dataset:
    """Covariates, binary treatment, and outcome for one study.

    Arrays are copied and frozen at construction; all operations that
    "modify" a dataset return a new one.
    """

    x: np.ndarray
    z: np.ndarray
    y: np.ndarray
    names: tuple

    def __init__(self, x, z, y, names=None):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.ndim != 2:
            raise DegenerateSampleError("covariate matrix must be two-dimensional")
        z = np.asarray(z)
        y = np.asarray(y, dtype=float)
        n, p = x.shape
        if n < 2 or p < 1:
            raise DegenerateSampleError(f"need n >= 2 and p >= 1, got n={n}, p={p}")
        if z.shape != (n,) or y.shape != (n,):
            raise DegenerateSampleError("x, z, y row counts disagree")
        if not np.all(np.isfinite(x)) or not np.all(np.isfinite(y)):
            raise DegenerateSampleError("x and y must be finite")
        zf = z.astype(float)
        if not np.all((zf == 0.0) | (zf == 1.0)):
            bad = int(np.flatnonzero((zf != 0.0) & (zf != 1.0))[0])
            raise NonBinaryTreatmentError(bad + 1, repr(z[bad]))
        z = zf.astype(np.int64)
        if names is None:
            names = tuple(f"x{j + 1}" for j in range(p))
        names = tuple(str(c) for c in names)
        if len(names) != p:
            raise DegenerateSampleError("one name per covariate column required")
        x = x.copy()
        y = y.copy()
        x.flags.writeable = False
        z.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "names", names)

    def __repr__(self) -> str:
        return f"Dataset(n={self.n}, p={self.p}, treated={int(self.z.sum())})"

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    def require_both_groups(self) -> None:
        """Raise unless both treatment arms are populated."""
        for g in (0, 1):
            if not np.any(self.z == g):
                raise EmptyGroupError(g)

    def subset(self, mask: np.ndarray) -> "Dataset":
        mask = np.asarray(mask, dtype=bool)
        return Dataset(self.x[mask], self.z[mask], self.y[mask], self.names)


@dataclass(frozen=True)
class OutcomeTransform:
    """Affine map taking the training outcome onto [-0.5, +0.5]."""

    shift: float
    scale: float

    def apply(self, y: np.ndarray) -> np.ndarray:
        return (np.asarray(y, dtype=float) - self.shift) / self.scale

    def inverse(self, y_std: np.ndarray) -> np.ndarray:
        return np.asarray(y_std, dtype=float) * self.scale + self.shift


def standardize_outcome(d: Dataset) -> tuple[Dataset, OutcomeTransform]:
    """Rescale the outcome so its observed min/max land on -0.5/+0.5."""
    lo = float(d.y.min())
    hi = float(d.y.max())
    if hi <= lo:
        raise DegenerateOutcomeError("outcome is constant; cannot rescale to unit range")
    t = OutcomeTransform(shift=(hi + lo) / 2.0, scale=hi - lo)
    return Dataset(d.x, d.z, t.apply(d.y), d.names), t


def _parse_cell(raw: str, row: int, column: str) -> float:
    s = raw.strip()
    if not s:
        raise MissingValueError(row, column, raw)
    try:
        v = float(s)
    except ValueError:
        raise MissingValueError(row, column, raw) from None
    if not math.isfinite(v):
        raise MissingValueError(row, column, raw)
    return v


def load_csv(path, treatment_col: str = "z", outcome_col: str = "y") -> Dataset:
    """Read a study from a headered CSV file.

    All columns other than ``treatment_col`` and ``outcome_col`` become
    covariates, in file order.  Cells must be finite numbers; the treatment
    column must contain only 0 and 1, and both arms must be populated.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MissingColumnError(treatment_col) from None
        header = [h.strip() for h in header]
        for col in (treatment_col, outcome_col):
            if col not in header:
                raise MissingColumnError(col)
        zi = header.index(treatment_col)
        yi = header.index(outcome_col)
        xcols = [j for j in range(len(header)) if j not in (zi, yi)]

        zs, ys, xs = [], [], []
        for r, rec in enumerate(reader, start=1):
            if len(rec) != len(header):
                raise MissingValueError(r, header[min(len(rec), len(header) - 1)],
                                        ",".join(rec))
            zraw = rec[zi].strip()
            zval = _parse_cell(zraw, r, treatment_col)
            if zval not in (0.0, 1.0):
                raise NonBinaryTreatmentError(r, zraw)
            zs.append(zval)
            ys.append(_parse_cell(rec[yi], r, outcome_col))
            xs.append([_parse_cell(rec[j], r, header[j]) for j in xcols])

    if len(zs) < 2:
        raise DegenerateSampleError(f"need at least 2 data rows, got {len(zs)}")
    d = Dataset(
        np.asarray(xs, dtype=float),
        np.asarray(zs),
        np.asarray(ys, dtype=float),
        names=[header[j] for j in xcols],
    )
    d.require_both_groups()
    return d


def format_value(v: float) -> str:
    """Canonical text form for a double: 17 significant digits."""
    return f"{float(v):.17g}"


def write_csv(d: Dataset, path, treatment_col: str = "z", outcome_col: str = "y",
              header_lines: tuple = ()) -> None:
    """Write a dataset as CSV (treatment, outcome, then covariates).

    Values are printed at 17 significant digits so a write/load/write cycle
    is byte identical.  ``header_lines`` are emitted first, each prefixed
    with ``#``; loaders in this package do not consume them, they exist for
    provenance in artifacts.
    """
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([treatment_col, outcome_col, *d.names])
        for i in range(d.n):
            w.writerow(
                [str(int(d.z[i])), format_value(d.y[i])]
                + [format_value(v) for v in d.x[i]]
            )
