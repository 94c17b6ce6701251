"""Data model, CSV ingestion and validation.

A :class:`Dataset` holds the observed data ``(X, A, W, Y)`` and, optionally,
a :class:`SurveyDesign` with weights, strata and PSUs. Datasets are immutable:
all arrays are stored as read-only copies.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, DataError

MISSING_TOKENS = frozenset({"", "na", "nan", "null", "none", "."})


def _frozen(arr, dtype=None) -> np.ndarray:
    out = np.array(arr, dtype=dtype, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class SurveyDesign:
    """Per-observation survey weight, stratum label and PSU label.

    PSU labels are nested in strata: the same PSU label in two strata denotes
    two different clusters.
    """

    weight: np.ndarray
    stratum: np.ndarray
    psu: np.ndarray

    def __post_init__(self):
        weight = _frozen(self.weight, float)
        stratum = _frozen(np.asarray(self.stratum).astype(str))
        psu = _frozen(np.asarray(self.psu).astype(str))
        if not (weight.ndim == stratum.ndim == psu.ndim == 1):
            raise DataError("survey columns must be one-dimensional")
        if not (len(weight) == len(stratum) == len(psu)):
            raise DataError("survey columns have unequal lengths")
        if not np.all(np.isfinite(weight)) or np.any(weight <= 0):
            raise DataError("survey weights must be finite and strictly positive")
        object.__setattr__(self, "weight", weight)
        object.__setattr__(self, "stratum", stratum)
        object.__setattr__(self, "psu", psu)

    @classmethod
    def simple(cls, weight) -> "SurveyDesign":
        """Single stratum with every observation its own PSU."""
        weight = np.asarray(weight, float)
        n = len(weight)
        return cls(weight, np.zeros(n, dtype=int), np.arange(n))

    def __len__(self):
        return len(self.weight)

    def codes(self) -> tuple[np.ndarray, np.ndarray]:
        """Integer codes ``(stratum_code, cluster_code)`` for each unit.

        Clusters are the distinct (stratum, psu) pairs, numbered in sorted
        order; strata are numbered in sorted order as well.
        """
        _, s_code = np.unique(self.stratum, return_inverse=True)
        pairs = np.char.add(np.char.add(self.stratum, "\x1f"), self.psu)
        _, c_code = np.unique(pairs, return_inverse=True)
        return s_code.ravel(), c_code.ravel()

    def subset(self, idx) -> "SurveyDesign":
        return SurveyDesign(self.weight[idx], self.stratum[idx], self.psu[idx])

    def with_weight(self, weight) -> "SurveyDesign":
        return SurveyDesign(weight, self.stratum, self.psu)


@dataclass(frozen=True)
class Dataset:
    """Observed data ``(X, A, W, Y)`` with optional survey design.

    Parameters
    ----------
    x : array, shape (n, p)
        Numeric baseline covariates; ``p`` may be zero.
    a : array, shape (n,)
        Binary exposure in {0, 1}.
    w : array, shape (n,)
        Focal variable (binary or continuous).
    y : array, shape (n,)
        Outcome.
    survey : SurveyDesign, optional
    x_names : tuple of str
        Covariate names, used in error messages and CSV output.
    n_dropped : int
        Rows removed by complete-case filtering at ingestion.
    """

    x: np.ndarray
    a: np.ndarray
    w: np.ndarray
    y: np.ndarray
    survey: SurveyDesign | None = None
    x_names: tuple = ()
    n_dropped: int = field(default=0, compare=False)

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        w = np.asarray(self.w, dtype=float)
        y = np.asarray(self.y, dtype=float)
        n = len(a)
        x = np.asarray(self.x, dtype=float)
        if x.size == 0:
            x = np.zeros((n, 0))
        elif x.ndim == 1:
            x = x.reshape(n, 1)
        if n < 1:
            raise DataError("dataset is empty")
        if not (x.shape[0] == len(w) == len(y) == n) or a.ndim != 1:
            raise DataError("columns of the dataset have unequal lengths")
        for name, col in (("exposure", a), ("focal", w), ("outcome", y), ("covariates", x)):
            if not np.all(np.isfinite(col)):
                raise DataError(f"{name} column contains missing or non-finite values")
        if not np.all((a == 0) | (a == 1)):
            bad = a[(a != 0) & (a != 1)][0]
            raise DataError(f"exposure must be binary 0/1, found {bad!r}")
        if self.survey is not None and len(self.survey) != n:
            raise DataError("survey design length does not match the data")
        names = tuple(self.x_names) or tuple(f"x{j + 1}" for j in range(x.shape[1]))
        if len(names) != x.shape[1]:
            raise DataError("x_names length does not match the number of covariates")
        object.__setattr__(self, "x", _frozen(x))
        object.__setattr__(self, "a", _frozen(a.astype(np.int8)))
        object.__setattr__(self, "w", _frozen(w))
        object.__setattr__(self, "y", _frozen(y))
        object.__setattr__(self, "x_names", names)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        same = (
            self.x_names == other.x_names
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.a, other.a)
            and np.array_equal(self.w, other.w)
            and np.array_equal(self.y, other.y)
        )
        if not same or (self.survey is None) != (other.survey is None):
            return False
        if self.survey is None:
            return True
        s, t = self.survey, other.survey
        return (
            np.array_equal(s.weight, t.weight)
            and np.array_equal(s.stratum, t.stratum)
            and np.array_equal(s.psu, t.psu)
        )

    __hash__ = None

    @property
    def n(self) -> int:
        return len(self.a)

    @property
    def p(self) -> int:
        return self.x.shape[1]

    def require_both_arms(self):
        n1 = int(self.a.sum())
        if n1 == 0 or n1 == self.n:
            raise DataError("both exposure levels must be present")

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        survey = None if self.survey is None else self.survey.subset(idx)
        return replace(
            self, x=self.x[idx], a=self.a[idx], w=self.w[idx], y=self.y[idx],
            survey=survey, n_dropped=0,
        )

    def with_survey(self, survey: SurveyDesign | None) -> "Dataset":
        return replace(self, survey=survey)

    def with_columns(self, **cols) -> "Dataset":
        """Copy with some of ``x, a, w, y`` replaced."""
        return replace(self, **cols)


def is_binary_focal(d: Dataset) -> bool:
    """True iff every value of the focal variable is 0 or 1."""
    return bool(np.all((d.w == 0) | (d.w == 1)))


@dataclass(frozen=True)
class ColumnSpec:
    """Mapping from CSV column names to roles."""

    exposure: str
    focal: str
    outcome: str
    covariates: tuple = ()
    weight: str | None = None
    stratum: str | None = None
    psu: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "covariates", tuple(self.covariates))
        if (self.stratum or self.psu) and not self.weight:
            raise ConfigError("stratum/psu columns require a weight column")
        used = self.columns()
        dupes = sorted({c for c in used if used.count(c) > 1})
        if dupes:
            raise ConfigError(f"column(s) assigned to more than one role: {', '.join(dupes)}")

    def columns(self) -> list:
        cols = [self.exposure, self.focal, self.outcome, *self.covariates]
        cols += [c for c in (self.weight, self.stratum, self.psu) if c]
        return cols


def _parse_float(token: str) -> float:
    if token.strip().lower() in MISSING_TOKENS:
        return math.nan
    return float(token)


def load_csv(path, spec: ColumnSpec) -> Dataset:
    """Read a comma-separated UTF-8 file into a validated :class:`Dataset`.

    Rows with a missing cell in any mapped column are dropped (complete-case)
    and counted in ``Dataset.n_dropped``. Row order is preserved.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"input file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        missing = [c for c in spec.columns() if c not in header]
        if missing:
            raise ConfigError(f"column(s) not found in {path.name}: {', '.join(missing)}")
        pos = {c: header.index(c) for c in spec.columns()}
        numeric = [spec.exposure, spec.focal, spec.outcome, *spec.covariates]
        if spec.weight:
            numeric.append(spec.weight)
        labels = [c for c in (spec.stratum, spec.psu) if c]

        num_rows, lab_rows, dropped = [], [], 0
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                vals = [_parse_float(row[pos[c]]) for c in numeric]
            except (IndexError, ValueError) as exc:
                raise DataError(f"{path.name} line {lineno}: {exc}") from None
            labs = [row[pos[c]].strip() for c in labels]
            if any(math.isnan(v) for v in vals) or any(
                lab.lower() in MISSING_TOKENS for lab in labs
            ):
                dropped += 1
                continue
            num_rows.append(vals)
            lab_rows.append(labs)

    if not num_rows:
        raise DataError(f"no complete rows remain in {path.name} ({dropped} dropped)")
    arr = np.array(num_rows, dtype=float)
    p = len(spec.covariates)
    survey = None
    if spec.weight:
        weight = arr[:, 3 + p]
        labs = np.array(lab_rows, dtype=str).reshape(len(lab_rows), len(labels))
        n = len(weight)
        stratum = labs[:, 0] if spec.stratum else np.zeros(n, dtype=int)
        if spec.psu:
            psu = labs[:, -1]
        else:
            psu = np.arange(n)
        survey = SurveyDesign(weight, stratum, psu)
    return Dataset(
        x=arr[:, 3:3 + p],
        a=arr[:, 0],
        w=arr[:, 1],
        y=arr[:, 2],
        survey=survey,
        x_names=spec.covariates,
        n_dropped=dropped,
    )


def _fmt(v: float) -> str:
    v = float(v)
    return str(int(v)) if v.is_integer() and abs(v) < 2**53 else repr(v)


def write_csv(d: Dataset, path, spec: ColumnSpec):
    """Write ``d`` so that ``load_csv(path, spec)`` reproduces it exactly."""
    if len(spec.covariates) != d.p:
        raise ConfigError("column spec covariates do not match the dataset")
    if (d.survey is not None) != bool(spec.weight):
        raise ConfigError("column spec survey columns do not match the dataset")
    header = [spec.exposure, spec.focal, spec.outcome, *spec.covariates]
    if spec.weight:
        header.append(spec.weight)
        header += [c for c in (spec.stratum, spec.psu) if c]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        for i in range(d.n):
            row = [_fmt(d.a[i]), _fmt(d.w[i]), _fmt(d.y[i])]
            row += [_fmt(v) for v in d.x[i]]
            if spec.weight:
                s = d.survey
                row.append(_fmt(s.weight[i]))
                if spec.stratum:
                    row.append(s.stratum[i])
                if spec.psu:
                    row.append(s.psu[i])
            out.writerow(row)


def expand_categorical(header: Sequence[str], rows: Sequence[Sequence[str]], columns):
    """Dummy-code categorical columns, dropping the first (sorted) level.

    Returns the new header and rows. A categorical column ``c`` with levels
    ``l0 < l1 < ...`` is replaced in place by indicators ``c_l1, c_l2, ...``.
    Missing cells stay missing in every indicator.
    """
    header = list(header)
    for c in columns:
        if c not in header:
            raise ConfigError(f"column not found: {c}")
    new_header, plans = [], []
    for j, name in enumerate(header):
        if name in columns:
            levels = sorted(
                {r[j].strip() for r in rows if r[j].strip().lower() not in MISSING_TOKENS}
            )
            new_header += [f"{name}_{lev}" for lev in levels[1:]]
            plans.append((j, levels[1:]))
        else:
            new_header.append(name)
            plans.append((j, None))
    out = []
    for r in rows:
        new = []
        for j, levels in plans:
            cell = r[j].strip()
            if levels is None:
                new.append(r[j])
            elif cell.lower() in MISSING_TOKENS:
                new += [""] * len(levels)
            else:
                new += ["1" if cell == lev else "0" for lev in levels]
        out.append(new)
    return new_header, out
