"""CSV ingestion and report writers."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .data import Dataset, WeightVector
from .errors import DataError

MISSING_TOKENS = frozenset({"", "na", "nan", "null", "none", "."})


@dataclass(frozen=True)
class ColumnSchema:
    """Which CSV columns hold the treatment, outcome and covariates.

    ``covariate_columns=None`` selects every remaining column whose values
    all parse as numbers.
    """

    treatment_column: str
    outcome_column: str | None = None
    covariate_columns: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if self.covariate_columns is not None:
            object.__setattr__(self, "covariate_columns", tuple(self.covariate_columns))
            if self.treatment_column in self.covariate_columns:
                raise DataError("treatment column listed as a covariate", code="SCHEMA_ERROR")
            if self.outcome_column and self.outcome_column in self.covariate_columns:
                raise DataError("outcome column listed as a covariate", code="SCHEMA_ERROR")
        if self.outcome_column == self.treatment_column:
            raise DataError("treatment and outcome columns coincide", code="SCHEMA_ERROR")


def fmt(x: float) -> str:
    """17 significant digits: enough to round-trip any finite double."""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    return format(x, ".17g")


def _parse(cell: str, row: int, col: str) -> float:
    s = cell.strip()
    if s.lower() in MISSING_TOKENS:
        raise DataError(f"missing value at row {row}, column {col!r}", code="MISSING_VALUE")
    try:
        v = float(s)
    except ValueError:
        raise DataError(
            f"cannot parse {cell!r} as a number at row {row}, column {col!r}",
            code="PARSE_ERROR",
        ) from None
    if not math.isfinite(v):
        raise DataError(f"non-finite value at row {row}, column {col!r}", code="NON_FINITE_VALUE")
    return v


def _is_numeric_column(rows: list[list[str]], j: int) -> bool:
    for r in rows:
        s = r[j].strip()
        if s.lower() in MISSING_TOKENS:
            continue
        try:
            float(s)
        except ValueError:
            return False
    return True


def load_dataset_csv(path: str | Path, schema: ColumnSchema) -> Dataset:
    """Read a header-first UTF-8 CSV into a :class:`Dataset`.

    Rows are numbered from 1 for the first data row in error messages.
    Missing cells are an error; nothing is imputed.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file", code="PARSE_ERROR") from None
        rows = []
        for i, r in enumerate(reader, start=1):
            if not r or all(not c.strip() for c in r):
                continue
            if len(r) != len(header):
                raise DataError(
                    f"row {i} has {len(r)} fields, header has {len(header)}",
                    code="PARSE_ERROR",
                )
            rows.append(r)

    index = {h: j for j, h in enumerate(header)}
    wanted = [schema.treatment_column]
    if schema.outcome_column:
        wanted.append(schema.outcome_column)
    if schema.covariate_columns is not None:
        wanted.extend(schema.covariate_columns)
    for col in wanted:
        if col not in index:
            raise DataError(f"column {col!r} not found in {path}", code="MISSING_COLUMN")

    if schema.covariate_columns is None:
        taken = {schema.treatment_column, schema.outcome_column}
        covs = tuple(
            h for j, h in enumerate(header) if h not in taken and _is_numeric_column(rows, j)
        )
    else:
        covs = schema.covariate_columns

    def column(name: str) -> np.ndarray:
        j = index[name]
        return np.array([_parse(r[j], i, name) for i, r in enumerate(rows, start=1)])

    z = column(schema.treatment_column)
    bad = ~np.isin(z, (0.0, 1.0))
    if bad.any():
        row = int(np.argmax(bad)) + 1
        raise DataError(
            f"treatment column {schema.treatment_column!r} has value {z[bad][0]:g} at row {row}",
            code="NON_BINARY_TREATMENT",
        )
    y = column(schema.outcome_column) if schema.outcome_column else None
    X = np.column_stack([column(c) for c in covs]) if covs else np.empty((len(rows), 0))
    return Dataset(X, z.astype(np.int64), y, covs)


def save_dataset_csv(
    d: Dataset, path: str | Path, treatment_column: str = "z", outcome_column: str = "y"
) -> None:
    header = [treatment_column]
    if d.outcome is not None:
        header.append(outcome_column)
    header.extend(d.covariate_names)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(d.n):
            row = [fmt(int(d.treatment[i]))]
            if d.outcome is not None:
                row.append(fmt(d.outcome[i]))
            row.extend(fmt(v) for v in d.covariates[i])
            w.writerow(row)


WEIGHT_COLUMNS = ("unit_index", "treatment", "weight", "method", "estimand")


def write_weights_csv(path: str | Path, treatment: np.ndarray, w: WeightVector) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(WEIGHT_COLUMNS)
        for i, (z, wi) in enumerate(zip(treatment, w.weights)):
            out.writerow([i, int(z), fmt(wi), w.method.value, w.estimand.value])


def read_weights_csv(path: str | Path) -> tuple[np.ndarray, WeightVector]:
    """Inverse of :func:`write_weights_csv`; returns (treatment, weights)."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise DataError(f"{path}: no weight rows", code="PARSE_ERROR")
    missing = set(WEIGHT_COLUMNS) - set(rows[0])
    if missing:
        raise DataError(f"{path}: missing columns {sorted(missing)}", code="MISSING_COLUMN")
    rows.sort(key=lambda r: int(r["unit_index"]))
    z = np.array([int(r["treatment"]) for r in rows])
    w = np.array([_parse(r["weight"], i, "weight") for i, r in enumerate(rows, start=1)])
    return z, WeightVector(w, rows[0]["estimand"], rows[0]["method"], True, {"source": str(path)})


def write_rows_csv(path: str | Path, rows: Sequence[dict], columns: Sequence[str] | None = None) -> None:
    columns = list(columns or (rows[0].keys() if rows else []))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(columns)
        for r in rows:
            out.writerow([_cell(r[c]) for c in columns])


def _cell(v: object) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating, int, np.integer)):
        return fmt(v)
    return str(v)


def _jsonable(v: object) -> object:
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def write_json(path: str | Path, obj: object) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=False)
        fh.write("\n")


def format_table(rows: Iterable[Sequence[object]], header: Sequence[str], digits: int = 4) -> str:
    """Aligned plain-text table; floats are shown with ``digits`` decimals."""

    def show(v: object) -> str:
        if isinstance(v, (float, np.floating)):
            return "nan" if math.isnan(v) else f"{v:.{digits}f}"
        return str(v)

    body = [[show(v) for v in r] for r in rows]
    cols = [list(header)] + body
    widths = [max(len(r[j]) for r in cols) for j in range(len(header))]
    lines = ["  ".join(h.ljust(wd) if j == 0 else h.rjust(wd) for j, (h, wd) in enumerate(zip(r, widths))) for r in cols]
    lines.insert(1, "  ".join("-" * wd for wd in widths))
    return "\n".join(lines)
