"""ARFF/CSV ingestion for financial-ratio tables, with missing-value handling.

Missing cells are carried as NaN inside :class:`RawTable`; the parsers reject
any literal non-numeric token, so NaN can only mean "missing" downstream.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MISSING = float("nan")


class IngestError(ValueError):
    """Base class for parse and imputation failures."""


class MalformedHeader(IngestError):
    pass


class ArityMismatch(IngestError):
    pass


class NonNumericCell(IngestError):
    pass


class UnsupportedAttributeType(IngestError):
    pass


class AllMissingColumn(IngestError):
    pass


class EmptyResult(IngestError):
    pass


@dataclass(frozen=True)
class RawTable:
    """Parsed numeric table. ``values`` is n_rows x n_cols float64, NaN = missing."""

    column_names: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 2:
            raise ValueError("values must be 2-D")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "column_names", tuple(self.column_names))
        if len(self.column_names) != vals.shape[1]:
            raise ValueError("column_names length does not match column count")
        if len(set(self.column_names)) != len(self.column_names):
            raise MalformedHeader("duplicate column names")

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]

    @property
    def n_missing(self) -> int:
        return int(np.isnan(self.values).sum())

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.column_names.index(name)]


@dataclass(frozen=True)
class ImputationStats:
    """Record of one imputation pass, reusable on held-out data."""

    strategy: str
    per_column_fill: tuple[float, ...] = field(default_factory=tuple)
    n_cells_imputed: int = 0
    n_rows_dropped: int = 0


_STRATEGIES = ("median", "mean", "drop_rows")


def _parse_cell(token: str, line_no: int, col: int) -> float:
    token = token.strip()
    if token == "?" or token == "":
        return MISSING
    try:
        value = float(token)
    except ValueError:
        raise NonNumericCell(
            f"line {line_no}, column {col}: cannot parse {token!r} as a number"
        ) from None
    if not np.isfinite(value):
        raise NonNumericCell(f"line {line_no}, column {col}: non-finite value {token!r}")
    return value


def _parse_data_rows(lines, names):
    """Shared data-section parser: (line_no, text) pairs -> float rows."""
    rows = []
    n_cols = len(names)
    for line_no, text in lines:
        cells = text.split(",")
        if len(cells) != n_cols:
            raise ArityMismatch(
                f"line {line_no}: expected {n_cols} cells, found {len(cells)}"
            )
        rows.append([_parse_cell(c, line_no, j) for j, c in enumerate(cells)])
    values = np.array(rows, dtype=np.float64).reshape(len(rows), n_cols)
    return RawTable(tuple(names), values)


def parse_arff(text: str) -> RawTable:
    """Parse a dense numeric ARFF document.

    Supports ``@relation``, ``@attribute <name> numeric`` (also ``real`` /
    ``integer``) and a binary nominal attribute ``{0,1}`` coerced to numeric.
    ``?`` marks a missing cell, ``%`` starts a comment, keywords are
    case-insensitive.  String/date attributes raise
    :class:`UnsupportedAttributeType`; sparse data rows fail cell parsing.
    """
    names: list[str] = []
    binary_cols: list[int] = []
    saw_relation = False
    data_start = None

    raw_lines = text.splitlines()
    for i, raw in enumerate(raw_lines):
        line = raw.split("%", 1)[0].strip()
        if not line:
            continue
        lowered = line.lower()
        if lowered.startswith("@relation"):
            saw_relation = True
        elif lowered.startswith("@attribute"):
            parts = line.split(None, 2)
            if len(parts) < 3:
                raise MalformedHeader(f"line {i + 1}: incomplete @attribute declaration")
            name, type_spec = parts[1], parts[2].strip()
            if name.startswith(("'", '"')) and name.endswith(name[0]) and len(name) > 1:
                name = name[1:-1]
            type_lower = type_spec.lower()
            if type_lower in ("numeric", "real", "integer"):
                names.append(name)
            elif type_spec.startswith("{"):
                levels = {v.strip() for v in type_spec.strip("{} ").split(",")}
                if levels != {"0", "1"}:
                    raise UnsupportedAttributeType(
                        f"line {i + 1}: nominal attribute {name!r} must have levels {{0,1}}"
                    )
                binary_cols.append(len(names))
                names.append(name)
            else:
                raise UnsupportedAttributeType(
                    f"line {i + 1}: attribute {name!r} has unsupported type {type_spec!r}"
                )
        elif lowered.startswith("@data"):
            data_start = i + 1
            break
        else:
            raise MalformedHeader(f"line {i + 1}: unexpected content before @data: {line!r}")

    if not saw_relation:
        raise MalformedHeader("missing @relation line")
    if data_start is None:
        raise MalformedHeader("missing @data section")
    if not names:
        raise MalformedHeader("no attributes declared")

    data_lines = []
    for i in range(data_start, len(raw_lines)):
        line = raw_lines[i].split("%", 1)[0].strip()
        if line:
            data_lines.append((i + 1, line))
    table = _parse_data_rows(data_lines, names)

    for j in binary_cols:
        col = table.values[:, j]
        observed = col[~np.isnan(col)]
        if not np.isin(observed, (0.0, 1.0)).all():
            raise NonNumericCell(
                f"column {table.column_names[j]!r}: nominal {{0,1}} attribute "
                f"contains values outside {{0,1}}"
            )
    return table


def parse_csv(text: str, has_header: bool = True) -> RawTable:
    """Parse comma-separated numeric rows; empty cell or ``?`` is missing."""
    lines = [(i + 1, ln) for i, ln in enumerate(text.splitlines()) if ln.strip()]
    if not lines:
        raise MalformedHeader("empty CSV input")
    if has_header:
        header_no, header = lines[0]
        names = [c.strip() for c in header.split(",")]
        if any(not n for n in names):
            raise MalformedHeader(f"line {header_no}: empty column name in header")
        data_lines = lines[1:]
    else:
        n_cols = len(lines[0][1].split(","))
        names = [f"col{j}" for j in range(n_cols)]
        data_lines = lines
    return _parse_data_rows(data_lines, names)


def write_arff(table: RawTable, relation: str = "table") -> str:
    """Serialize to dense ARFF; inverse of :func:`parse_arff` for numeric tables."""
    out = [f"@relation {relation}"]
    for name in table.column_names:
        out.append(f"@attribute {name} numeric")
    out.append("@data")
    out.extend(_format_row(row) for row in table.values)
    return "\n".join(out) + "\n"


def write_csv(table: RawTable, header: bool = True) -> str:
    out = []
    if header:
        out.append(",".join(table.column_names))
    out.extend(_format_row(row) for row in table.values)
    return "\n".join(out) + "\n"


def _format_row(row: np.ndarray) -> str:
    return ",".join("?" if np.isnan(v) else repr(float(v)) for v in row)


def impute_missing(
    table: RawTable,
    strategy: str = "median",
    fit_stats: ImputationStats | None = None,
) -> tuple[RawTable, ImputationStats]:
    """Remove all missing cells from ``table``.

    ``median`` / ``mean`` fill each hole with the column statistic; passing
    ``fit_stats`` from a training pass reuses its fills (the no-leakage path
    for held-out data).  ``drop_rows`` discards any row containing a hole.
    """
    if strategy not in _STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; expected one of {_STRATEGIES}")
    values = table.values.copy()
    nan_mask = np.isnan(values)

    if strategy == "drop_rows":
        keep = ~nan_mask.any(axis=1)
        if not keep.any():
            raise EmptyResult("drop_rows removed every row")
        stats = ImputationStats(strategy="drop_rows", n_rows_dropped=int((~keep).sum()))
        return RawTable(table.column_names, values[keep]), stats

    if fit_stats is not None:
        if fit_stats.strategy != strategy:
            raise ValueError(
                f"fit_stats strategy {fit_stats.strategy!r} does not match {strategy!r}"
            )
        if len(fit_stats.per_column_fill) != table.n_cols:
            raise ArityMismatch(
                f"fit_stats covers {len(fit_stats.per_column_fill)} columns, "
                f"table has {table.n_cols}"
            )
        fills = np.asarray(fit_stats.per_column_fill, dtype=np.float64)
    else:
        all_missing = nan_mask.all(axis=0)
        if all_missing.any():
            bad = table.column_names[int(np.flatnonzero(all_missing)[0])]
            raise AllMissingColumn(f"column {bad!r} has no observed values")
        with np.errstate(all="ignore"):
            if strategy == "median":
                fills = np.nanmedian(values, axis=0)
            else:
                fills = np.nanmean(values, axis=0)

    bad_fill = nan_mask.any(axis=0) & ~np.isfinite(fills)
    if bad_fill.any():
        bad = table.column_names[int(np.flatnonzero(bad_fill)[0])]
        raise AllMissingColumn(f"no finite fill value available for column {bad!r}")

    values[nan_mask] = np.broadcast_to(fills, values.shape)[nan_mask]
    stats = ImputationStats(
        strategy=strategy,
        per_column_fill=tuple(float(f) for f in fills),
        n_cells_imputed=int(nan_mask.sum()),
    )
    return RawTable(table.column_names, values), stats
