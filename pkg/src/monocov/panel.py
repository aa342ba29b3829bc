"""Panels of asset returns with monotone missing histories.

The data model is an n-by-m grid of float returns in which NaN marks a
missing cell.  Row 0 is the most recent period, so the time index runs
opposite to the row index; none of the estimation math consults time,
only the prefix structure.  A grid is *monotone* when every column's
observed cells form a contiguous prefix of the rows: shorter histories
nest inside longer ones once columns are arranged by decreasing
observed length.

File format: comma-separated values with an optional header row of
column labels, ``NA`` (case-sensitive) or an empty cell for a missing
value, ``.`` as the decimal separator and no thousands separators.
Matrices (covariance output) are written in full square storage with
matching header and row labels.  All floats are written with 17
significant digits so that read/write round-trips are value-exact.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

__all__ = [
    "PanelError",
    "PanelFormatError",
    "NonMonotonePattern",
    "EmptyColumn",
    "NonFiniteValue",
    "ReturnPanel",
    "MonotoneOrder",
    "validate_and_order",
    "design_slice",
    "design_block",
    "read_panel",
    "write_panel",
    "write_labeled_matrix",
    "read_labeled_matrix",
    "write_labeled_vector",
    "read_labeled_vector",
]

MISSING_TOKEN = "NA"
_FLOAT_FMT = "%.17g"


class PanelError(ValueError):
    """Base class for panel parsing and validation failures."""


class PanelFormatError(PanelError):
    """A delimited file could not be parsed; message carries row/column."""


class NonMonotonePattern(PanelError):
    """Some column's observed cells do not form a contiguous prefix."""


class EmptyColumn(PanelError):
    """A column contains no observed cells at all."""


class NonFiniteValue(PanelError):
    """An observed cell parsed to NaN or +/-inf."""


@dataclass(frozen=True)
class ReturnPanel:
    """Validated return grid in its original column order.

    Attributes
    ----------
    values : ndarray, shape (n, m)
        Returns with NaN marking missing cells; row 0 is the most
        recent period.  The array is read-only.
    column_labels : tuple of str
        One label per column, in input order.
    """

    values: np.ndarray
    column_labels: tuple[str, ...]

    def __post_init__(self) -> None:
        if self.values.ndim != 2:
            raise ValueError("panel values must be a 2-d array")
        if len(self.column_labels) != self.values.shape[1]:
            raise ValueError("label count does not match column count")

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_columns(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class MonotoneOrder:
    """Column arrangement by decreasing observed length.

    ``permutation[k]`` is the monotone position of original column k.
    ``lengths[j]`` is the observed-row count of the column at monotone
    position j (non-increasing).  ``blocks`` partitions the monotone
    positions into maximal runs of equal length, as inclusive 0-based
    ``(start, stop)`` pairs.
    """

    permutation: np.ndarray
    lengths: np.ndarray
    blocks: tuple[tuple[int, int], ...]

    @property
    def columns_by_position(self) -> np.ndarray:
        """Original column index at each monotone position."""
        return np.argsort(self.permutation, kind="stable")


def _default_labels(m: int) -> tuple[str, ...]:
    return tuple(f"col{j + 1}" for j in range(m))


def _column_length(col: np.ndarray, index: int, label: str) -> int:
    """Observed prefix length of one column, or raise."""
    observed = ~np.isnan(col)
    n_obs = int(observed.sum())
    if n_obs == 0:
        raise EmptyColumn(f"column {index + 1} ({label}) has no observed values")
    # Observed cells must be exactly the first n_obs rows.
    if not observed[:n_obs].all():
        gap_row = int(np.flatnonzero(~observed)[0])
        raise NonMonotonePattern(
            f"column {index + 1} ({label}) has a missing cell at row "
            f"{gap_row + 1} followed by observed cells below it"
        )
    return n_obs


def validate_and_order(
    raw, labels: tuple[str, ...] | list[str] | None = None
) -> tuple[ReturnPanel, MonotoneOrder]:
    """Validate a raw grid and compute its monotone column arrangement.

    Parameters
    ----------
    raw : array-like, shape (n, m)
        Float grid; NaN (or None) marks a missing cell.
    labels : sequence of str, optional
        Column labels; generated as ``col1..colm`` when omitted.

    Returns
    -------
    (ReturnPanel, MonotoneOrder)
        The panel keeps the original column order; the order object
        records the length-sorted arrangement.  Ties in length keep
        the original relative column order.

    Raises
    ------
    NonMonotonePattern, EmptyColumn, NonFiniteValue
    """
    values = np.array(raw, dtype=float, copy=True)
    if values.ndim != 2:
        raise ValueError("expected a 2-d grid of returns")
    n, m = values.shape
    if n < 1 or m < 1:
        raise ValueError("panel must have at least one row and one column")
    if labels is None:
        labels = _default_labels(m)
    labels = tuple(str(s) for s in labels)
    if len(labels) != m:
        raise ValueError("label count does not match column count")

    observed = ~np.isnan(values)
    if not np.isfinite(values[observed]).all():
        bad = np.argwhere(observed & ~np.isfinite(values))[0]
        raise NonFiniteValue(
            f"non-finite value at row {bad[0] + 1}, column {bad[1] + 1}"
        )

    lengths = np.array(
        [_column_length(values[:, j], j, labels[j]) for j in range(m)], dtype=int
    )
    if lengths.max() < n:
        raise NonMonotonePattern(
            f"rows {lengths.max() + 1}..{n} are missing in every column; "
            "no column spans all rows"
        )

    # Stable sort by decreasing length keeps original order within ties.
    by_position = np.argsort(-lengths, kind="stable")
    permutation = np.empty(m, dtype=int)
    permutation[by_position] = np.arange(m)
    sorted_lengths = lengths[by_position]

    blocks: list[tuple[int, int]] = []
    start = 0
    for j in range(1, m + 1):
        if j == m or sorted_lengths[j] != sorted_lengths[start]:
            blocks.append((start, j - 1))
            start = j
    values.setflags(write=False)
    panel = ReturnPanel(values=values, column_labels=labels)
    order = MonotoneOrder(
        permutation=permutation, lengths=sorted_lengths, blocks=tuple(blocks)
    )
    return panel, order


def design_slice(
    panel: ReturnPanel, order: MonotoneOrder, j: int
) -> tuple[np.ndarray, np.ndarray]:
    """Regression design for the j-th monotone column (1-based, j >= 2).

    Returns ``(X, y)`` where ``X`` holds the first ``n_j`` rows of the
    j-1 longer columns and ``y`` the first ``n_j`` rows of column j,
    both in monotone order.  Neither contains missing cells.
    """
    m = panel.n_columns
    if not 2 <= j <= m:
        raise ValueError(f"j must be in 2..{m}, got {j}")
    cols = order.columns_by_position
    nj = int(order.lengths[j - 1])
    ordered = panel.values[:nj, :][:, cols]
    return ordered[:, : j - 1].copy(), ordered[:, j - 1].copy()


def design_block(
    panel: ReturnPanel, order: MonotoneOrder, block: tuple[int, int]
) -> tuple[np.ndarray, np.ndarray]:
    """Multi-response design for an equal-length block of monotone columns.

    ``block`` is an inclusive 0-based ``(start, stop)`` pair of monotone
    positions with ``start >= 1``.  Returns ``(X, Y)`` over the block's
    shared row count: X has the ``start`` longer columns, Y the block's
    columns.
    """
    start, stop = block
    if start < 1:
        raise ValueError("block must start at monotone position >= 1")
    cols = order.columns_by_position
    nb = int(order.lengths[start])
    ordered = panel.values[:nb, :][:, cols]
    return ordered[:, :start].copy(), ordered[:, start : stop + 1].copy()


def _parse_cell(token: str, row: int, col: int) -> float:
    text = token.strip()
    if text == "" or text == MISSING_TOKEN:
        return np.nan
    if "_" in text:
        raise PanelFormatError(
            f"cannot parse {text!r} at row {row}, column {col}"
        )
    try:
        value = float(text)
    except ValueError:
        raise PanelFormatError(
            f"cannot parse {text!r} at row {row}, column {col}"
        ) from None
    if not np.isfinite(value):
        raise NonFiniteValue(
            f"non-finite value {text!r} at row {row}, column {col}"
        )
    return value


def _looks_like_header(cells: list[str]) -> bool:
    for token in cells:
        text = token.strip()
        if text == "" or text == MISSING_TOKEN:
            continue
        try:
            float(text)
        except ValueError:
            return True
    return False


def read_panel(path) -> tuple[np.ndarray, tuple[str, ...] | None]:
    """Read a delimited return panel.

    Returns the raw float grid (NaN for missing) and the header labels,
    or None when the file has no header.  Rows are kept in file order;
    callers that store data oldest-first should reverse before
    validation.
    """
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh)]
    rows = [row for row in rows if any(cell.strip() for cell in row)]
    if not rows:
        raise PanelFormatError(f"{path}: no data rows")

    labels: tuple[str, ...] | None = None
    first_data = 0
    if _looks_like_header(rows[0]):
        labels = tuple(cell.strip() for cell in rows[0])
        first_data = 1
        if len(rows) == 1:
            raise PanelFormatError(f"{path}: header but no data rows")

    width = len(rows[first_data])
    grid = np.empty((len(rows) - first_data, width), dtype=float)
    for i, row in enumerate(rows[first_data:], start=first_data):
        if len(row) != width:
            raise PanelFormatError(
                f"{path}: row {i + 1} has {len(row)} cells, expected {width}"
            )
        for j, token in enumerate(row):
            grid[i - first_data, j] = _parse_cell(token, i + 1, j + 1)
    if labels is not None and len(labels) != width:
        raise PanelFormatError(f"{path}: header width does not match data rows")
    return grid, labels


def _format_cell(value: float) -> str:
    if np.isnan(value):
        return MISSING_TOKEN
    return _FLOAT_FMT % value


def write_panel(path, panel: ReturnPanel) -> None:
    """Write a panel with its header; missing cells become ``NA``."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(panel.column_labels)
        for row in panel.values:
            writer.writerow([_format_cell(v) for v in row])


def write_labeled_matrix(path, matrix: np.ndarray, labels) -> None:
    """Write a square matrix with matching header and row labels."""
    matrix = np.asarray(matrix, dtype=float)
    m = matrix.shape[0]
    if matrix.shape != (m, m) or len(labels) != m:
        raise ValueError("matrix must be square with one label per column")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([""] + list(labels))
        for lab, row in zip(labels, matrix):
            writer.writerow([lab] + [_FLOAT_FMT % v for v in row])


def read_labeled_matrix(path) -> tuple[np.ndarray, tuple[str, ...]]:
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if not rows:
        raise PanelFormatError(f"{path}: empty matrix file")
    labels = tuple(cell.strip() for cell in rows[0][1:])
    m = len(labels)
    if len(rows) != m + 1:
        raise PanelFormatError(f"{path}: expected {m} data rows, found {len(rows) - 1}")
    matrix = np.empty((m, m), dtype=float)
    for i, row in enumerate(rows[1:]):
        if len(row) != m + 1:
            raise PanelFormatError(f"{path}: row {i + 2} has wrong width")
        if row[0].strip() != labels[i]:
            raise PanelFormatError(
                f"{path}: row label {row[0]!r} does not match header {labels[i]!r}"
            )
        for j, token in enumerate(row[1:]):
            matrix[i, j] = _parse_cell(token, i + 2, j + 2)
            if np.isnan(matrix[i, j]):
                raise PanelFormatError(f"{path}: missing cell in matrix")
    return matrix, labels


def write_labeled_vector(path, vector: np.ndarray, labels, name: str = "mean") -> None:
    vector = np.asarray(vector, dtype=float)
    if vector.ndim != 1 or len(labels) != vector.shape[0]:
        raise ValueError("vector and labels must have matching length")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["", name])
        for lab, v in zip(labels, vector):
            writer.writerow([lab, _FLOAT_FMT % v])


def read_labeled_vector(path) -> tuple[np.ndarray, tuple[str, ...]]:
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if len(rows) < 2:
        raise PanelFormatError(f"{path}: empty vector file")
    labels = []
    values = []
    for i, row in enumerate(rows[1:]):
        if len(row) != 2:
            raise PanelFormatError(f"{path}: row {i + 2} has wrong width")
        labels.append(row[0].strip())
        values.append(_parse_cell(row[1], i + 2, 2))
    return np.array(values, dtype=float), tuple(labels)
