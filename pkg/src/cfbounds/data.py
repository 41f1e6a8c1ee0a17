"""Weighted discrete datasets and their file formats.

Two CSV layouts are supported, both comma-separated with a header row and
UTF-8 text. A records file holds one observation per row. A counts file
adds a trailing column literally named `counts` with a non-negative
integer weight per distinct configuration. State labels must not contain
commas or quote characters; quoting is rejected rather than parsed.

Counts ingest as exact integers and stay integers through binarization,
so aggregated totals are preserved without rounding.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import SchemaError
from .pgm import Factor, Variable


class Dataset:
    """Complete discrete records with per-row weights.

    assignments is an (n_rows, n_columns) array of state indices into the
    schema variables' domains. weights is int64 when every weight is an
    integer (counts, unit records), float64 otherwise. A dataset may be
    empty; operations that need probability mass reject total_weight 0.
    """

    def __init__(self, schema: Sequence[Variable], assignments, weights):
        self.schema: tuple[Variable, ...] = tuple(schema)
        names = [v.name for v in self.schema]
        if len(set(names)) != len(names):
            raise SchemaError(f"duplicate dataset columns: {names}")
        arr = np.asarray(assignments, dtype=np.int64).reshape(-1, len(self.schema))
        w = np.asarray(weights)
        if w.shape != (arr.shape[0],):
            raise SchemaError("weights must align one-to-one with rows")
        if w.size and (not np.all(np.isfinite(w.astype(np.float64))) or np.any(w < 0)):
            raise SchemaError("weights must be non-negative and finite")
        if w.dtype.kind in "iu" or (w.size and np.all(np.asarray(w, dtype=np.float64) % 1 == 0)):
            w = np.asarray(w, dtype=np.int64)
        else:
            w = np.asarray(w, dtype=np.float64)
        for j, v in enumerate(self.schema):
            col = arr[:, j]
            if col.size and (col.min() < 0 or col.max() >= v.cardinality):
                raise SchemaError(f"state index out of range in column {v.name!r}")
        arr.setflags(write=False)
        w.setflags(write=False)
        self.assignments = arr
        self.weights = w

    @classmethod
    def from_rows(
        cls, schema: Sequence[Variable], rows: Iterable[tuple[Mapping[str, str], float]]
    ) -> "Dataset":
        schema = tuple(schema)
        idx_rows = []
        weights = []
        for assignment, weight in rows:
            idx_rows.append([v.index_of(assignment[v.name]) for v in schema])
            weights.append(weight)
        return cls(schema, np.asarray(idx_rows, dtype=np.int64).reshape(-1, len(schema)), weights)

    @property
    def n_rows(self) -> int:
        return self.assignments.shape[0]

    @property
    def total_weight(self):
        if self.weights.dtype.kind in "iu":
            return int(self.weights.sum(initial=0))
        return float(self.weights.sum(initial=0.0))

    def rows(self):
        for i in range(self.n_rows):
            yield (
                {v.name: v.states[self.assignments[i, j]] for j, v in enumerate(self.schema)},
                self.weights[i].item(),
            )

    def align_to(self, variables: Sequence[Variable]) -> "Dataset":
        """Columns reordered and reindexed to match the given variables.

        Matching is by name and by state label: every label observed in a
        column must exist in the target variable's domain. Extra dataset
        columns are dropped. Raises SchemaError on a missing variable or
        an out-of-domain label.
        """
        here = {v.name: j for j, v in enumerate(self.schema)}
        cols = []
        for var in variables:
            if var.name not in here:
                raise SchemaError(f"dataset has no column {var.name!r}")
            src = self.schema[here[var.name]]
            lut = np.empty(src.cardinality, dtype=np.int64)
            for i, label in enumerate(src.states):
                lut[i] = var.index_of(label)
            cols.append(lut[self.assignments[:, here[var.name]]])
        stacked = (
            np.stack(cols, axis=1)
            if cols
            else np.zeros((self.n_rows, 0), dtype=np.int64)
        )
        return Dataset(tuple(variables), stacked, self.weights)

    def aggregated(self) -> "Dataset":
        """Distinct configurations with summed weights, in sorted row order."""
        if self.n_rows == 0:
            return self
        uniq, inverse = np.unique(self.assignments, axis=0, return_inverse=True)
        weights = np.zeros(uniq.shape[0], dtype=self.weights.dtype)
        np.add.at(weights, inverse.reshape(-1), self.weights)
        return Dataset(self.schema, uniq, weights)


def _parse_csv(path) -> tuple[list[str], list[list[str]]]:
    text = Path(path).read_text(encoding="utf-8")
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise SchemaError(f"{path}: empty file")
    table = []
    for line in lines:
        cells = [c.strip() for c in line.split(",")]
        for c in cells:
            if '"' in c:
                raise SchemaError(
                    f"{path}: quoting is not supported; labels must not contain quotes"
                )
            if not c:
                raise SchemaError(f"{path}: empty cell in line {line!r}")
        table.append(cells)
    header, rows = table[0], table[1:]
    if len(set(header)) != len(header):
        raise SchemaError(f"{path}: duplicate column names {header}")
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    for cells in rows:
        if len(cells) != len(header):
            raise SchemaError(
                f"{path}: row has {len(cells)} cells, header has {len(header)}"
            )
    return header, rows


def _discover_schema(header: Sequence[str], columns: list[list[str]]) -> tuple[Variable, ...]:
    # State order is first appearance down the file, column by column.
    schema = []
    for name, col in zip(header, columns):
        states = list(dict.fromkeys(col))
        schema.append(Variable(name, tuple(states)))
    return tuple(schema)


def read_records(path) -> Dataset:
    """Records CSV to a Dataset of unit-weight rows."""
    header, rows = _parse_csv(path)
    columns = [[r[j] for r in rows] for j in range(len(header))]
    schema = _discover_schema(header, columns)
    idx = np.empty((len(rows), len(schema)), dtype=np.int64)
    for j, v in enumerate(schema):
        lut = {s: i for i, s in enumerate(v.states)}
        idx[:, j] = [lut[c] for c in columns[j]]
    return Dataset(schema, idx, np.ones(len(rows), dtype=np.int64))


def read_counts(path) -> Dataset:
    """Counts CSV (trailing `counts` column) to a weighted Dataset."""
    header, rows = _parse_csv(path)
    if header[-1] != "counts":
        raise SchemaError(f"{path}: last column must be named 'counts'")
    weights = []
    for cells in rows:
        raw = cells[-1]
        try:
            w = int(raw)
        except ValueError:
            raise SchemaError(f"{path}: count {raw!r} is not an integer") from None
        if w < 0:
            raise SchemaError(f"{path}: negative count {w}")
        weights.append(w)
    header = header[:-1]
    if not header:
        raise SchemaError(f"{path}: counts file has no variable columns")
    columns = [[r[j] for r in rows] for j in range(len(header))]
    schema = _discover_schema(header, columns)
    idx = np.empty((len(rows), len(schema)), dtype=np.int64)
    for j, v in enumerate(schema):
        lut = {s: i for i, s in enumerate(v.states)}
        idx[:, j] = [lut[c] for c in columns[j]]
    return Dataset(schema, idx, np.asarray(weights, dtype=np.int64))


@dataclass(frozen=True)
class BinarySpec:
    """How one variable's states collapse into a positive/negative pair."""

    positive: tuple[str, ...]
    negative: tuple[str, ...]
    positive_label: str = "positive"
    negative_label: str = "negative"

    def __post_init__(self):
        if not self.positive or not self.negative:
            raise SchemaError("both binarization sides must be non-empty")
        overlap = set(self.positive) & set(self.negative)
        if overlap:
            raise SchemaError(f"states on both binarization sides: {sorted(overlap)}")
        if self.positive_label == self.negative_label:
            raise SchemaError("positive and negative labels must differ")

    def side_of(self, state: str, variable: str) -> int:
        if state in self.positive:
            return 0
        if state in self.negative:
            return 1
        raise SchemaError(
            f"state {state!r} of {variable!r} is on neither side of the binarization"
        )


class BinarizationMap:
    """Per-variable two-sided state partitions; unmapped variables pass through."""

    def __init__(self, specs: Mapping[str, BinarySpec]):
        self.specs: dict[str, BinarySpec] = dict(specs)

    def __contains__(self, name: str) -> bool:
        return name in self.specs

    def binary_variable(self, name: str) -> Variable:
        spec = self.specs[name]
        return Variable(name, (spec.positive_label, spec.negative_label))

    def positive_state(self, name: str) -> str:
        return self.specs[name].positive_label

    def negative_state(self, name: str) -> str:
        return self.specs[name].negative_label


def binarize(data: Dataset, bmap: BinarizationMap) -> Dataset:
    """Collapse mapped variables to their two labels and merge duplicate rows.

    Weight totals are preserved exactly; integer weights stay integers.
    Raises SchemaError when an observed state is on neither side of its
    variable's partition.
    """
    schema = []
    columns = []
    for j, var in enumerate(data.schema):
        if var.name in bmap:
            spec = bmap.specs[var.name]
            lut = np.empty(var.cardinality, dtype=np.int64)
            for i, state in enumerate(var.states):
                lut[i] = spec.side_of(state, var.name)
            schema.append(bmap.binary_variable(var.name))
            columns.append(lut[data.assignments[:, j]])
        else:
            schema.append(var)
            columns.append(data.assignments[:, j])
    stacked = (
        np.stack(columns, axis=1)
        if columns
        else np.zeros((data.n_rows, 0), dtype=np.int64)
    )
    return Dataset(tuple(schema), stacked, data.weights).aggregated()


def _format_cell(label: str, path) -> str:
    if "," in label or '"' in label or "\n" in label:
        raise SchemaError(f"{path}: label {label!r} cannot be written without quoting")
    return label


def write_records(path, data: Dataset) -> None:
    """Records CSV; every weight must be exactly 1."""
    if data.weights.size and not np.all(data.weights == 1):
        raise SchemaError("records files carry unit weights; write a counts file instead")
    lines = [",".join(_format_cell(v.name, path) for v in data.schema)]
    for i in range(data.n_rows):
        lines.append(
            ",".join(
                _format_cell(v.states[data.assignments[i, j]], path)
                for j, v in enumerate(data.schema)
            )
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_counts(path, data: Dataset) -> None:
    """Counts CSV with the trailing `counts` column; weights must be integers."""
    if data.weights.dtype.kind not in "iu":
        raise SchemaError("counts files need integer weights")
    if any(v.name == "counts" for v in data.schema):
        raise SchemaError("a variable named 'counts' collides with the weight column")
    lines = [",".join([*(_format_cell(v.name, path) for v in data.schema), "counts"])]
    for i in range(data.n_rows):
        cells = [
            _format_cell(v.states[data.assignments[i, j]], path)
            for j, v in enumerate(data.schema)
        ]
        cells.append(str(int(data.weights[i])))
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def empirical_distribution(data: Dataset) -> Factor:
    """Relative-frequency joint over the dataset's own schema."""
    if data.total_weight == 0:
        raise SchemaError("empirical distribution needs positive total weight")
    shape = tuple(v.cardinality for v in data.schema)
    counts = np.zeros(shape, dtype=np.float64)
    np.add.at(counts, tuple(data.assignments[:, j] for j in range(len(data.schema))), data.weights)
    return Factor(data.schema, counts / float(data.total_weight))
