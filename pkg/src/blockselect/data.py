"""Dataset representation: feature tables, labels, block structure, splits.

Rows are samples in time order. Columns are features; a column may belong to
a *block* (several lagged observations of one quantity) or be a *single*.
"""

from __future__ import annotations

import csv
import json
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "DataError",
    "FeatureMatrix",
    "BlockSpec",
    "BlockCountVector",
    "SplitSpec",
    "load_csv",
    "write_csv",
    "infer_blocks",
    "load_block_map",
    "write_block_map",
    "split",
    "split_indices",
    "counts_to_mask",
    "mask_to_json",
    "mask_from_json",
]

LAG_SEPARATOR = "__"
_LAG_RE = re.compile(r"^(?P<base>.+)__(?P<lag>\d+)$")


class DataError(ValueError):
    """Malformed input data (CSV content, block maps, masks)."""


@dataclass(frozen=True)
class FeatureMatrix:
    values: np.ndarray
    column_names: tuple[str, ...]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise DataError(f"feature values must be 2-D, got shape {values.shape}")
        names = tuple(self.column_names)
        if len(names) != values.shape[1]:
            raise DataError(
                f"{len(names)} column names for {values.shape[1]} feature columns")
        seen = set()
        for name in names:
            if name in seen:
                raise DataError(f"duplicate column name {name!r}")
            seen.add(name)
        if not np.all(np.isfinite(values)):
            r, c = np.argwhere(~np.isfinite(values))[0]
            raise DataError(f"non-finite value at row {r + 1}, column {names[c]!r}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "column_names", names)

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    def take(self, rows) -> "FeatureMatrix":
        return FeatureMatrix(self.values[np.asarray(rows)], self.column_names)


@dataclass(frozen=True)
class BlockSpec:
    """Partition of the column indices ``0..N-1`` into ordered blocks and singles.

    ``blocks`` is a tuple of ``(name, member_indices)``; members are listed in
    lag order. ``singles`` lists the columns that belong to no block.
    """

    blocks: tuple[tuple[str, tuple[int, ...]], ...]
    singles: tuple[int, ...]

    def __post_init__(self):
        blocks = tuple((str(name), tuple(int(i) for i in members))
                       for name, members in self.blocks)
        singles = tuple(int(i) for i in self.singles)
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "singles", singles)

        names = [name for name, _ in blocks]
        if len(set(names)) != len(names):
            raise DataError("duplicate block name")
        for name, members in blocks:
            if not members:
                raise DataError(f"block {name!r} is empty")
        every = [i for _, m in blocks for i in m] + list(singles)
        if sorted(every) != list(range(len(every))):
            raise DataError(
                "blocks and singles must cover columns 0..N-1 exactly once")

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    @property
    def n_singles(self) -> int:
        return len(self.singles)

    @property
    def block_lengths(self) -> tuple[int, ...]:
        return tuple(len(m) for _, m in self.blocks)

    @property
    def n_block_features(self) -> int:
        return sum(self.block_lengths)

    @property
    def n_features(self) -> int:
        return self.n_block_features + self.n_singles

    @classmethod
    def all_singles(cls, n_features: int) -> "BlockSpec":
        return cls(blocks=(), singles=tuple(range(n_features)))


@dataclass(frozen=True)
class BlockCountVector:
    """Number of top-ranked members kept per block, plus the singles switch."""

    counts: tuple[int, ...]
    singles_included: bool = True

    def __post_init__(self):
        object.__setattr__(self, "counts", tuple(int(k) for k in self.counts))

    def validate(self, spec: BlockSpec) -> None:
        if len(self.counts) != spec.n_blocks:
            raise DataError(
                f"{len(self.counts)} counts given for {spec.n_blocks} blocks")
        for k, length in zip(self.counts, spec.block_lengths):
            if not 0 <= k <= length:
                raise DataError(f"count {k} outside [0, {length}]")

    def replace(self, block: int, k: int) -> "BlockCountVector":
        counts = list(self.counts)
        counts[block] = k
        return BlockCountVector(tuple(counts), self.singles_included)


@dataclass(frozen=True)
class SplitSpec:
    mode: str = "temporal"
    test_fraction: float = 1.0 / 3.0
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("randomized", "temporal"):
            raise DataError(f"unknown split mode {self.mode!r}")
        if not 0.0 < self.test_fraction < 1.0:
            raise DataError(f"test_fraction must lie in (0, 1), got {self.test_fraction}")


# -- CSV ingestion ---------------------------------------------------------

def _parse_cell(text: str, row: int, line: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise DataError(
            f"non-numeric value {text!r} at row {row} (line {line}), "
            f"column {column!r}") from None
    if not math.isfinite(value):
        raise DataError(
            f"non-finite value {text!r} at row {row} (line {line}), column {column!r}")
    return value


def load_csv(path, label_column: str = "label", pnl_column: str | None = None,
             pnl_threshold: float = 0.0):
    """Read a feature table with a header row.

    The label column must hold 0/1 values. When it is absent but
    ``pnl_column`` is given, labels are derived as ``pnl > pnl_threshold``.
    Label and PnL columns are excluded from the features. Row order is kept
    and treated as time order.

    Returns
    -------
    (FeatureMatrix, labels, pnl) where ``pnl`` is None without a PnL column.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such data file: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, header row expected") from None
        seen = set()
        for name in header:
            if name in seen:
                raise DataError(f"{path}: duplicate column name {name!r} in header")
            seen.add(name)
        rows = []
        for row_no, row in enumerate(reader, start=1):
            line = reader.line_num
            if len(row) != len(header):
                raise DataError(
                    f"{path}: row {row_no} (line {line}) has {len(row)} cells, "
                    f"expected {len(header)}")
            rows.append([_parse_cell(cell, row_no, line, header[j])
                         for j, cell in enumerate(row)])

    table = np.array(rows, dtype=float).reshape(len(rows), len(header))
    has_label = label_column in header
    if not has_label and pnl_column is None:
        raise DataError(f"{path}: missing label column {label_column!r}")
    if pnl_column is not None and pnl_column not in header:
        raise DataError(f"{path}: missing pnl column {pnl_column!r}")

    pnl = table[:, header.index(pnl_column)].copy() if pnl_column else None
    if has_label:
        j = header.index(label_column)
        raw = table[:, j]
        bad = np.flatnonzero((raw != 0.0) & (raw != 1.0))
        if bad.size:
            raise DataError(
                f"{path}: label value {raw[bad[0]]!r} at row {bad[0] + 1}, "
                f"column {label_column!r} is not 0/1")
        labels = raw.astype(np.int8)
    else:
        labels = (pnl > pnl_threshold).astype(np.int8)

    excluded = {label_column, pnl_column}
    keep = [j for j, name in enumerate(header) if name not in excluded]
    X = FeatureMatrix(table[:, keep], tuple(header[j] for j in keep))
    return X, labels, pnl


def write_csv(path, X: FeatureMatrix, labels=None, pnl=None,
              label_column: str = "label", pnl_column: str = "pnl") -> None:
    """Write a table readable by :func:`load_csv`; floats use shortest round-trip repr."""
    header = list(X.column_names)
    extra = []
    if labels is not None:
        header.append(label_column)
        extra.append([str(int(v)) for v in labels])
    if pnl is not None:
        header.append(pnl_column)
        extra.append([repr(float(v)) for v in pnl])
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for i, row in enumerate(X.values):
            writer.writerow([repr(float(v)) for v in row] + [col[i] for col in extra])


# -- block structure -------------------------------------------------------

def infer_blocks(column_names: Sequence[str]) -> BlockSpec:
    """Group ``<base>__<lag>`` columns into blocks ordered by lag.

    Columns without the suffix become singles. Blocks appear in order of
    first occurrence of their base name.
    """
    groups: dict[str, list[tuple[int, int]]] = {}
    singles = []
    for idx, name in enumerate(column_names):
        m = _LAG_RE.match(name)
        if m is None:
            singles.append(idx)
            continue
        base, lag = m.group("base"), int(m.group("lag"))
        members = groups.setdefault(base, [])
        if any(l == lag for l, _ in members):
            raise DataError(f"duplicate (base, lag) pair ({base!r}, {lag})")
        members.append((lag, idx))
    blocks = tuple((base, tuple(i for _, i in sorted(members)))
                   for base, members in groups.items())
    return BlockSpec(blocks=blocks, singles=tuple(singles))


def load_block_map(path, column_names: Sequence[str]) -> BlockSpec:
    """Read a JSON sidecar ``{"blocks": {name: [col, ...]}, "singles": [col, ...]}``."""
    with Path(path).open() as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict) or "blocks" not in doc:
        raise DataError(f"{path}: block map needs a 'blocks' object")
    index = {name: i for i, name in enumerate(column_names)}

    def lookup(col):
        if col not in index:
            raise DataError(f"{path}: unknown column {col!r} in block map")
        return index[col]

    blocks = tuple((name, tuple(lookup(c) for c in cols))
                   for name, cols in doc["blocks"].items())
    singles = tuple(lookup(c) for c in doc.get("singles", []))
    return BlockSpec(blocks=blocks, singles=singles)


def write_block_map(path, spec: BlockSpec, column_names: Sequence[str]) -> None:
    doc = {
        "blocks": {name: [column_names[i] for i in members]
                   for name, members in spec.blocks},
        "singles": [column_names[i] for i in spec.singles],
    }
    with Path(path).open("w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


# -- splitting -------------------------------------------------------------

def split_indices(n_samples: int, spec: SplitSpec) -> tuple[np.ndarray, np.ndarray]:
    """Row indices ``(train, test)``, each sorted ascending."""
    n_test = math.ceil(spec.test_fraction * n_samples)
    if n_test < 1 or n_test >= n_samples:
        raise DataError(
            f"split of {n_samples} rows at fraction {spec.test_fraction} "
            "leaves an empty part")
    if spec.mode == "temporal":
        return np.arange(n_samples - n_test), np.arange(n_samples - n_test, n_samples)
    perm = np.random.default_rng(spec.seed).permutation(n_samples)
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])


def split(X: FeatureMatrix, y, spec: SplitSpec):
    """Return ``((X_train, y_train), (X_test, y_test))``."""
    y = np.asarray(y)
    if len(y) != X.n_samples:
        raise DataError(f"{len(y)} labels for {X.n_samples} samples")
    train, test = split_indices(X.n_samples, spec)
    return (X.take(train), y[train]), (X.take(test), y[test])


# -- masks -----------------------------------------------------------------

def counts_to_mask(counts: BlockCountVector, importance, spec: BlockSpec) -> np.ndarray:
    """Keep the ``k_i`` most important members of every block.

    Ties in importance keep the lower column index. Singles are all on iff
    ``counts.singles_included``.
    """
    importance = np.asarray(importance, dtype=float)
    if importance.shape != (spec.n_features,):
        raise DataError(
            f"importance has shape {importance.shape}, expected ({spec.n_features},)")
    counts.validate(spec)
    mask = np.zeros(spec.n_features, dtype=np.int8)
    for k, (_, members) in zip(counts.counts, spec.blocks):
        members = np.asarray(members)
        # lexsort: last key is primary; -importance descending, then column index
        order = np.lexsort((members, -importance[members]))
        mask[members[order[:k]]] = 1
    if counts.singles_included:
        mask[list(spec.singles)] = 1
    return mask


def mask_to_json(mask, column_names: Sequence[str]) -> dict:
    mask = [int(b) for b in mask]
    if len(mask) != len(column_names):
        raise DataError("mask length does not match column names")
    return {
        "columns": list(column_names),
        "mask": mask,
        "selected": [c for c, b in zip(column_names, mask) if b],
    }


def mask_from_json(doc: dict, column_names: Sequence[str] | None = None) -> np.ndarray:
    bits = doc["mask"]
    if any(b not in (0, 1) for b in bits):
        raise DataError("mask entries must be 0 or 1")
    if column_names is not None and list(doc["columns"]) != list(column_names):
        raise DataError("mask columns do not match the dataset columns")
    return np.asarray(bits, dtype=np.int8)
