"""CSV ingestion and report documents."""

from __future__ import annotations

import csv
import hashlib
import json
import operator
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from . import __version__
from .data import Dataset, validate_dataset
from .errors import ConfigError, DataError

Column = Union[str, int]


@dataclass(frozen=True)
class CsvSchema:
    y_column: Column = 0
    x_columns: Sequence[Column] = (1,)
    header: bool = True
    delimiter: str = ","

    def __post_init__(self):
        object.__setattr__(self, "x_columns", tuple(self.x_columns))
        if not self.x_columns:
            raise ConfigError("at least one x column is required")
        if self.y_column in self.x_columns:
            raise ConfigError(f"y column {self.y_column!r} is also listed as an x column")
        if len(self.delimiter) != 1:
            raise ConfigError("delimiter must be a single character")

    def to_dict(self):
        return {"y_column": self.y_column, "x_columns": list(self.x_columns),
                "header": self.header, "delimiter": self.delimiter}


def _resolve(col: Column, names) -> int:
    if isinstance(col, int):
        if names is not None and not (0 <= col < len(names)):
            raise DataError(f"missing column: index {col} out of range")
        return col
    if names is None:
        if str(col).isdigit():
            return int(col)
        raise DataError(f"missing column {col!r}: file has no header")
    if col in names:
        return names.index(col)
    if str(col).isdigit():
        return int(col)
    raise DataError(f"missing column {col!r}; available: {', '.join(names)}")


_FILTER = re.compile(r"^\s*([^<>=!\s]+)\s*(<=|>=|==|!=|<|>)\s*(\S+)\s*$")
_OPS = {"<": operator.lt, "<=": operator.le, ">": operator.gt, ">=": operator.ge,
        "==": operator.eq, "!=": operator.ne}


def parse_filter(expr: str):
    """``"loan>=1000,wave==2"`` -> list of (column, op, value); clauses are ANDed."""
    clauses = []
    for part in expr.split(","):
        if not part.strip():
            continue
        m = _FILTER.match(part)
        if not m:
            raise ConfigError(f"cannot parse filter clause {part!r}")
        try:
            value = float(m.group(3))
        except ValueError:
            raise ConfigError(f"filter value must be numeric: {part!r}") from None
        clauses.append((m.group(1), m.group(2), value))
    return clauses


def read_table(path, schema: CsvSchema):
    """Return (header names or None, list of (line number, row))."""
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh, delimiter=schema.delimiter))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    except csv.Error as exc:
        raise DataError(f"malformed CSV in {path}: {exc}") from None
    numbered = [(i + 1, r) for i, r in enumerate(rows) if r and any(c.strip() for c in r)]
    if not numbered:
        raise DataError(f"{path} is empty")
    names = None
    if schema.header:
        names = [c.strip() for c in numbered[0][1]]
        numbered = numbered[1:]
        if not numbered:
            raise DataError(f"{path} has a header but no data rows")
    return names, numbered


def ingest_csv(path, schema: CsvSchema, row_filter: str = None) -> Dataset:
    names, rows = read_table(path, schema)
    yi = _resolve(schema.y_column, names)
    xi = [_resolve(c, names) for c in schema.x_columns]
    clauses = [(_resolve(c, names), _OPS[op], v) for c, op, v in
               (parse_filter(row_filter) if row_filter else [])]
    needed = sorted({yi, *xi, *(c for c, _, _ in clauses)})
    values = []
    for line, row in rows:
        rec = {}
        for c in needed:
            if c >= len(row):
                raise DataError(f"row {line} has {len(row)} fields; column {c + 1} missing")
            try:
                rec[c] = float(row[c])
            except ValueError:
                raise DataError(
                    f"parse error at row {line}, column {c + 1}: {row[c]!r} is not a number"
                ) from None
        if all(op(rec[c], v) for c, op, v in clauses):
            values.append(rec)
    if not values:
        raise DataError("no rows left after filtering")
    y = [r[yi] for r in values]
    x = [[r[c] for c in xi] for r in values]
    cols = [names[c] for c in xi] if names else [str(c) for c in xi]
    return validate_dataset(y, x, cols)


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def report_document(kind: str, body: dict, config: dict, input_path=None, **extra) -> dict:
    doc = {
        "kind": kind,
        "software": {"name": "curvtest", "version": __version__},
        "config": config,
        "result": body,
    }
    if input_path is not None:
        doc["input"] = {"path": str(input_path), "sha256": file_sha256(input_path)}
    doc.update(extra)
    return doc


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=False, default=_default) + "\n"


def _default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")
