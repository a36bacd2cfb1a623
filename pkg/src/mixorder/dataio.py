"""CSV input and JSON output helpers."""

from __future__ import annotations

import csv
import json
import math
from importlib import resources
from pathlib import Path

import numpy as np


class InputError(ValueError):
    """Malformed user input (bad file, bad cell, bad flag combination)."""


def read_csv(path) -> tuple[list[str], np.ndarray]:
    """Numeric CSV with a required header row. Rejects NaN/Inf and ragged rows."""
    path = Path(path)
    try:
        fh = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot open {path}: {exc.strerror}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path}: empty file, header row required") from None
        header = [h.strip() for h in header]
        if not header or any(not h for h in header):
            raise InputError(f"{path}: header row has empty column names")
        rows = []
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise InputError(f"{path}, line {line}: expected {len(header)} fields, got {len(row)}")
            vals = []
            for name, cell in zip(header, row):
                try:
                    v = float(cell)
                except ValueError:
                    raise InputError(f"{path}, line {line}: column {name!r} is not numeric: {cell!r}") from None
                if not math.isfinite(v):
                    raise InputError(f"{path}, line {line}: column {name!r} is not finite: {cell!r}")
                vals.append(v)
            rows.append(vals)
    if not rows:
        raise InputError(f"{path}: no data rows")
    return header, np.array(rows, dtype=float)


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_text(text: str, path=None, stream=None) -> None:
    if path is None:
        stream.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def load_schema(name: str) -> dict:
    """Shipped JSON schema, e.g. ``load_schema("selection_report")``."""
    text = resources.files("mixorder").joinpath("schemas", f"{name}.json").read_text(encoding="utf-8")
    return json.loads(text)
