"""Reading and writing matrices and prediction files.

Matrix JSON::

    {"labels": ["neg", "pos"], "matrix": [[15, 5], [10, 10]]}

Prediction files are CSV or TSV with a header naming ``gold`` and ``pred``
columns; any other column (such as ``id``) is ignored.
"""
from __future__ import annotations

import csv
import io
import json
import os
from pathlib import Path

import numpy as np

from .exceptions import ClfEvalError, EmptyInputError, InputFormatError, UnknownLabelError
from .matrix import ConfusionMatrix, LabelSpace, as_matrix

__all__ = [
    "matrix_to_dict",
    "matrix_from_dict",
    "dumps_matrix",
    "loads_matrix",
    "read_matrix_json",
    "write_matrix_json",
    "detect_separator",
    "parse_predictions",
    "read_predictions",
    "load_matrix",
]


def _number(v: float):
    v = float(v)
    return int(v) if v.is_integer() and abs(v) < 2**53 else v


def matrix_to_dict(m) -> dict:
    m = as_matrix(m).to_float()
    return {"labels": list(m.labels.labels), "matrix": [[_number(v) for v in row] for row in m.cells]}


def matrix_from_dict(data: dict) -> ConfusionMatrix:
    if not isinstance(data, dict) or "matrix" not in data:
        raise InputFormatError('matrix JSON needs a "matrix" field')
    cells = data["matrix"]
    try:
        arr = np.array(cells, dtype=np.float64)
    except (TypeError, ValueError):
        raise InputFormatError('"matrix" must be a square list of numbers') from None
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise InputFormatError('"matrix" must be a square list of rows')
    labels = data.get("labels")
    labels = LabelSpace.default(arr.shape[0]) if labels is None else LabelSpace(tuple(str(x) for x in labels))
    return ConfusionMatrix(labels, arr)


def dumps_matrix(m, **kw) -> str:
    return json.dumps(matrix_to_dict(m), **kw)


def loads_matrix(text: str) -> ConfusionMatrix:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputFormatError(f"invalid JSON: {exc.msg}", exc.lineno) from None
    return matrix_from_dict(data)


def read_matrix_json(path) -> ConfusionMatrix:
    return loads_matrix(Path(path).read_text())


def write_matrix_json(m, path) -> None:
    Path(path).write_text(dumps_matrix(m, indent=2) + "\n")


def detect_separator(header: str) -> str:
    """Tab if the header line contains one, otherwise comma."""
    return "\t" if "\t" in header else ","


def parse_predictions(text: str, labels=None, sep: str | None = None) -> ConfusionMatrix:
    """Count a gold/pred table into a confusion matrix.

    With ``labels`` given, any other label is an error naming its line;
    without, the sorted union of observed labels is used.
    """
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise EmptyInputError("prediction file is empty")
    sep = detect_separator(lines[0]) if sep is None else sep
    reader = csv.reader(io.StringIO(text), delimiter=sep)
    header = [h.strip().lower() for h in next(reader)]
    try:
        gi, pi = header.index("gold"), header.index("pred")
    except ValueError:
        raise InputFormatError(f"header must name gold and pred columns, got {header}", 1) from None
    if labels is not None and not isinstance(labels, LabelSpace):
        labels = LabelSpace(tuple(str(x) for x in labels))
    known = None if labels is None else set(labels.labels)
    pairs = []
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise InputFormatError(f"expected {len(header)} fields, found {len(row)}", line)
        gold, pred = row[gi].strip(), row[pi].strip()
        if not gold or not pred:
            raise InputFormatError("empty gold or pred value", line)
        if known is not None:
            for lab in (gold, pred):
                if lab not in known:
                    raise UnknownLabelError(lab, line)
        pairs.append((gold, pred))
    if not pairs:
        raise EmptyInputError("prediction file has no data rows")
    if labels is None:
        labels = LabelSpace.infer([x for p in pairs for x in p])
    index = {lab: k for k, lab in enumerate(labels.labels)}
    cells = np.zeros((labels.n, labels.n))
    for gold, pred in pairs:
        cells[index[pred], index[gold]] += 1
    return ConfusionMatrix(labels, cells)


def read_predictions(path, labels=None, sep: str | None = None) -> ConfusionMatrix:
    return parse_predictions(Path(path).read_text(), labels, sep)


def load_matrix(path, labels=None, sep: str | None = None) -> ConfusionMatrix:
    """Matrix JSON (``.json`` or content starting with ``{``) or a prediction file."""
    path = os.fspath(path)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ClfEvalError(f"cannot read {path}: {exc.strerror}") from None
    if path.endswith(".json") or text.lstrip().startswith("{"):
        m = loads_matrix(text)
        if labels is not None:
            wanted = labels if isinstance(labels, LabelSpace) else LabelSpace(tuple(str(x) for x in labels))
            if wanted != m.labels:
                raise ClfEvalError(f"matrix labels {list(m.labels)} differ from --labels {list(wanted)}")
        return m
    return parse_predictions(text, labels, sep)
