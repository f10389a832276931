"""Model files and reports (JSON text).

Model file layout::

    {
      "d": 2,
      "L": 2,
      "label": "quartic d=2",
      "f_derivatives": {"4": [[[1, 1, 1, 1], 1.0], [[1, 1, 2, 2], 0.3333333333333333]]},
      "log_g_derivatives": {},
      "source": {"name": "quartic", "params": {"d": 2, "L": 2}}
    }

Index lists are 1-based and sorted, one entry per permutation class. Floats are
written with ``repr`` so reading a file back gives bit-identical values.
``source`` is optional; when present the CLI rebuilds the exact integrand.
"""
from __future__ import annotations

import json
import math
from typing import Any

from .model import Model
from .tensor import SymTensor

SCHEMA_VERSION = 1


class ModelFileError(ValueError):
    """Malformed model file; the message names the offending field."""


def _num(x: float) -> str:
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"non-finite value {x}")
    return repr(x)


def dumps_model(model: Model, source: dict | None = None) -> str:
    lines = ["{", f'  "d": {model.d},', f'  "L": {model.L},', f'  "label": {json.dumps(model.label)},']
    for key, tensors in (("f_derivatives", model.f_tensors), ("log_g_derivatives", model.logg_tensors)):
        blocks = []
        for k, T in tensors.items():
            rows = [f"      [{json.dumps([i + 1 for i in idx])}, {_num(v)}]" for idx, v in T.items()]
            if rows:
                blocks.append(f'    "{k}": [\n' + ",\n".join(rows) + "\n    ]")
            else:
                blocks.append(f'    "{k}": []')
        body = "{\n" + ",\n".join(blocks) + "\n  }" if blocks else "{}"
        lines.append(f'  "{key}": {body},')
    if source is not None:
        lines.append(f'  "source": {json.dumps(source, sort_keys=True)},')
    lines[-1] = lines[-1].rstrip(",")
    lines.append("}")
    return "\n".join(lines) + "\n"


def _require(doc: dict, key: str, kind, path: str):
    if key not in doc:
        raise ModelFileError(f"{path}{key}: missing required field")
    val = doc[key]
    if kind is int and (isinstance(val, bool) or not isinstance(val, int)):
        raise ModelFileError(f"{path}{key}: expected an integer, got {val!r}")
    if kind is dict and not isinstance(val, dict):
        raise ModelFileError(f"{path}{key}: expected an object")
    return val


def _parse_tensors(block: dict, field: str, d: int, lo: int, hi: int) -> dict:
    out = {}
    for order_str, entries in block.items():
        where = f'{field}["{order_str}"]'
        try:
            k = int(order_str)
        except ValueError:
            raise ModelFileError(f"{where}: order must be an integer string") from None
        if not lo <= k <= hi:
            raise ModelFileError(f"{where}: order {k} outside {lo}..{hi}")
        if not isinstance(entries, list):
            raise ModelFileError(f"{where}: expected a list of [indices, value] pairs")
        values, seen = {}, {}
        for j, item in enumerate(entries):
            at = f"{where}[{j}]"
            if not (isinstance(item, list) and len(item) == 2 and isinstance(item[0], list)):
                raise ModelFileError(f"{at}: expected [index-list, value]")
            idx, val = item
            if len(idx) != k:
                raise ModelFileError(f"{at}: index list has length {len(idx)}, expected {k}")
            if any(isinstance(i, bool) or not isinstance(i, int) or not 1 <= i <= d for i in idx):
                raise ModelFileError(f"{at}: indices must be integers in 1..{d}")
            if list(idx) != sorted(idx):
                raise ModelFileError(f"{at}: index list {idx} is not sorted")
            if isinstance(val, bool) or not isinstance(val, (int, float)) or not math.isfinite(val):
                raise ModelFileError(f"{at}: value must be a finite number")
            key = tuple(i - 1 for i in idx)
            if key in seen:
                raise ModelFileError(f"{at}: duplicates the permutation class of entry {seen[key]}")
            seen[key] = j
            values[key] = float(val)
        out[k] = SymTensor(k, d, values)
    return out


def parse_model_doc(doc: Any) -> tuple[Model, dict | None]:
    if not isinstance(doc, dict):
        raise ModelFileError("top level: expected an object")
    d = _require(doc, "d", int, "")
    L = _require(doc, "L", int, "")
    if d < 1:
        raise ModelFileError("d: must be >= 1")
    if L < 1:
        raise ModelFileError("L: must be >= 1")
    f_t = _parse_tensors(_require(doc, "f_derivatives", dict, ""), "f_derivatives", d, 3, 2 * L + 1)
    g_t = _parse_tensors(_require(doc, "log_g_derivatives", dict, ""), "log_g_derivatives", d, 1, 2 * L - 1)
    label = doc.get("label", "")
    if not isinstance(label, str):
        raise ModelFileError("label: expected a string")
    source = doc.get("source")
    if source is not None and not (isinstance(source, dict) and "name" in source):
        raise ModelFileError("source: expected an object with a 'name'")
    return Model(d, L, f_t, g_t, label), source


def loads_model(text: str) -> tuple[Model, dict | None]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return parse_model_doc(doc)


def check_finite(obj: Any, path: str = "report"):
    """Raise if any number in a nested report is NaN or infinite."""
    if isinstance(obj, float) and not math.isfinite(obj):
        raise ValueError(f"{path}: non-finite value {obj}")
    if isinstance(obj, dict):
        for k, v in obj.items():
            check_finite(v, f"{path}.{k}")
    elif isinstance(obj, (list, tuple)):
        for i, v in enumerate(obj):
            check_finite(v, f"{path}[{i}]")


def dumps_report(report: dict) -> str:
    doc = {"schema_version": SCHEMA_VERSION, **report}
    check_finite(doc)
    return json.dumps(doc, indent=2, allow_nan=False, ensure_ascii=False) + "\n"


SWEEP_HEADER = ("d", "lambda", "L", "logI_oracle", "logI_expansion", "remainder", "oracle_stderr")


def sweep_csv(rows) -> str:
    """Locale-independent CSV: ``repr`` floats, ``\\n`` line endings."""
    out = [",".join(SWEEP_HEADER)]
    for r in rows:
        out.append(",".join([str(r.d), _num(r.lam), str(r.L), _num(r.log_I_oracle),
                             _num(r.log_I_expansion), _num(r.remainder), _num(r.oracle_std_error)]))
    return "\n".join(out) + "\n"
