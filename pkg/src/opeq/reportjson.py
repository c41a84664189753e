"""Canonical JSON for reports and problem digests.

Report files must be byte-identical across repeated identical invocations,
so serialization is pinned down: keys in sorted order, floats with 17
significant digits (enough to round-trip a double), two-space indentation,
"\n" line ends.  Non-finite floats are emitted as the strings "NaN",
"Infinity" and "-Infinity" to keep files parseable everywhere.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math

import numpy as np

from .grid import GridFunction


def to_jsonable(obj):
    """Recursively convert reports/dataclasses/arrays into plain JSON data."""
    if isinstance(obj, GridFunction):
        return [float(v) for v in obj.values]
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {
            f.name: to_jsonable(getattr(obj, f.name))
            for f in dataclasses.fields(obj)
            if not f.name.startswith("_")
        }
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (bool, int, float, str)) or obj is None:
        return obj
    raise TypeError(f"cannot serialize {type(obj).__name__} into a report")


def _format_float(value: float) -> str:
    if math.isnan(value):
        return '"NaN"'
    if math.isinf(value):
        return '"Infinity"' if value > 0 else '"-Infinity"'
    return format(value, ".17g")


def _dump(obj, indent: int, out: list[str]) -> None:
    pad = "  " * indent
    child_pad = "  " * (indent + 1)
    if obj is None:
        out.append("null")
    elif isinstance(obj, bool):
        out.append("true" if obj else "false")
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        out.append(_format_float(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=True))
    elif isinstance(obj, list):
        if not obj:
            out.append("[]")
            return
        out.append("[\n")
        for i, item in enumerate(obj):
            out.append(child_pad)
            _dump(item, indent + 1, out)
            out.append(",\n" if i + 1 < len(obj) else "\n")
        out.append(pad + "]")
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        keys = sorted(obj)
        for i, key in enumerate(keys):
            out.append(child_pad + json.dumps(str(key), ensure_ascii=True) + ": ")
            _dump(obj[key], indent + 1, out)
            out.append(",\n" if i + 1 < len(keys) else "\n")
        out.append(pad + "}")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def canonical_dumps(obj) -> str:
    """Deterministic JSON text: sorted keys, .17g floats, 2-space indent."""
    out: list[str] = []
    _dump(to_jsonable(obj), 0, out)
    out.append("\n")
    return "".join(out)


def canonical_bytes(obj) -> bytes:
    return canonical_dumps(obj).encode("utf-8")


def problem_digest(model) -> str:
    """sha256 of the canonical JSON of the effective problem description."""
    return hashlib.sha256(canonical_bytes(model.model_dump(mode="json"))).hexdigest()
