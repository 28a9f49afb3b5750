"""CSV and JSON writers: 17 significant digits, ``NA`` for undefined cells."""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np


def fmt(value) -> str:
    if value is None:
        return "NA"
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    v = float(value)
    if math.isnan(v):
        return "NA"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.17g}"


def write_csv(path, columns, data) -> Path:
    """Write equal-length column arrays under a single header row."""
    path = Path(path)
    n = len(data[0]) if data else 0
    if any(len(col) != n for col in data):
        raise ValueError("columns differ in length")
    lines = [",".join(columns)]
    for i in range(n):
        lines.append(",".join(fmt(col[i]) for col in data))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_csv(path):
    """Read a file written by :func:`write_csv` into ``{column: float array}``."""
    text = Path(path).read_text().splitlines()
    header = text[0].split(",")
    rows = [line.split(",") for line in text[1:] if line]
    out = {}
    for j, name in enumerate(header):
        out[name] = np.array([math.nan if r[j] == "NA" else float(r[j]) for r in rows])
    return out


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)) or obj is None or isinstance(obj, str):
        return obj if not isinstance(obj, np.bool_) else bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return None if not math.isfinite(v) else float(f"{v:.17g}")
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True)


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(dumps(obj) + "\n")
    return path
