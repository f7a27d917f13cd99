"""Plain-text result tables: CSV with '#' metadata lines, or JSON.

Floats are written with 17 significant digits so that a table read back
reproduces the numbers bit-exactly; Fractions become ``"p/q"`` strings.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from fractions import Fraction
from typing import Any, Mapping, Sequence


def format_value(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.17g}"
    if v is None:
        return ""
    return str(v)


def _jsonable(v: Any) -> Any:
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}"
    if isinstance(v, float) and not math.isfinite(v):
        return format_value(v)
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, Mapping):
        return {k: _jsonable(x) for k, x in v.items()}
    return v


def canonical_json(obj: Any) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, separators=(",", ":"))


def config_hash(config: Mapping[str, Any]) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()[:16]


def render_csv(columns: Sequence[str], rows: Sequence[Mapping[str, Any]],
               meta: Mapping[str, Any]) -> str:
    buf = io.StringIO()
    for k, v in meta.items():
        text = canonical_json(v) if isinstance(v, (dict, list)) else format_value(v)
        buf.write(f"# {k}: {text}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([format_value(row.get(c)) for c in columns])
    return buf.getvalue()


def render_json(columns: Sequence[str], rows: Sequence[Mapping[str, Any]],
                meta: Mapping[str, Any]) -> str:
    body = {"meta": meta, "columns": list(columns),
            "rows": [[row.get(c) for c in columns] for row in rows]}
    return json.dumps(_jsonable(body), indent=1) + "\n"


def parse_value(text: str) -> Any:
    """Inverse of :func:`format_value` for numeric cells."""
    if text == "":
        return None
    if text in ("true", "false"):
        return text == "true"
    if "/" in text:
        return Fraction(text)
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def read_csv(text: str) -> tuple[dict, list[dict]]:
    """Parse a table written by :func:`render_csv` into ``(meta, rows)``."""
    meta: dict[str, str] = {}
    body = []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition(": ")
            meta[key] = val
        else:
            body.append(line)
    reader = csv.DictReader(body)
    return meta, [{k: parse_value(v) for k, v in r.items()} for r in reader]
