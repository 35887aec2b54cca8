"""Deterministic text serialization for reports and CSV files.

Every float is written with 17 significant digits, which round-trips IEEE
double exactly and is reproducible across platforms. The JSON writer sorts
object keys so identical data always produces identical bytes.
"""
from __future__ import annotations

import math
from typing import Any


def format_float(x: float) -> str:
    """17-significant-digit decimal text; round-trips float64 exactly."""
    if not math.isfinite(x):
        raise ValueError(f"non-finite value cannot be serialized: {x!r}")
    return format(float(x), ".17g")


def _json_number(x: float) -> str:
    s = format_float(x)
    # keep an explicit decimal point so the value parses back as a float
    if "." not in s and "e" not in s and "E" not in s:
        s += ".0"
    return s


def _escape(s: str) -> str:
    out = ['"']
    for ch in s:
        if ch == '"':
            out.append('\\"')
        elif ch == "\\":
            out.append("\\\\")
        elif ch == "\n":
            out.append("\\n")
        elif ch == "\t":
            out.append("\\t")
        elif ch == "\r":
            out.append("\\r")
        elif ord(ch) < 0x20:
            out.append(f"\\u{ord(ch):04x}")
        else:
            out.append(ch)
    out.append('"')
    return "".join(out)


def json_dumps(obj: Any, indent: int = 2) -> str:
    """Byte-stable JSON: sorted keys, 17-digit floats, 2-space indent."""
    pieces: list[str] = []
    _write(obj, pieces, 0, indent)
    return "".join(pieces)


def _write(obj: Any, out: list[str], level: int, indent: int) -> None:
    pad = " " * (indent * (level + 1))
    close_pad = " " * (indent * level)
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        out.append(_json_number(obj))
    elif isinstance(obj, str):
        out.append(_escape(obj))
    elif isinstance(obj, dict):
        items = sorted(obj.items(), key=lambda kv: kv[0])
        if not items:
            out.append("{}")
            return
        out.append("{\n")
        for i, (key, value) in enumerate(items):
            if not isinstance(key, str):
                raise TypeError(f"JSON object keys must be strings, got {key!r}")
            out.append(pad)
            out.append(_escape(key))
            out.append(": ")
            _write(value, out, level + 1, indent)
            out.append(",\n" if i + 1 < len(items) else "\n")
        out.append(close_pad + "}")
    elif isinstance(obj, (list, tuple)):
        if not obj:
            out.append("[]")
            return
        out.append("[\n")
        for i, value in enumerate(obj):
            out.append(pad)
            _write(value, out, level + 1, indent)
            out.append(",\n" if i + 1 < len(obj) else "\n")
        out.append(close_pad + "]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__} to JSON")
