"""Byte-stable JSON output.

Floats are rounded to 12 significant digits before encoding, so parsing a
written file and writing it again reproduces the same bytes. Key order is
insertion order, never sorted.
"""
from __future__ import annotations

import enum
import json
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable

FLOAT_DIGITS = 12


def canonical(obj: Any) -> Any:
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return obj
    if isinstance(obj, float):
        return float(f"{obj:.{FLOAT_DIGITS}g}")
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, enum.Enum):
        return canonical(obj.value)
    if isinstance(obj, dict):
        return {str(k): canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [canonical(v) for v in obj]
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj: Any) -> str:
    """Pretty, stable encoding for single-object files."""
    return json.dumps(canonical(obj), indent=2, allow_nan=False) + "\n"


def dumps_line(obj: Any) -> str:
    return json.dumps(canonical(obj), separators=(",", ":"), allow_nan=False)


def write_json(path: str | Path, obj: Any) -> None:
    Path(path).write_text(dumps(obj), encoding="utf-8")


def write_jsonl(path: str | Path, records: Iterable[Any]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(dumps_line(rec) + "\n")


def read_jsonl(path: str | Path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]
