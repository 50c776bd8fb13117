# src/report.py
import csv
import io
import json
from fractions import Fraction
from typing import Dict, Iterable, List, Mapping


def render_fraction(value: Fraction) -> Dict:
    """Decimal and exact p/q rendering of a rational"""
    value = Fraction(value)
    return {"decimal": float(value), "exact": f"{value.numerator}/{value.denominator}"}


def to_json(payload) -> str:
    return json.dumps(payload, indent=2, sort_keys=True)


def _flatten(row: Mapping, prefix: str = "") -> Dict:
    flat = {}
    for key, value in row.items():
        name = f"{prefix}{key}"
        if isinstance(value, Mapping):
            flat.update(_flatten(value, prefix=f"{name}."))
        else:
            flat[name] = value
    return flat


def to_csv(rows: Iterable[Mapping]) -> str:
    """CSV with one column per (flattened) key, in first-seen order"""
    flat_rows: List[Dict] = [_flatten(r) for r in rows]
    fieldnames: List[str] = []
    for r in flat_rows:
        for key in r:
            if key not in fieldnames:
                fieldnames.append(key)
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=fieldnames, lineterminator="\n")
    writer.writeheader()
    writer.writerows(flat_rows)
    return buffer.getvalue()
