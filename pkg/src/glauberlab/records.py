"""Canonical line records and CSV tables for every experiment output.

One record per line, schema-versioned, with the full resolved configuration
embedded so any output can be replayed from itself.  Serialization is
deliberately canonical (sorted keys, fixed separators, no timing data) so
that reruns, including reruns with a different worker count, are
byte-identical.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
from fractions import Fraction

import numpy as np

SCHEMA_VERSION = 1

# wall-clock fields never enter canonical output; reruns must match bytewise
NONCANONICAL_KEYS = ("wall_time",)


def sanitize(obj):
    """Recursively convert to plain JSON-serializable python data."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return sanitize(
            {
                f.name: getattr(obj, f.name)
                for f in dataclasses.fields(obj)
                if f.name not in NONCANONICAL_KEYS
            }
        )
    if isinstance(obj, dict):
        return {
            str(k): sanitize(v)
            for k, v in obj.items()
            if str(k) not in NONCANONICAL_KEYS
        }
    if isinstance(obj, (list, tuple)):
        return [sanitize(v) for v in obj]
    if isinstance(obj, Fraction):
        return f"{obj.numerator}/{obj.denominator}"
    if isinstance(obj, np.ndarray):
        return sanitize(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if obj is None or isinstance(obj, (bool, int, str)):
        return obj
    if isinstance(obj, float):
        return obj
    return str(obj)


def record_line(kind, config, payload):
    """One canonical output line: schema, kind, full config, payload."""
    body = {"schema": SCHEMA_VERSION, "kind": kind, "config": sanitize(config)}
    for key, value in sanitize(payload).items():
        if key in ("schema", "kind", "config"):
            raise ValueError(f"payload key {key!r} is reserved")
        body[key] = value
    return json.dumps(body, sort_keys=True, separators=(",", ":"))


def parse_record(line):
    rec = json.loads(line)
    if rec.get("schema") != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema {rec.get('schema')!r}")
    return rec


def csv_table(rows, columns=None):
    """Render dict rows as CSV text with a fixed column order."""
    rows = [sanitize(r) for r in rows]
    if columns is None:
        columns = []
        for r in rows:
            for k in r:
                if k not in columns:
                    columns.append(k)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(columns), extrasaction="ignore",
                            lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: _cell(r.get(k)) for k in columns})
    return buf.getvalue()


def _cell(value):
    if isinstance(value, (dict, list)):
        return json.dumps(value, sort_keys=True, separators=(",", ":"))
    return value
