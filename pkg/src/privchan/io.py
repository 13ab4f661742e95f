"""JSON channel and query files.

Canonical form: keys sorted, floats written with 17 significant digits,
non-finite floats written as the strings ``"inf"``, ``"-inf"``, ``"nan"``.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from numbers import Integral, Real
from typing import Any

import numpy as np

from .core import ChannelMatrix, InfoUnit, QueryTable, RecordUniverse
from .errors import NonStochasticError, SchemaError, ValidationError


def _encode(obj: Any) -> str:
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, (np.integer, Integral)):
        return str(int(obj))
    if isinstance(obj, (np.floating, Real)):
        x = float(obj)
        if math.isnan(x):
            return '"nan"'
        if math.isinf(x):
            return '"inf"' if x > 0 else '"-inf"'
        return format(x, ".17g")
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist())
    if isinstance(obj, dict):
        items = sorted((str(k), v) for k, v in obj.items())
        return "{" + ", ".join(f"{json.dumps(k)}: {_encode(v)}" for k, v in items) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_encode(v) for v in obj) + "]"
    raise TypeError(f"cannot encode {type(obj).__name__}")


def dumps(obj: Any) -> str:
    """Canonical JSON text, newline-terminated."""
    return _encode(obj) + "\n"


# -- schema helpers --------------------------------------------------------


def _read_json(path) -> Any:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise SchemaError("", f"cannot read {os.fspath(path)}: {exc.strerror}") from exc
    try:
        return json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SchemaError("", f"not valid JSON: {exc}") from exc


def _require(doc, key, ptr=""):
    if key not in doc:
        raise SchemaError(f"{ptr}/{key}", "required field is missing")
    return doc[key]


def _check_keys(doc, allowed):
    if not isinstance(doc, dict):
        raise SchemaError("", "top level must be an object")
    extra = sorted(set(doc) - set(allowed))
    if extra:
        raise SchemaError(f"/{extra[0]}", "unknown field")


def _int(value, ptr, minimum=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaError(ptr, "expected an integer")
    if minimum is not None and value < minimum:
        raise SchemaError(ptr, f"must be at least {minimum}")
    return value


def _number(value, ptr):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(ptr, "expected a number")
    if not math.isfinite(value):
        raise SchemaError(ptr, "must be finite")
    return float(value)


def _list(value, ptr, length=None):
    if not isinstance(value, list):
        raise SchemaError(ptr, "expected an array")
    if length is not None and len(value) != length:
        raise SchemaError(ptr, f"expected {length} items, got {len(value)}")
    return value


def _universe(doc) -> RecordUniverse:
    sizes = _list(_require(doc, "universes"), "/universes")
    if not sizes:
        raise SchemaError("/universes", "must list at least one individual")
    sizes = [_int(s, f"/universes/{k}", minimum=1) for k, s in enumerate(sizes)]
    try:
        return RecordUniverse(tuple(sizes))
    except ValidationError as exc:
        raise SchemaError("/universes", str(exc)) from exc


def _matrix(value, ptr, rows, cols):
    value = _list(value, ptr, rows)
    out = np.empty((rows, cols))
    for r, row in enumerate(value):
        row = _list(row, f"{ptr}/{r}", cols)
        for c, x in enumerate(row):
            out[r, c] = _number(x, f"{ptr}/{r}/{c}")
    return out


# -- channel files ---------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ChannelFile:
    channel: ChannelMatrix
    name: str | None = None
    unit: InfoUnit | None = None

    def to_dict(self) -> dict:
        doc = {
            "universes": list(self.channel.universe.sizes),
            "output_size": self.channel.output_size,
            "matrix": self.channel.entries.tolist(),
        }
        if self.name is not None:
            doc["name"] = self.name
        if self.unit is not None:
            doc["unit"] = self.unit.value
        return doc


_CHANNEL_KEYS = {"universes", "output_size", "matrix", "name", "unit"}


def parse_channel(doc) -> ChannelFile:
    _check_keys(doc, _CHANNEL_KEYS)
    universe = _universe(doc)
    m = _int(_require(doc, "output_size"), "/output_size", minimum=1)
    entries = _matrix(_require(doc, "matrix"), "/matrix", m, universe.size)
    try:
        channel = ChannelMatrix(universe, entries)
    except NonStochasticError as exc:
        raise SchemaError("/matrix", str(exc)) from exc
    name = doc.get("name")
    if name is not None and not isinstance(name, str):
        raise SchemaError("/name", "expected a string")
    unit = doc.get("unit")
    if unit is not None:
        try:
            unit = InfoUnit(unit)
        except ValueError:
            raise SchemaError("/unit", "expected 'nats' or 'bits'") from None
    return ChannelFile(channel, name, unit)


def read_channel_file(path) -> ChannelFile:
    return parse_channel(_read_json(path))


def load_channel(path) -> ChannelMatrix:
    return read_channel_file(path).channel


def save_channel(channel: ChannelMatrix | ChannelFile, path) -> None:
    if isinstance(channel, ChannelMatrix):
        channel = ChannelFile(channel)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(channel.to_dict()))


# -- query files -----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class QueryFile:
    query: QueryTable
    distortion: np.ndarray | None = field(default=None, repr=False)
    values: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        doc = {
            "universes": list(self.query.universe.sizes),
            "output_size": self.query.output_size,
            "table": self.query.table.tolist(),
        }
        if self.distortion is not None:
            doc["distortion"] = self.distortion.tolist()
        if self.values is not None:
            doc["values"] = self.values.tolist()
        return doc


_QUERY_KEYS = {"universes", "output_size", "table", "distortion", "values", "name"}


def parse_query(doc) -> QueryFile:
    _check_keys(doc, _QUERY_KEYS)
    universe = _universe(doc)
    k = _int(_require(doc, "output_size"), "/output_size", minimum=1)
    table = _list(_require(doc, "table"), "/table", universe.size)
    for j, v in enumerate(table):
        _int(v, f"/table/{j}", minimum=0)
        if v >= k:
            raise SchemaError(f"/table/{j}", f"output index {v} not below output_size {k}")
    query = QueryTable(universe, k, np.asarray(table, dtype=np.int64))
    distortion = None
    if doc.get("distortion") is not None:
        distortion = _matrix(doc["distortion"], "/distortion", k, k)
        if np.any(distortion < 0):
            r, c = np.argwhere(distortion < 0)[0]
            raise SchemaError(f"/distortion/{r}/{c}", "distortion must be nonnegative")
    values = None
    if doc.get("values") is not None:
        raw = _list(doc["values"], "/values", universe.size)
        values = np.array([_number(v, f"/values/{j}") for j, v in enumerate(raw)])
    return QueryFile(query, distortion, values)


def load_query(path) -> QueryTable:
    return read_query_file(path).query


def read_query_file(path) -> QueryFile:
    return parse_query(_read_json(path))


def save_query(query: QueryTable | QueryFile, path) -> None:
    if isinstance(query, QueryTable):
        query = QueryFile(query)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(query.to_dict()))
