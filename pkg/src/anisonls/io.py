"""AGF1 field files and JSON reports.

AGF1 layout (little-endian): magic ``b"AGF1"``, ``u32 nx``, ``u32 ny``,
``f64 half_length_x``, ``f64 half_length_y``, ``f64 s``, then ``nx * ny``
``f64`` values with y as the slow index. Round trips are bit exact.

JSON floats are written with 17 significant digits; non-finite floats are
written as ``null``.
"""

import json
import math
import struct
from importlib import resources
from pathlib import Path

import numpy as np

from .grid import Field, Grid

MAGIC = b"AGF1"
_HEADER = struct.Struct("<4sIIddd")


def write_agf1(path, field, s):
    """Write ``field`` (with its grid and the order ``s``) to ``path``."""
    grid = field.grid
    header = _HEADER.pack(MAGIC, grid.nx, grid.ny, grid.half_length_x, grid.half_length_y, float(s))
    values = np.ascontiguousarray(field.values, dtype="<f8")
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(header)
        fh.write(values.tobytes())
    return path


def read_agf1(path):
    """Read an AGF1 file; returns ``(Field, s)``."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError(f"{path}: too short for an AGF1 header")
    magic, nx, ny, lx, ly, s = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    expected = _HEADER.size + 8 * nx * ny
    if len(data) != expected:
        raise ValueError(f"{path}: expected {expected} bytes for a {nx}x{ny} field, found {len(data)}")
    values = np.frombuffer(data, dtype="<f8", offset=_HEADER.size).reshape(ny, nx).astype(float)
    return Field(Grid(lx, ly, nx, ny), values), s


def _plain(value):
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value)
    if value is None or isinstance(value, str):
        return value
    raise TypeError(f"cannot serialize {type(value).__name__}")


def _emit(value, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {_emit(v, indent, level + 1)}" for k, v in value.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(value, list):
        if not value:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in value):
            return "[" + ", ".join(_emit(v, indent, level + 1) for v in value) + "]"
        return "[\n" + ",\n".join(pad + _emit(v, indent, level + 1) for v in value) + "\n" + end + "]"
    if isinstance(value, bool) or value is None:
        return json.dumps(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            return "null"
        text = format(value, ".17g")
        # keep floats recognizable as floats after a round trip
        return text if any(c in text for c in ".en") else text + ".0"
    return json.dumps(value)


def dumps(obj, indent=2):
    """JSON text with every float at 17 significant digits."""
    return _emit(_plain(obj), indent, 0) + "\n"


def write_json(path, obj):
    path = Path(path)
    path.write_text(dumps(obj))
    return path


def read_json(path):
    return json.loads(Path(path).read_text())


SCHEMAS = ("scalar_report", "solve_report", "sweep_summary", "constants", "fiber_scan", "verify")


def load_schema(name):
    """JSON schema of an emitted report; ``name`` is one of :data:`SCHEMAS` or ``"_defs"``."""
    if name not in SCHEMAS and name != "_defs":
        raise KeyError(f"unknown schema {name!r}; known: {', '.join(SCHEMAS)}")
    text = resources.files("anisonls").joinpath("schemas", f"{name}.json").read_text()
    return json.loads(text)
