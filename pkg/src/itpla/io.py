"""Reading and writing polygons, configs, placements and traces.

Every write is whole-file atomic: content goes to a temporary file in the
target directory which is then renamed over the destination.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from . import config as config_mod
from .geometry import SimplePolygon
from .model import ModuleShape, Placement
from .solver import RunTrace

TRACE_VERSION_LINE = "# itpla-trace v1"
TRACE_COLUMNS = ("iteration", "module_count", "total_overlap", "total_misplacement", "event")
PLACEMENT_FORMAT = "itpla-placement v1"
DIGITS = 12


class InputError(ValueError):
    """Malformed input file; the message names the file and field."""


def fmt(value: float) -> str:
    return f"{float(value):.{DIGITS}g}"


def atomic_write(path, data: str | bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": ""})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read_json(path, what: str):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"{path}: cannot read {what}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def polygon_from_dict(data, source: str = "<polygon>") -> SimplePolygon:
    if not isinstance(data, dict):
        raise InputError(f"{source}: expected an object with a 'vertices' field")
    if "vertices" not in data:
        raise InputError(f"{source}: missing field 'vertices'")
    verts = data["vertices"]
    if not isinstance(verts, list):
        raise InputError(f"{source}: field 'vertices' must be a list of [x, y] pairs")
    for k, v in enumerate(verts):
        if (not isinstance(v, list) or len(v) != 2
                or not all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in v)):
            raise InputError(f"{source}: vertices[{k}] must be a pair of numbers, got {v!r}")
    name = data.get("name")
    if name is not None and not isinstance(name, str):
        raise InputError(f"{source}: field 'name' must be a string")
    units = data.get("units")
    if units is not None and not isinstance(units, str):
        raise InputError(f"{source}: field 'units' must be a string")
    try:
        return SimplePolygon(verts, name=name)
    except ValueError as exc:
        raise InputError(f"{source}: vertices: {exc}") from None


def load_polygon(path) -> SimplePolygon:
    poly = polygon_from_dict(_read_json(path, "polygon"), str(path))
    if poly.name is None:
        poly.name = Path(path).stem
    return poly


def polygon_to_dict(polygon: SimplePolygon) -> dict:
    out = {"vertices": [[float(x), float(y)] for x, y in polygon.vertices]}
    if polygon.name:
        out["name"] = polygon.name
    return out


def load_config(path, shape: ModuleShape):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"{path}: cannot read config: {exc.strerror}") from None
    try:
        return config_mod.load(text, shape)
    except config_mod.ConfigError as exc:
        raise InputError(f"{path}: {exc}") from None


def placement_to_dict(placement: Placement, **meta) -> dict:
    shape = placement.shape
    modules = [
        {"id": int(i), "kind": shape.kind.value, "size": float(shape.size),
         "x": float(fmt(c[0])), "y": float(fmt(c[1])), "theta": float(fmt(t))}
        for i, c, t in zip(placement.ids, placement.centers, placement.thetas)
    ]
    doc = {"format": PLACEMENT_FORMAT, "polygon": polygon_to_dict(placement.polygon),
           "shape": {"kind": shape.kind.value, "size": float(shape.size)}}
    doc.update(meta)
    doc["modules"] = modules
    return doc


def dumps_placement(placement: Placement, **meta) -> str:
    return json.dumps(placement_to_dict(placement, **meta), indent=2, sort_keys=False) + "\n"


def save_placement(placement: Placement, path, **meta) -> None:
    atomic_write(path, dumps_placement(placement, **meta))


def placement_from_dict(data, source: str = "<placement>") -> Placement:
    if not isinstance(data, dict):
        raise InputError(f"{source}: expected a placement object")
    for key in ("polygon", "shape", "modules"):
        if key not in data:
            raise InputError(f"{source}: missing field '{key}'")
    polygon = polygon_from_dict(data["polygon"], f"{source}: polygon")
    sh = data["shape"]
    try:
        shape = ModuleShape(sh["kind"], float(sh["size"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{source}: shape: {exc}") from None
    ids, centers, thetas = [], [], []
    for k, rec in enumerate(data["modules"]):
        try:
            if rec["kind"] != shape.kind.value or float(rec["size"]) != shape.size:
                raise InputError(f"{source}: modules[{k}]: kind/size differ from the placement shape")
            ids.append(int(rec["id"]))
            centers.append([float(rec["x"]), float(rec["y"])])
            thetas.append(float(rec["theta"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"{source}: modules[{k}]: {exc}") from None
    if len(set(ids)) != len(ids):
        raise InputError(f"{source}: duplicate module ids")
    return Placement(polygon, shape, np.array(ids, dtype=int),
                     np.array(centers, dtype=float).reshape(-1, 2), np.array(thetas, dtype=float))


def load_placement(path) -> Placement:
    return placement_from_dict(_read_json(path, "placement"), str(path))


def quantize(placement: Placement) -> Placement:
    """The placement exactly as it reads back from its serialized form."""
    return placement_from_dict(json.loads(dumps_placement(placement)))


def trace_rows(trace: RunTrace) -> list[list[str]]:
    return [[str(r.iteration), str(r.module_count), fmt(r.total_overlap),
             fmt(r.total_misplacement), r.event] for r in trace.records]


def dumps_trace(trace: RunTrace) -> str:
    buf = io.StringIO()
    buf.write(TRACE_VERSION_LINE + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRACE_COLUMNS)
    writer.writerows(trace_rows(trace))
    return buf.getvalue()


def save_trace(trace: RunTrace, path) -> None:
    atomic_write(path, dumps_trace(trace))


def read_trace(path) -> list[dict]:
    """Rows of a trace CSV as dicts with typed values."""
    with open(path, encoding="utf-8", newline="") as fh:
        first = fh.readline().rstrip("\n")
        if first != TRACE_VERSION_LINE:
            raise InputError(f"{path}: not an itpla trace (first line {first!r})")
        rows = []
        for rec in csv.DictReader(fh):
            rows.append({"iteration": int(rec["iteration"]), "module_count": int(rec["module_count"]),
                         "total_overlap": float(rec["total_overlap"]),
                         "total_misplacement": float(rec["total_misplacement"]),
                         "event": rec["event"]})
    return rows


def dumps_table(columns, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    writer.writerows(rows)
    return buf.getvalue()


__all__ = [
    "InputError", "atomic_write", "load_polygon", "polygon_from_dict", "polygon_to_dict",
    "load_config", "save_placement", "load_placement", "placement_to_dict", "placement_from_dict",
    "dumps_placement", "quantize", "save_trace", "dumps_trace", "read_trace", "dumps_table",
    "TRACE_VERSION_LINE", "TRACE_COLUMNS",
]
