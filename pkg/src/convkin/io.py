"""JSON readers and writers for every object type in the package."""

from __future__ import annotations

import json
from pathlib import Path

from .functions import EpiPolyhedral, MaxAffine, RadialProfile
from .geometry import AtomicSphereMeasure, Polytope
from .monge_ampere import AtomicMeasure, TestFunction

__all__ = ["function_from_dict", "object_from_dict", "load", "dump", "dumps"]


def function_from_dict(data):
    kind = data.get("type")
    n = int(data["dim"])
    if kind == "max_affine":
        pieces = data["pieces"]
        if not pieces:
            raise ValueError("max_affine needs at least one piece")
        return MaxAffine([p["a"] for p in pieces], [p["b"] for p in pieces])
    if kind == "epi_points":
        pts = data["points"]
        if not pts:
            raise ValueError("epi_points needs at least one point")
        f = EpiPolyhedral([p["p"] for p in pts], [p["c"] for p in pts])
    elif kind == "radial":
        f = RadialProfile(n, data["breaks"], data["values"])
        if "R" in data and abs(float(data["R"]) - f.R) > 1e-12 * max(1.0, f.R):
            raise ValueError("radial 'R' disagrees with the last break")
    else:
        raise ValueError(f"unknown function type {kind!r}")
    if f.dim != n:
        raise ValueError(f"declared dim {n} does not match the data ({f.dim})")
    return f


def object_from_dict(data):
    """Rebuild any supported object from its JSON dictionary."""
    if not isinstance(data, dict):
        raise ValueError("expected a JSON object")
    if "type" in data:
        return function_from_dict(data)
    if "vertices" in data:
        return Polytope.from_dict(data)
    if "atoms" in data:
        atoms = data["atoms"]
        if atoms and "z" in atoms[0]:
            return AtomicSphereMeasure.from_dict(data)
        return AtomicMeasure.from_dict(data)
    if "breaks" in data:
        return TestFunction.from_dict(data)
    raise ValueError("unrecognised object layout")


def load(path):
    """Parse a JSON file into the matching object."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: malformed JSON ({exc})") from exc
    try:
        return object_from_dict(data)
    except (KeyError, TypeError, IndexError) as exc:
        raise ValueError(f"{path}: malformed object ({exc!r})") from exc


def dumps(obj):
    data = obj if isinstance(obj, dict) else obj.to_dict()
    return json.dumps(data, indent=2)


def dump(obj, path):
    Path(path).write_text(dumps(obj) + "\n")
