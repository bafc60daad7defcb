"""JSON/CSV serialization for grids, exponent fields and grid functions."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import DomainError
from .modular import GridDomain, GridFunction, NormResult
from .phi_core import ExponentField

__all__ = [
    "grid_to_json",
    "grid_from_json",
    "field_to_json",
    "field_from_json",
    "function_to_json",
    "function_from_json",
    "function_to_csv",
    "function_from_csv",
    "norm_result_to_json",
    "load_function",
    "save_function",
]


def grid_to_json(domain: GridDomain) -> dict:
    return {
        "shape": list(domain.shape),
        "spacing": list(domain.spacing),
        "origin": list(domain.origin),
    }


def grid_from_json(obj: dict) -> GridDomain:
    if "shape" not in obj:
        raise DomainError("grid needs a 'shape' entry")
    shape = tuple(int(n) for n in obj["shape"])
    origin = tuple(obj.get("origin", [0.0] * len(shape)))
    if "spacing" in obj:
        return GridDomain(shape, tuple(obj["spacing"]), origin)
    lengths = obj.get("lengths", [1.0] * len(shape))
    return GridDomain.box(shape, tuple(lengths), origin)


def _field_entry(arr: np.ndarray):
    return float(arr) if arr.shape == () else arr.tolist()


def field_to_json(field: ExponentField, domain: GridDomain | None = None) -> dict:
    out = {
        "N": field.N,
        "p": _field_entry(field.p),
        "q": _field_entry(field.q),
        "mu": _field_entry(field.mu),
    }
    if field.lipschitz_bound is not None:
        out["lipschitz_bound"] = field.lipschitz_bound
    if domain is not None:
        out["grid"] = grid_to_json(domain)
    return out


def field_from_json(obj: dict, domain: GridDomain | None = None):
    """Returns (field, domain); the domain may come from the payload itself."""
    if domain is None and "grid" in obj:
        domain = grid_from_json(obj["grid"])
    kw = {}
    if obj.get("lipschitz_bound") is not None:
        kw["lipschitz_bound"] = float(obj["lipschitz_bound"])
    if domain is not None:
        kw["spacing"] = domain.spacing
        ones = np.ones(domain.shape)
        p = ones * np.asarray(obj["p"], dtype=float)
        q = ones * np.asarray(obj["q"], dtype=float)
        mu = ones * np.asarray(obj["mu"], dtype=float)
        return ExponentField(int(obj["N"]), p, q, mu, **kw), domain
    return ExponentField(int(obj["N"]), obj["p"], obj["q"], obj["mu"], **kw), None


def function_to_json(u: GridFunction) -> dict:
    return {"grid": grid_to_json(u.domain), "values": u.values.tolist()}


def function_from_json(obj: dict, domain: GridDomain | None = None) -> GridFunction:
    if domain is None:
        domain = grid_from_json(obj["grid"])
    values = np.asarray(obj["values"], dtype=float)
    if values.shape != domain.shape:
        values = values.reshape(domain.shape)
    return GridFunction(domain, values)


def function_to_csv(u: GridFunction, path) -> None:
    """Plot-ready CSV: one row per node with coordinate columns then the value."""
    dom = u.domain
    coords = [c.ravel() for c in dom.coordinates]
    header = [
        "# shape=" + ",".join(str(n) for n in dom.shape),
        "# spacing=" + ",".join(repr(h) for h in dom.spacing),
        "# origin=" + ",".join(repr(o) for o in dom.origin),
        ",".join(f"x{i}" for i in range(dom.dim)) + ",value",
    ]
    data = np.column_stack(coords + [u.values.ravel()])
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(header) + "\n")
        np.savetxt(fh, data, delimiter=",")


def function_from_csv(path) -> GridFunction:
    meta = {}
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line.lstrip("# ").partition("=")
                meta[key.strip()] = val.strip()
            elif line[0].isalpha() or line.startswith('"'):
                continue  # column header
            else:
                rows.append([float(v) for v in line.split(",")])
    if "shape" not in meta:
        raise DomainError(f"{path}: missing '# shape=...' metadata line")
    shape = tuple(int(n) for n in meta["shape"].split(","))
    spacing = tuple(float(h) for h in meta.get("spacing", "").split(",")) if meta.get("spacing") else None
    origin = tuple(float(o) for o in meta.get("origin", "").split(",")) if meta.get("origin") else (0.0,) * len(shape)
    if spacing is None:
        raise DomainError(f"{path}: missing '# spacing=...' metadata line")
    domain = GridDomain(shape, spacing, origin)
    values = np.asarray(rows)[:, -1].reshape(shape)
    return GridFunction(domain, values)


def load_function(path, domain: GridDomain | None = None) -> GridFunction:
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return function_from_csv(path)
    with open(path, encoding="utf-8") as fh:
        return function_from_json(json.load(fh), domain)


def save_function(u: GridFunction, path) -> None:
    path = Path(path)
    if path.suffix.lower() == ".csv":
        function_to_csv(u, path)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(function_to_json(u), fh)


def norm_result_to_json(result: NormResult) -> dict:
    return {
        "value": result.value,
        "modular_at_value": result.modular_at_value,
        "iterations": result.iterations,
    }
