"""JSON persistence for spaces, fields, coupled spaces and reports."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any

import numpy as np

from .errors import BadParams, PreconditionError
from .fields import MatrixField, field_from_json
from .metric import METRIC_TOL, CoupledSpace, FiniteMetricSpace, check_coupled


class InputError(PreconditionError):
    """Unreadable or malformed input file."""


def _default(obj: Any):
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj: Any) -> str:
    """Deterministic JSON text (floats written with shortest round-trip repr)."""
    return json.dumps(obj, indent=2, default=_default, allow_nan=False) + "\n"


def save_json(obj: Any, path: str | Path) -> None:
    Path(path).write_text(dumps(obj))


def load_json(path: str | Path) -> Any:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise InputError(f"no such file: {path}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from exc


def digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def space_from_json(data: dict[str, Any], metric_tol: float = METRIC_TOL) -> FiniteMetricSpace:
    try:
        if data.get("kind", "explicit") == "explicit":
            return FiniteMetricSpace(
                [_id(i) for i in data["point_ids"]], data["dist"], tol=metric_tol
            )
        return FiniteMetricSpace.from_json(data)
    except KeyError as exc:
        raise InputError(f"space JSON lacks {exc}") from exc


def _id(x):
    return tuple(_id(i) for i in x) if isinstance(x, list) else x


def load_space(ref: str | Path | dict[str, Any], base: Path | None = None,
               metric_tol: float = METRIC_TOL) -> FiniteMetricSpace:
    """Space from an inline JSON object or a path (relative paths resolve against ``base``)."""
    if isinstance(ref, dict):
        return space_from_json(ref, metric_tol)
    path = Path(ref)
    if base is not None and not path.is_absolute():
        path = base / path
    return space_from_json(load_json(path), metric_tol)


def load_coupled(path: str | Path, metric_tol: float = METRIC_TOL) -> CoupledSpace:
    data = load_json(path)
    if "x_ids" not in data or "y_ids" not in data:
        raise InputError(f"{path} is not a coupled space (needs x_ids and y_ids)")
    space = space_from_json(data, metric_tol)
    coupled = CoupledSpace(space, tuple(data["x_ids"]), tuple(data["y_ids"]), float(data["eps"]))
    check_coupled(coupled)
    return coupled


def load_field(path: str | Path, space: FiniteMetricSpace | None = None,
               proj_tol: float | None = None, metric_tol: float = METRIC_TOL) -> MatrixField:
    path = Path(path)
    data = load_json(path)
    if "values" not in data or "n" not in data:
        raise InputError(f"{path} is not a field (needs n and values)")
    if space is None:
        if "space" not in data:
            raise BadParams(f"{path} names no space")
        space = load_space(data["space"], path.parent, metric_tol)
    if proj_tol is not None:
        data = dict(data, proj_tol=proj_tol)
    return field_from_json(data, space)

