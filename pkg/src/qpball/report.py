"""Result records shared by the estimators, with JSON serialisation."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Any

import numpy as np

from .geometry import CarlesonBox, point_to_json


def to_jsonable(obj: Any) -> Any:
    """Recursively convert numpy/complex/box objects to JSON-safe values."""
    if isinstance(obj, CarlesonBox):
        return obj.to_json()
    if hasattr(obj, "to_json"):
        return obj.to_json()
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if obj.dtype.kind == "c":
            return point_to_json(obj) if obj.ndim == 1 else [to_jsonable(r) for r in obj]
        return to_jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


@dataclass(frozen=True)
class EstimateReport:
    """A Monte-Carlo or sup estimate with its diagnostics."""

    value: float
    stderr: float
    samples: int
    achieving_arg: Any = None
    converged: bool = True
    excluded: int = 0
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {f.name: to_jsonable(getattr(self, f.name)) for f in fields(self)}
        if not out["extra"]:
            del out["extra"]
        return out


def converged_flag(value: float, stderr: float, rel: float = 0.05, floor: float = 1e-12) -> bool:
    if not math.isfinite(value):
        return False
    return abs(value) <= floor or stderr <= rel * abs(value)
