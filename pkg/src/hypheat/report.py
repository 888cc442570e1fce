"""Verification report record shared by every check suite."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Any


@dataclass
class VerificationReport:
    """Outcome of one inequality or identity suite.

    ``worst_value`` is the per-check statistic at its least favourable grid
    point and ``passed`` says whether it is within ``tolerance`` (the exact
    rule is documented on each check).  ``grid`` maps axis names to a small
    description dict; ``worst_location`` names the coordinates of the worst
    point.
    """

    check_name: str
    grid: dict[str, Any]
    worst_value: float | None
    worst_location: dict[str, Any] | None
    tolerance: float
    passed: bool = True

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["pass"] = bool(d.pop("passed"))
        d["worst_value"] = _finite_or_none(self.worst_value)
        return d

    def to_json(self, **kwargs: Any) -> str:
        return json.dumps(self.to_dict(), allow_nan=False, **kwargs)


def _finite_or_none(x: float | None) -> float | None:
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def axis(values, spacing: str = "log") -> dict[str, Any]:
    """Describe a sampled axis for a report's ``grid`` field."""
    vals = [float(v) for v in values]
    if spacing == "set":
        return {"values": vals, "count": len(vals), "spacing": "set"}
    return {"min": min(vals), "max": max(vals), "count": len(vals), "spacing": spacing}


def levels_axis(levels) -> dict[str, Any]:
    levels = [int(v) for v in levels]
    return {"values": levels, "count": len(levels), "spacing": "set"}
