import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .quadrature import QuadratureResult

LOG = logging.getLogger(__name__)

# Slack for the refinement comparison: a few ulps of the integral itself.
ROUNDING_SLACK = 64.0 * float(np.finfo(float).eps)


def _plain(value: Any) -> Any:
    """JSON-compatible copy of numpy scalars, arrays and nested containers."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else str(value)
    if isinstance(value, (complex, np.complexfloating)):
        return [float(value.real), float(value.imag)]
    return value


@dataclass
class VerificationReport:
    check: str
    params: dict[str, Any] = field(default_factory=dict)
    points: list[dict[str, Any]] = field(default_factory=list)
    fitted_constants: dict[str, float] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def add_point(
        self, input: Any, value: Any, bound: Any, passed: bool, margin: float | None = None
    ) -> bool:
        point = {"input": input, "value": value, "bound": bound, "pass": bool(passed)}
        if margin is not None:
            point["margin"] = float(margin)
        self.points.append(point)
        if not passed:
            LOG.debug(f"{self.check}: failed at {input} (value {value}, bound {bound})")
        return bool(passed)

    def add_quadrature(self, input: dict[str, Any], result: QuadratureResult) -> bool:
        """Fails when the integral missed its tolerance, so values built on it cannot pass silently."""
        return self.add_point({**input, "quadrature": True}, result.error, "converged", result.converged)

    def add_refinement(self, input: dict[str, Any], base: QuadratureResult, refined: QuadratureResult) -> bool:
        """Recomputing at abs_tol/10 may move the values by no more than the first error estimate."""
        change = float(np.max(np.abs(np.asarray(refined.value) - np.asarray(base.value))))
        bound = base.error + ROUNDING_SLACK * float(np.max(np.abs(base.value)))
        return self.add_point({**input, "refinement": True}, change, bound, change <= bound)

    def fit(self, name: str, value: float) -> None:
        self.fitted_constants[name] = float(value)

    def note(self, text: str) -> None:
        self.notes.append(text)

    def merge(self, other: "VerificationReport", prefix: str | None = None) -> None:
        prefix = other.check if prefix is None else prefix
        for point in other.points:
            self.points.append({**point, "input": {"part": prefix, "at": point["input"]}})
        for name, value in other.fitted_constants.items():
            self.fitted_constants[f"{prefix}.{name}"] = value
        self.notes.extend(f"{prefix}: {n}" for n in other.notes)

    @property
    def passed(self) -> bool:
        return all(p["pass"] for p in self.points)

    @property
    def failures(self) -> list[dict[str, Any]]:
        return [p for p in self.points if not p["pass"]]

    @property
    def min_margin(self) -> float | None:
        margins = [p["margin"] for p in self.points if "margin" in p]
        return min(margins) if margins else None

    def to_dict(self) -> dict[str, Any]:
        return _plain(
            {
                "check": self.check,
                "params": self.params,
                "points": self.points,
                "fitted_constants": self.fitted_constants,
                "min_margin": self.min_margin,
                "passed": self.passed,
                "notes": self.notes,
            }
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def save(self, file: Path) -> None:
        with open(file, "w") as f:
            f.write(self.to_json())
        LOG.info(f"Written {file}")

    def summary(self) -> str:
        state = "PASS" if self.passed else f"FAIL ({len(self.failures)} of {len(self.points)} points)"
        margin = "" if self.min_margin is None else f", min margin {self.min_margin:.6g}"
        return f"{self.check}: {state}{margin}"
