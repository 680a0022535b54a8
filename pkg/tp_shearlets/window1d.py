import math
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Mapping

import numpy as np

from .primitives import InvalidParameterError

SUPPORT_RADIUS = 2.0 / 3.0
PLATEAU_RADIUS = 1.0 / 3.0

# s has support (-4/3, 4/3), so these are the only shifts that reach [-1/2, 1/2].
PERIODIZATION_SHIFTS = (-2, -1, 0, 1, 2)


def as_finite(x, name: str = "x") -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InvalidParameterError(f"{name} must be finite, got {x!r}")
    return arr


def _out(arr: np.ndarray):
    return arr[()] if arr.ndim == 0 else arr


def _check_b(b: float) -> float:
    if not (isinstance(b, (int, float)) and math.isfinite(b) and b > 0):
        raise InvalidParameterError(f"Window parameter b must be a positive finite number, got {b!r}")
    return float(b)


def mollifier_r(b: float, x):
    """r(x) = exp(-b/x^2) for x > 0 and 0 otherwise.

    Where b/x^2 overflows the exponent range the value is returned as 0."""
    b = _check_b(b)
    x = as_finite(x)
    positive = x > 0
    safe = np.where(positive, x, 1.0)
    with np.errstate(over="ignore", under="ignore", divide="ignore"):
        out = np.where(positive, np.exp(-b / (safe * safe)), 0.0)
    return _out(out)


def _bump(b: float, x: np.ndarray) -> np.ndarray:
    return mollifier_r(b, SUPPORT_RADIUS + x) * mollifier_r(b, SUPPORT_RADIUS - x)


def _exp_window(b: float, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    # The denominator is 1-periodic: evaluate it at x reduced to [-1/2, 1/2].
    reduced = x - np.round(x)
    denominator = np.zeros_like(reduced)
    for k in PERIODIZATION_SHIFTS:
        denominator = denominator + _bump(b, reduced + k)
    return _bump(b, x) / denominator


@dataclass(frozen=True)
class WindowFunction1D:
    """Even window g with supp g = (-2/3, 2/3), g = 1 on [-1/3, 1/3] and sum_z g(x + z) = 1."""

    evaluator: Callable[[np.ndarray], np.ndarray]
    smoothness_order: float = math.inf
    family_params: Mapping[str, float] = field(default_factory=dict)

    def __call__(self, x):
        return _out(np.asarray(self.evaluator(as_finite(x)), dtype=float))

    def gtilde(self, x):
        return eval_gtilde(self, x)

    @property
    def name(self) -> str:
        params = ",".join(f"{k}={v:g}" for k, v in sorted(self.family_params.items()))
        return f"g[{params}]"


def make_exp_window(b: float) -> WindowFunction1D:
    b = _check_b(b)
    return WindowFunction1D(evaluator=partial(_exp_window, b), smoothness_order=math.inf, family_params={"b": b})


def eval_gtilde(g: WindowFunction1D, x):
    """g~(x) = g(x/2) - g(x), supported in 1/3 < |x| < 4/3."""
    x = as_finite(x)
    return _out(np.asarray(g(x / 2.0) - g(x), dtype=float))
