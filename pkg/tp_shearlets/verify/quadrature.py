import logging
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad, quad_vec

LOG = logging.getLogger(__name__)


@dataclass(frozen=True)
class QuadratureResult:
    value: np.ndarray | float
    error: float
    converged: bool
    evaluations: int = 0


@dataclass(frozen=True)
class QuadratureSpec:
    """Adaptive subdivision with a fixed Gauss-Kronrod panel rule (scipy quad_vec).

    abs_tol bounds the largest component of a vector-valued integral."""

    abs_tol: float = 1e-10
    rel_tol: float = 0.0
    max_subdivisions: int = 2000
    rule: str = "gk21"

    def refined(self, factor: float = 10.0) -> "QuadratureSpec":
        return replace(self, abs_tol=self.abs_tol / factor, max_subdivisions=int(self.max_subdivisions * 2))

    def integrate(
        self,
        f: Callable[[float], np.ndarray | float],
        a: float,
        b: float,
        points: Sequence[float] | None = None,
        label: str = "integral",
    ) -> QuadratureResult:
        value, error, info = quad_vec(
            f,
            a,
            b,
            epsabs=self.abs_tol,
            epsrel=self.rel_tol,
            norm="max",
            limit=self.max_subdivisions,
            quadrature=self.rule,
            points=points,
            full_output=True,
        )
        converged = bool(info.success) and error <= self.abs_tol
        if not converged:
            LOG.warning(f"{label} on [{a:g}, {b:g}]: error estimate {error:.3g} exceeds tolerance {self.abs_tol:.3g}")
        return QuadratureResult(value=value, error=float(error), converged=converged, evaluations=int(info.neval))

    def cosine_tail(self, g: Callable[[float], float], start: float, omega: float = 1.0) -> QuadratureResult:
        """int_start^inf g(v) cos(omega v) dv by the QUADPACK Fourier-integral routine."""
        return self.__fourier_tail(g, start, "cos", omega)

    def sine_tail(self, g: Callable[[float], float], start: float, omega: float = 1.0) -> QuadratureResult:
        return self.__fourier_tail(g, start, "sin", omega)

    def __fourier_tail(self, g: Callable[[float], float], start: float, weight: str, omega: float) -> QuadratureResult:
        value, error = quad(g, start, np.inf, weight=weight, wvar=omega, epsabs=self.abs_tol, limlst=200)
        converged = error <= self.abs_tol
        if not converged:
            LOG.warning(f"{weight} tail from {start:g}: error estimate {error:.3g} exceeds {self.abs_tol:.3g}")
        return QuadratureResult(value=float(value), error=float(error), converged=converged)
