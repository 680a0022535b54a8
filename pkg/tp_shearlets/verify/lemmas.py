"""Numerical checks of the Fresnel, a/b and P1/P2 inequalities behind the lower coefficient bound."""

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator

from ..primitives import InvalidParameterError
from ..window1d import WindowFunction1D, as_finite, make_exp_window
from .quadrature import QuadratureResult, QuadratureSpec
from .report import VerificationReport

LOG = logging.getLogger(__name__)

DEFAULT_WINDOW = make_exp_window(0.025)
FRESNEL_QUADRATURE = QuadratureSpec(abs_tol=1e-10)
AB_QUADRATURE = QuadratureSpec(abs_tol=1e-8)
P_QUADRATURE = QuadratureSpec(abs_tol=1e-9)
# only feeds a continuity bound with a factor 10 of slack
LIPSCHITZ_QUADRATURE = QuadratureSpec(abs_tol=1e-6)

# Beyond this the Fresnel integrals use head + QUADPACK Fourier tails.
FRESNEL_TAIL_SWITCH = 64.0
FRESNEL_SWITCH = 3.0 * math.pi / 4.0
FRESNEL_LIMIT = math.sqrt(2.0 * math.pi)
SQRT2_PLUS_1 = 1.0 + math.sqrt(2.0)

LAMBDA_MIN, LAMBDA_MAX = 1.0 / 3.0, 4.0 / 3.0
P_MAX = 0.25
AB_GRID_SIZE = 512
AB_MAX_GRID_SIZE = 1 << 16
AB_VALIDATION_POINTS = 64
AB_INTERPOLATION_TOL = 1e-6


def _fresnel_head(x: np.ndarray, spec: QuadratureSpec) -> tuple[np.ndarray, np.ndarray, QuadratureResult]:
    # v = x u^2 removes the 1/sqrt(v) singularity: int_0^x cos(v)/sqrt(v) dv = 2 sqrt(x) int_0^1 cos(x u^2) du
    root = np.sqrt(x)

    def integrand(u: float) -> np.ndarray:
        phase = x * u * u
        return np.concatenate([2.0 * root * np.cos(phase), 2.0 * root * np.sin(phase)])

    result = spec.integrate(integrand, 0.0, 1.0, label="Fresnel")
    return result.value[: x.size], result.value[x.size :], result


def _inverse_sqrt(v: float) -> float:
    return 1.0 / math.sqrt(v)


def fresnel_pair(
    x, spec: QuadratureSpec = FRESNEL_QUADRATURE, results: list[QuadratureResult] | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Fc(x) = int_0^x cos(v)/sqrt(v) dv and Fs(x) = int_0^x sin(v)/sqrt(v) dv.

    Every quadrature behind the values is appended to results when given."""
    x = as_finite(x)
    shape = x.shape
    x = x.reshape(-1)
    if np.any(x < 0):
        raise InvalidParameterError(f"Fresnel integrals need x >= 0, got min {x.min()}")
    results = [] if results is None else results

    fc = np.zeros_like(x)
    fs = np.zeros_like(x)
    near = x <= FRESNEL_TAIL_SWITCH
    if np.any(near):
        fc[near], fs[near], head = _fresnel_head(x[near], spec)
        results.append(head)
    if np.any(~near):
        head_c, head_s, head = _fresnel_head(np.array([FRESNEL_TAIL_SWITCH]), spec)
        tail_c0 = spec.cosine_tail(_inverse_sqrt, FRESNEL_TAIL_SWITCH)
        tail_s0 = spec.sine_tail(_inverse_sqrt, FRESNEL_TAIL_SWITCH)
        results.extend([head, tail_c0, tail_s0])
        for i in np.flatnonzero(~near):
            tail_c = spec.cosine_tail(_inverse_sqrt, x[i])
            tail_s = spec.sine_tail(_inverse_sqrt, x[i])
            results.extend([tail_c, tail_s])
            fc[i] = head_c[0] + tail_c0.value - tail_c.value
            fs[i] = head_s[0] + tail_s0.value - tail_s.value
    return fc.reshape(shape), fs.reshape(shape)


def fresnel_fc(x, spec: QuadratureSpec = FRESNEL_QUADRATURE):
    fc, _ = fresnel_pair(x, spec)
    return fc[()] if fc.ndim == 0 else fc


def fresnel_fs(x, spec: QuadratureSpec = FRESNEL_QUADRATURE):
    _, fs = fresnel_pair(x, spec)
    return fs[()] if fs.ndim == 0 else fs


def fresnel_plus_minus(
    x, spec: QuadratureSpec = FRESNEL_QUADRATURE, results: list[QuadratureResult] | None = None
) -> tuple[np.ndarray, np.ndarray]:
    fc, fs = fresnel_pair(x, spec, results)
    return fc + fs, fc - fs


def default_fresnel_grid() -> np.ndarray:
    return np.arange(1, 2001) * 0.01


def _check_extrema(report: VerificationReport, name: str, x: np.ndarray, values: np.ndarray, limit: float) -> None:
    """Maxima at even k decrease, minima at odd k increase, and the limit lies between them."""
    maxima, minima = values[0::2], values[1::2]
    report.add_point(
        {"sequence": name, "x": x[0::2]}, maxima, "decreasing", bool(np.all(np.diff(maxima) < 0)),
    )
    report.add_point(
        {"sequence": name, "x": x[1::2]}, minima, "increasing", bool(np.all(np.diff(minima) > 0)),
    )
    gap = min(float(maxima.min()) - limit, limit - float(minima.max()))
    report.add_point({"sequence": name, "limit": limit}, [minima.max(), maxima.min()], "brackets limit", gap > 0, gap)


def check_fresnel_lemma(
    grid: Sequence[float] | None = None, spec: QuadratureSpec = FRESNEL_QUADRATURE, extrema: int = 12
) -> VerificationReport:
    grid = default_fresnel_grid() if grid is None else as_finite(grid, "grid")
    if grid.size > 1 and float(np.max(np.diff(grid))) > 1e-2 + 1e-12:
        raise InvalidParameterError("Fresnel grid step must not exceed 1e-2")
    if np.any(grid <= 0) or np.any(grid > 20.0 + 1e-12):
        raise InvalidParameterError("Fresnel grid must lie in (0, 20]")

    report = VerificationReport("fresnel", params={"grid_size": grid.size, "abs_tol": spec.abs_tol})
    results: list[QuadratureResult] = []
    plus, minus = fresnel_plus_minus(grid, spec, results)
    for x, fp, fm in zip(grid, plus, minus):
        if x < FRESNEL_SWITCH:
            margin = min(fp - fm, fm)
            report.add_point({"x": x}, [fp, fm], "F+ > F- > 0", margin > 0, margin)
        else:
            margin = min(fp - SQRT2_PLUS_1 * abs(fm), fm + 0.69, 0.53 - fm)
            report.add_point({"x": x}, [fp, fm], "F+ > (1+sqrt2)|F-|, -0.69 < F- < 0.53", margin > 0, margin)

    brackets = np.array([FRESNEL_SWITCH, 7.0 * math.pi / 4.0])
    bracket_results: list[QuadratureResult] = []
    (p0, p1), (m0, _) = fresnel_plus_minus(brackets, spec, bracket_results)
    report.add_point({"x": "3pi/4"}, p0, [3.36, 3.37], 3.36 < p0 < 3.37, min(p0 - 3.36, 3.37 - p0))
    report.add_point({"x": "7pi/4"}, p1, "> 1.91", p1 > 1.91, p1 - 1.91)
    report.add_point({"x": "3pi/4", "F": "-"}, m0, "> 0.14", m0 > 0.14, m0 - 0.14)
    report.fit("F+(3pi/4)", p0)
    report.fit("F+(7pi/4)", p1)
    report.fit("F-(3pi/4)", m0)
    _, _, refined = _fresnel_head(brackets, spec.refined())
    report.add_refinement({"x": ["3pi/4", "7pi/4"]}, bracket_results[0], refined)
    results.extend(bracket_results)

    k = np.arange(extrema)
    x_plus = FRESNEL_SWITCH + k * math.pi
    x_minus = math.pi / 4.0 + k * math.pi
    plus_k, _ = fresnel_plus_minus(x_plus, spec, results)
    _, minus_k = fresnel_plus_minus(x_minus, spec, results)
    _check_extrema(report, "F+", x_plus, plus_k, FRESNEL_LIMIT)
    _check_extrema(report, "F-", x_minus, minus_k, 0.0)
    for i, result in enumerate(results):
        report.add_quadrature({"integral": i}, result)
    return report


def _check_ab_args(lam: np.ndarray, p: np.ndarray, A: np.ndarray) -> None:
    if np.any(~(A > 0)):
        raise InvalidParameterError(f"A must be positive, got {A}")
    if np.any(lam < LAMBDA_MIN - 1e-12) or np.any(lam > LAMBDA_MAX + 1e-12):
        raise InvalidParameterError("lambda must lie in [1/3, 4/3]")
    if np.any(np.abs(p) > P_MAX + 1e-12):
        raise InvalidParameterError("p must lie in [-1/4, 1/4]")


def truncation_point(lam, p, A):
    """Beyond v = r both window arguments exceed 2/3, so the a/b integrands vanish."""
    p = np.abs(p)
    return p / (3.0 * A) + 1.0 / (9.0 * A * lam) + p * p * lam / (4.0 * A)


def ab_integrals(
    lam, p, A, g: WindowFunction1D = DEFAULT_WINDOW, spec: QuadratureSpec = AB_QUADRATURE
) -> tuple[np.ndarray, np.ndarray, QuadratureResult]:
    """a(lam, p, A) and b(lam, p, A) for broadcastable arrays, in one vector quadrature."""
    lam, p, A = np.broadcast_arrays(as_finite(lam, "lambda"), as_finite(p, "p"), as_finite(A, "A"))
    shape = lam.shape
    lam, p, A = lam.reshape(-1), p.reshape(-1), A.reshape(-1)
    _check_ab_args(lam, p, A)

    root = np.sqrt(truncation_point(lam, p, A))
    scale = 2.0 * np.sqrt(A * lam)
    shift = p * lam

    # v = t^2 and t = sqrt(r) u map [0, r] onto u in [0, 1]
    def integrand(u: float) -> np.ndarray:
        t = root * u
        h = scale * t
        weight = 2.0 * root * (g(h + shift) + g(h - shift))
        v = t * t
        return np.concatenate([weight * np.cos(v), weight * np.sin(v)])

    result = spec.integrate(integrand, 0.0, 1.0, label="a/b")
    n = lam.size
    return result.value[:n].reshape(shape), result.value[n:].reshape(shape), result


def integral_a(lam, p, A, g: WindowFunction1D = DEFAULT_WINDOW, spec: QuadratureSpec = AB_QUADRATURE):
    a, _, _ = ab_integrals(lam, p, A, g, spec)
    return a[()] if a.ndim == 0 else a


def integral_b(lam, p, A, g: WindowFunction1D = DEFAULT_WINDOW, spec: QuadratureSpec = AB_QUADRATURE):
    _, b, _ = ab_integrals(lam, p, A, g, spec)
    return b[()] if b.ndim == 0 else b


def ab_grid_size(A: float, size: int = AB_GRID_SIZE) -> int:
    """a and b oscillate faster in lambda as A shrinks, so small A gets a proportionally denser grid."""
    return size * max(1, math.ceil(1.0 / A))


class ABTable:
    """a and b on a lambda grid over [1/3, 4/3] for fixed (p, A), interpolated with PCHIP."""

    def __init__(
        self,
        p: float,
        A: float,
        g: WindowFunction1D = DEFAULT_WINDOW,
        size: int | None = None,
        spec: QuadratureSpec = AB_QUADRATURE,
    ) -> None:
        self.p, self.A, self.g, self.spec = float(p), float(A), g, spec
        self.grid = np.linspace(LAMBDA_MIN, LAMBDA_MAX, ab_grid_size(self.A) if size is None else size)
        a, b, self.result = ab_integrals(self.grid, self.p, self.A, g, spec)
        self.error = self.result.error
        self.__a = PchipInterpolator(self.grid, a)
        self.__b = PchipInterpolator(self.grid, b)

    @classmethod
    def fitted(
        cls,
        p: float,
        A: float,
        g: WindowFunction1D = DEFAULT_WINDOW,
        tol: float = AB_INTERPOLATION_TOL,
        spec: QuadratureSpec = AB_QUADRATURE,
    ) -> tuple["ABTable", float]:
        """The first table, doubling the grid up to AB_MAX_GRID_SIZE, whose validation error is below tol."""
        size = ab_grid_size(A)
        while True:
            table = cls(p, A, g, size, spec)
            error = table.validate()
            if error < tol or 2 * size > AB_MAX_GRID_SIZE:
                return table, error
            LOG.info(f"a/b table for p={p:g}, A={A:g}: interpolation error {error:.2e} at {size} points, refining")
            size *= 2

    @property
    def size(self) -> int:
        return self.grid.size

    def __call__(self, lam) -> tuple[np.ndarray, np.ndarray]:
        return self.__a(lam), self.__b(lam)

    def validate(self, count: int = AB_VALIDATION_POINTS) -> float:
        """Largest interpolation error against direct evaluation at off-grid midpoints."""
        cells = np.linspace(0, self.grid.size - 2, count).round().astype(int)
        midpoints = 0.5 * (self.grid[cells] + self.grid[cells + 1])
        a, b, _ = ab_integrals(midpoints, self.p, self.A, self.g, self.spec)
        ia, ib = self(midpoints)
        return float(max(np.max(np.abs(ia - a)), np.max(np.abs(ib - b))))


def p_integrals(
    D,
    p: float,
    A: float,
    g: WindowFunction1D = DEFAULT_WINDOW,
    table: ABTable | None = None,
    spec: QuadratureSpec = P_QUADRATURE,
    results: list[QuadratureResult] | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """P1(D, p, A) and P2(D, p, A) for every D at once."""
    D = as_finite(D, "D")
    shape = D.shape
    D = D.reshape(-1)
    if np.any(np.abs(D) > 3.0 * math.pi / 4.0 + 1e-12):
        raise InvalidParameterError("D must lie in [-3pi/4, 3pi/4]")
    table = ABTable(p, A, g) if table is None else table

    def integrand(lam: float) -> np.ndarray:
        weight = float(g.gtilde(lam)) / lam
        a, b = table(lam)
        c, s = np.cos(D * lam), np.sin(D * lam)
        return np.concatenate([weight * ((a + b) * c + (a - b) * s), weight * ((a + b) * s - (a - b) * c)])

    result = spec.integrate(integrand, LAMBDA_MIN, LAMBDA_MAX, points=[2.0 / 3.0], label="P1/P2")
    if results is not None:
        results.append(result)
    n = D.size
    return result.value[:n].reshape(shape), result.value[n:].reshape(shape)


def p1(D, p, A, g: WindowFunction1D = DEFAULT_WINDOW, table: ABTable | None = None):
    value, _ = p_integrals(D, p, A, g, table)
    return value[()] if value.ndim == 0 else value


def p2(D, p, A, g: WindowFunction1D = DEFAULT_WINDOW, table: ABTable | None = None):
    _, value = p_integrals(D, p, A, g, table)
    return value[()] if value.ndim == 0 else value


def p_plus(D, p, A, g: WindowFunction1D = DEFAULT_WINDOW, table: ABTable | None = None):
    first, second = p_integrals(D, p, A, g, table)
    value = first + second
    return value[()] if value.ndim == 0 else value


def _lipschitz_bound(
    table: ABTable, g: WindowFunction1D, spec: QuadratureSpec = LIPSCHITZ_QUADRATURE
) -> QuadratureResult:
    """sup |dP/dD| <= int g~(lam) (|a+b| + |a-b|) dlam."""

    def integrand(lam: float) -> float:
        a, b = table(lam)
        return float(g.gtilde(lam)) * (abs(a + b) + abs(a - b))

    return spec.integrate(integrand, LAMBDA_MIN, LAMBDA_MAX, points=[2.0 / 3.0], label="Lipschitz")


def default_p_grid() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    D = np.arange(-12, 13) * (math.pi / 16.0)
    p = np.arange(-4, 5) / 16.0
    A = np.array([0.1, 1.0, 10.0])
    return D, p, A


def check_p_lemma(
    D_grid: Sequence[float] | None = None,
    p_grid: Sequence[float] | None = None,
    A_grid: Sequence[float] | None = None,
    g: WindowFunction1D = DEFAULT_WINDOW,
    spec: QuadratureSpec = P_QUADRATURE,
) -> VerificationReport:
    default_D, default_p, default_A = default_p_grid()
    D = default_D if D_grid is None else as_finite(D_grid, "D")
    ps = default_p if p_grid is None else as_finite(p_grid, "p")
    As = default_A if A_grid is None else as_finite(A_grid, "A")
    report = VerificationReport(
        "p12", params={"D": D, "p": ps, "A": As, "window": g.name, "abs_tol": spec.abs_tol}
    )

    tables: dict[tuple[float, float], ABTable] = {}
    for A in As:
        for p in ps:
            # a and b are even in p
            key = (abs(float(p)), float(A))
            if key not in tables:
                LOG.info(f"Tabulating a/b for p={key[0]:g}, A={key[1]:g}")
                tables[key], error = ABTable.fitted(*key, g=g)
                where = {"p": key[0], "A": key[1], "grid": tables[key].size}
                report.add_point(
                    {**where, "interpolation": True}, error, AB_INTERPOLATION_TOL, error < AB_INTERPOLATION_TOL
                )
                report.add_quadrature({**where, "integral": "a/b"}, tables[key].result)
            table = tables[key]
            results: list[QuadratureResult] = []
            first, second = p_integrals(D, float(p), float(A), g, table, spec=spec, results=results)
            report.add_quadrature({"p": p, "A": A, "integral": "P1/P2"}, results[0])
            for d, v1, v2 in zip(D, first, second):
                margin = max(abs(v1), abs(v2))
                report.add_point({"D": d, "p": p, "A": A}, [v1, v2], "max(|P1|, |P2|) > 0", margin > 0, margin)
            if D.size > 1:
                lipschitz = _lipschitz_bound(table, g)
                report.add_quadrature({"p": p, "A": A, "integral": "Lipschitz"}, lipschitz)
                step = float(np.max(np.diff(D)))
                jump = float(max(np.max(np.abs(np.diff(first))), np.max(np.abs(np.diff(second)))))
                bound = 10.0 * step * float(lipschitz.value)
                report.add_point({"p": p, "A": A, "continuity": True}, jump, bound, jump < bound)
            at_zero = np.flatnonzero(D == 0.0)
            if at_zero.size:
                value = float(first[at_zero[0]])
                report.add_point({"D": 0.0, "p": p, "A": A, "P1": True}, value, "> 0", value > 0)

    margin = report.min_margin
    report.fit("C", 0.0 if margin is None else margin)
    return report


def check_ab_lemma(
    count: int = 100, seed: int = 0, g: WindowFunction1D = DEFAULT_WINDOW, spec: QuadratureSpec = AB_QUADRATURE
) -> VerificationReport:
    """a > 0, b > 0 and (a > b or a + b > (1 + sqrt2)|a - b|) at seeded admissible points."""
    rng = np.random.default_rng(seed)
    lam = rng.uniform(LAMBDA_MIN, LAMBDA_MAX, count)
    p = rng.uniform(-P_MAX, P_MAX, count)
    A = 10.0 ** rng.uniform(-2.0, 2.0, count)
    report = VerificationReport("ab", params={"count": count, "seed": seed, "window": g.name, "abs_tol": spec.abs_tol})

    a, b, result = ab_integrals(lam, p, A, g, spec)
    report.add_quadrature({"integral": "a/b"}, result)
    _, _, refined = ab_integrals(lam, p, A, g, spec.refined())
    report.add_refinement({"integral": "a/b"}, result, refined)
    for point in zip(lam, p, A, a, b):
        l_, p_, A_, a_, b_ = (float(v) for v in point)
        report.add_point({"lambda": l_, "p": p_, "A": A_}, [a_, b_], "a > 0 and b > 0", a_ > 0 and b_ > 0, min(a_, b_))
        alternative = a_ - b_ > 0 or a_ + b_ > SQRT2_PLUS_1 * abs(a_ - b_)
        report.add_point({"lambda": l_, "p": p_, "A": A_, "alternative": True}, a_ - b_, "a > b or ...", alternative)
    report.fit("min(a, b)", float(min(a.min(), b.min())))
    return report
