import logging
import math
from dataclasses import dataclass, field, replace
from functools import partial
from typing import Callable

import numpy as np

from ..coeffs import Mapper, coeff_direct, coeff_map, translates
from ..primitives import UsageError
from ..symbols import EllipseRegion, RotatedEllipse
from ..system import Orientation, ShearletIndex, cone_contains, sample_symbol
from ..window1d import PLATEAU_RADIUS, make_exp_window
from .bounds import (
    DEFAULT_ELLIPSE,
    DEFAULT_SCALES,
    SHAPE_INDEX,
    check_lower_bound,
    check_map_shape,
    check_spatial_decay,
    check_upper_bound,
)
from .lemmas import (
    AB_QUADRATURE,
    FRESNEL_QUADRATURE,
    P_QUADRATURE,
    check_ab_lemma,
    check_fresnel_lemma,
    check_p_lemma,
)
from .quadrature import QuadratureSpec
from .report import VerificationReport

LOG = logging.getLogger(__name__)

WINDOW_PARAMETERS = (0.025, 0.1, 1.0)
WINDOW_SAMPLES = 10_000
WINDOW_TOL = 1e-12
FFTFOLD_TOL = 1e-10


@dataclass(frozen=True)
class SuiteOptions:
    b: float = 0.025
    j: int = 8
    s: int = 8
    ellipse: EllipseRegion = DEFAULT_ELLIPSE
    j_list: tuple[int, ...] = DEFAULT_SCALES
    tol: float | None = None
    mapper: Mapper = field(default=map, compare=False)

    @property
    def window(self):
        return make_exp_window(self.b)


def suite_windows(options: SuiteOptions) -> VerificationReport:
    report = VerificationReport("windows", params={"b": WINDOW_PARAMETERS, "samples": WINDOW_SAMPLES})
    x = np.linspace(-2.0, 2.0, WINDOW_SAMPLES)
    plateau = np.linspace(-PLATEAU_RADIUS + 1e-9, PLATEAU_RADIUS - 1e-9, WINDOW_SAMPLES)
    for b in WINDOW_PARAMETERS:
        g = make_exp_window(b)
        total = sum(g(x + z) for z in range(-3, 4))
        deviation = float(np.max(np.abs(total - 1.0)))
        report.add_point({"b": b, "law": "partition of unity"}, deviation, WINDOW_TOL, deviation < WINDOW_TOL)
        deviation = float(np.max(np.abs(g(plateau) - 1.0)))
        report.add_point({"b": b, "law": "plateau"}, deviation, WINDOW_TOL, deviation < WINDOW_TOL)
        deviation = abs(float(g.gtilde(2.0 / 3.0)) - 1.0)
        report.add_point({"b": b, "law": "g~(2/3) = 1"}, deviation, WINDOW_TOL, deviation < WINDOW_TOL)
        deviation = float(np.max(np.abs(g(x) - g(-x))))
        report.add_point({"b": b, "law": "even"}, deviation, 0.0, deviation == 0.0)
        outside = float(np.max(np.abs(g(x[np.abs(x) >= 2.0 / 3.0]))))
        report.add_point({"b": b, "law": "support"}, outside, 0.0, outside == 0.0)
    return report


def suite_support(options: SuiteOptions) -> VerificationReport:
    """Every sampled symbol frequency lies in its cone W_{j,l}."""
    g, j = options.window, options.j
    report = VerificationReport("support", params={"b": options.b, "j": j})
    half = 1 << (j // 2)
    indices = [ShearletIndex(o, j, l) for o in Orientation for l in range(-half, half + 1)]
    for idx, (count, violations) in zip(indices, options.mapper(partial(_cone_violations, g), indices)):
        report.add_point({"index": str(idx), "entries": count}, violations, 0, violations == 0)
    return report


def _cone_violations(g, idx: ShearletIndex) -> tuple[int, int]:
    symbol = sample_symbol(g, idx)
    return symbol.count, int(np.count_nonzero(~cone_contains(idx, symbol.k.astype(np.float64))))


def suite_fftfold(options: SuiteOptions) -> VerificationReport:
    """coeff_map against the compensated direct sum at every grid point."""
    g, j, s = options.window, options.j, options.s
    tol = FFTFOLD_TOL if options.tol is None else options.tol
    provider = RotatedEllipse(options.ellipse)
    report = VerificationReport(
        "fftfold", params={"b": options.b, "j": j, "s": s, "region": provider.describe(), "tol": tol}
    )
    half = 1 << (j // 2)
    points = translates(s)
    worst = 0.0
    for orientation in Orientation:
        for shear in sorted({0, min(3, half), -half + 1}):
            symbol = sample_symbol(g, ShearletIndex(orientation, j, shear))
            mapped = coeff_map(symbol, provider, s).values.ravel()
            direct = coeff_direct(symbol, provider, points)
            scale = float(np.max(np.abs(mapped)))
            deviation = float(np.max(np.abs(mapped - direct))) / scale if scale > 0 else 0.0
            worst = max(worst, deviation)
            report.add_point(
                {"index": str(symbol.index)}, deviation, tol, deviation < tol, tol - deviation
            )
    report.fit("max_relative_deviation", worst)
    return report


def _quadrature(options: SuiteOptions, default: QuadratureSpec) -> QuadratureSpec:
    return default if options.tol is None else replace(default, abs_tol=options.tol)


def suite_fresnel(options: SuiteOptions) -> VerificationReport:
    return check_fresnel_lemma(spec=_quadrature(options, FRESNEL_QUADRATURE))


def suite_ab(options: SuiteOptions) -> VerificationReport:
    return check_ab_lemma(g=options.window, spec=_quadrature(options, AB_QUADRATURE))


def suite_p12(options: SuiteOptions) -> VerificationReport:
    return check_p_lemma(g=options.window, spec=_quadrature(options, P_QUADRATURE))


def suite_decay(options: SuiteOptions) -> VerificationReport:
    """Decay fits at options.j and every coarser scale of options.j_list, on a grid fine enough for options.j."""
    idx = ShearletIndex(Orientation.HORIZONTAL, options.j, 0)
    scales = [j for j in options.j_list if j < options.j]
    return check_spatial_decay(options.window, idx, s=max(options.s, options.j), scales=scales)


def suite_upper(options: SuiteOptions) -> VerificationReport:
    return check_upper_bound(options.ellipse, options.window, options.j_list, mapper=options.mapper)


def suite_lower(options: SuiteOptions) -> VerificationReport:
    return check_lower_bound(options.ellipse, options.window, options.j_list, mapper=options.mapper)


def suite_shape(options: SuiteOptions) -> VerificationReport:
    idx = ShearletIndex(SHAPE_INDEX.orientation, options.j, SHAPE_INDEX.shear)
    return check_map_shape(options.ellipse, options.window, idx, options.s, mapper=options.mapper)


SUITES: dict[str, Callable[[SuiteOptions], VerificationReport]] = {
    "windows": suite_windows,
    "support": suite_support,
    "fresnel": suite_fresnel,
    "ab": suite_ab,
    "p12": suite_p12,
    "decay": suite_decay,
    "upper": suite_upper,
    "lower": suite_lower,
    "shape": suite_shape,
    "fftfold": suite_fftfold,
}


def run_suite(name: str, options: SuiteOptions = SuiteOptions()) -> VerificationReport:
    try:
        suite = SUITES[name]
    except KeyError:
        raise UsageError(f"Unknown suite {name!r}, expected one of {', '.join(SUITES)}") from None
    LOG.info(f"Running suite {name}")
    report = suite(options)
    report.params.setdefault("suite", name)
    LOG.info(report.summary())
    return report
