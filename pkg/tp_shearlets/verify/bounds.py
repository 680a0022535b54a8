"""Scale-stability checks of the spatial decay of shearlets and of the upper and lower coefficient bounds.

The constants in those bounds are existential. Every check fits a constant at one scale and
tests that it stays bounded across scales, so the falsifiable content is the exponent."""

import logging
import math
from dataclasses import dataclass
from functools import partial
from typing import Callable, Sequence

import numpy as np

from ..coeffs import Mapper, coeff_batch, coeff_map, edge_map, translates
from ..primitives import InvalidIndexError
from ..symbols import (
    BOUNDARY_SAMPLES,
    EllipseRegion,
    FourierProvider,
    RotatedEllipse,
    boundary_distance,
    boundary_point_with_normal,
    boundary_representatives,
    dyadic_squares,
)
from ..system import (
    Orientation,
    ShearletIndex,
    SparseSymbol,
    angle_of,
    discrete_angle,
    eval_shearlet_spatial,
    sample_symbol,
    shearlet_on_grid,
    shifted_translate,
    translate_for_centre,
)
from ..window1d import WindowFunction1D
from .lemmas import DEFAULT_WINDOW
from .report import VerificationReport

LOG = logging.getLogger(__name__)

DEFAULT_ELLIPSE = EllipseRegion(1.0, 3.0, math.pi / 6.0)
DEFAULT_SCALES = (6, 8, 10)

DECAY_STABILITY = 4.0
UPPER_STABILITY = 8.0
LOWER_STABILITY = 4.0
FAR_FIELD_MARGIN = 1e3
MISALIGNED_FACTOR = 10.0
# Coefficients below NOISE_FACTOR * eps * sum |terms| are rounding noise.
NOISE_FACTOR = 64.0
# Aligned translates sit NORMAL_OFFSET * 2^-j inside the boundary along the orientation axis,
# a quarter turn of the edge response away from its zero on the boundary.
NORMAL_OFFSET = math.pi / 2.0
LOWER_BOUND_SLOPES = (-0.75, -0.5, -0.25, 0.0, 0.25, 0.5, 0.75)
# |p| = |2^(j/2) slope(gamma) - l| for the aligned shear
ALIGNMENT_TOLERANCE = 0.25
# a boundary point is resolved at scale j when its curvature radius spans this many shearlet lengths 2 pi 2^(-j/2)
CURVATURE_RESOLUTION = 2.0

# map shape: reach in units of 2 pi 2^(-j/2), required mass fractions and the sorted-magnitude drop
SHAPE_INDEX = ShearletIndex(Orientation.HORIZONTAL, 8, -3)
SHAPE_REACH = 4.0
SHAPE_RESTRICTED_MASS = 0.99
SHAPE_EDGE_MASS = 0.95
SHAPE_DROP_DECADES = 4.0
SHAPE_RANK_FRACTION = 0.2

# far-zone doubling: shells at distance d and 2d, d a multiple of the envelope crossover
DOUBLING_ROTATION = 1.0
DOUBLING_START = 2.0
DOUBLING_SAMPLES = 16

SymbolSource = Callable[[ShearletIndex], SparseSymbol]


def torus_offset(x, centre) -> np.ndarray:
    """x - centre wrapped into [-pi, pi)^2."""
    d = np.asarray(x, dtype=float) - np.asarray(centre, dtype=float)
    return np.mod(d + np.pi, 2.0 * np.pi) - np.pi


def decay_envelope(j: int, theta: float, offset: np.ndarray, q: float) -> np.ndarray:
    """2^(3j/2) min{1, (1 + 2^((j+1)/2) |sin(theta - gamma)|)^q / (2^j |d|)^q}, gamma the direction of d."""
    distance = np.hypot(offset[..., 0], offset[..., 1])
    gamma = np.arctan2(offset[..., 1], offset[..., 0])
    angular = (1.0 + 2.0 ** ((j + 1) / 2) * np.abs(np.sin(theta - gamma))) ** q
    with np.errstate(divide="ignore"):
        far = np.where(distance > 0, angular / (2.0**j * np.where(distance > 0, distance, 1.0)) ** q, np.inf)
    return 2.0 ** (1.5 * j) * np.minimum(1.0, far)


def aligned_index(j: int, angle: float) -> ShearletIndex:
    """The shearlet whose discrete angle is nearest to the normal angle (taken mod pi)."""
    folded = (angle + math.pi / 4.0) % math.pi - math.pi / 4.0
    half = 1 << (j // 2)
    if folded <= math.pi / 4.0:
        orientation, shear = Orientation.HORIZONTAL, round(math.tan(folded) * half)
    else:
        orientation, shear = Orientation.VERTICAL, round(half / math.tan(folded))
    return ShearletIndex(orientation, j, max(-half, min(half, shear)))


def misaligned_index(idx: ShearletIndex) -> ShearletIndex:
    """Same orientation, shear moved by 2^(j/2)/2 towards zero."""
    step = idx.shear_limit // 2
    shear = idx.shear - step if idx.shear >= 0 else idx.shear + step
    return ShearletIndex(idx.orientation, idx.j, shear)


def noise_floor(symbol: SparseSymbol, provider: FourierProvider) -> float:
    terms = np.abs(provider.coefficient(symbol.k) * symbol.values)
    return NOISE_FACTOR * float(np.finfo(float).eps) * float(terms.sum())


def _stability(values: Sequence[float]) -> float:
    values = [v for v in values if v > 0]
    return max(values) / min(values) if values else math.inf


@dataclass(frozen=True)
class DecayFit:
    index: ShearletIndex
    constant: float
    aligned: float
    orthogonal: float
    peak: float


def fit_spatial_decay(
    g: WindowFunction1D, idx: ShearletIndex, y=(0.0, 0.0), s: int = 8, q_eff: float = 2.0
) -> DecayFit:
    symbol = sample_symbol(g, idx)
    n = 1 << s
    psi = np.abs(shearlet_on_grid(symbol, y, s))
    centre = 2.0 * np.pi * shifted_translate(y, idx)
    offset = torus_offset(2.0 * np.pi * translates(s), centre).reshape(n, n, 2)
    theta = discrete_angle(idx)
    envelope = decay_envelope(idx.j, theta, offset, q_eff)

    scale = 2.0 ** (1.5 * idx.j)
    peak = symbol.total()
    constant = max(float(np.max(psi / envelope)), peak / scale)

    # local constants without the angular factor, in a band of a few 2^(-j/2)
    distance = np.hypot(offset[..., 0], offset[..., 1])
    sine = np.abs(np.sin(theta - np.arctan2(offset[..., 1], offset[..., 0])))
    width = 2.0 ** (-idx.j / 2)
    band = (distance >= 2.0 * width) & (distance <= 6.0 * width)
    radial = psi * (2.0**idx.j * distance) ** q_eff / scale
    aligned = float(radial[band & (sine < 0.25)].max(initial=0.0))
    orthogonal = float(radial[band & (sine > 0.97)].max(initial=0.0))
    return DecayFit(index=idx, constant=constant, aligned=aligned, orthogonal=orthogonal, peak=peak)


def check_spatial_decay(
    g: WindowFunction1D = DEFAULT_WINDOW,
    idx: ShearletIndex = ShearletIndex(Orientation.HORIZONTAL, 8, 0),
    y=(0.0, 0.0),
    s: int = 8,
    q_eff: float = 2.0,
    scales: Sequence[int] = (6, 8),
) -> VerificationReport:
    report = VerificationReport(
        "decay", params={"index": str(idx), "y": list(y), "s": s, "q_eff": q_eff, "scales": list(scales)}
    )
    slope = idx.shear * 2.0 ** (-idx.j / 2)
    fits = []
    for j in sorted(set(scales) | {idx.j}):
        scaled = ShearletIndex(idx.orientation, j, round(slope * 2 ** (j // 2)))
        fit = fit_spatial_decay(g, scaled, y, s, q_eff)
        fits.append(fit)
        LOG.info(f"Decay fit {scaled}: C={fit.constant:.4g}, aligned {fit.aligned:.3g}, across {fit.orthogonal:.3g}")
        report.fit(f"C[j={j}]", fit.constant)
        report.add_point(
            {"index": str(scaled), "at": "centre"},
            fit.peak / 2.0 ** (1.5 * j),
            fit.constant,
            fit.constant >= fit.peak / 2.0 ** (1.5 * j),
        )
        report.add_point(
            {"index": str(scaled), "at": "directional band"},
            fit.aligned,
            fit.orthogonal,
            fit.aligned < fit.orthogonal,
            fit.orthogonal - fit.aligned,
        )

    ratio = _stability([f.constant for f in fits])
    report.fit("stability", ratio)
    report.add_point({"scales": [f.index.j for f in fits]}, ratio, DECAY_STABILITY, ratio <= DECAY_STABILITY)

    # |psi| measured on two far-zone patches at distance d and 2d must fall like the envelope does
    fit = next(f for f in fits if f.index.j == idx.j)
    doubling = measure_doubling(g, fit.index, y, q_eff)
    bound = DECAY_STABILITY * doubling.envelope_ratio
    report.fit("doubling_ratio", doubling.ratio)
    report.add_point(
        {"doubling": True, "distance": doubling.distance, "floor": doubling.floor},
        doubling.ratio,
        bound,
        doubling.ratio <= bound or doubling.outer <= doubling.floor,
    )
    shells = (("inner", doubling.inner, doubling.inner_envelope), ("outer", doubling.outer, doubling.outer_envelope))
    for shell, value, envelope in shells:
        limit = DECAY_STABILITY * fit.constant * envelope
        report.add_point({"doubling": True, "shell": shell}, value, limit, value <= limit)
    return report


@dataclass(frozen=True)
class Doubling:
    distance: float
    inner: float
    outer: float
    inner_envelope: float
    outer_envelope: float
    floor: float

    @property
    def ratio(self) -> float:
        return self.outer / self.inner if self.inner > 0 else math.inf

    @property
    def envelope_ratio(self) -> float:
        return self.outer_envelope / self.inner_envelope


def measure_doubling(
    g: WindowFunction1D, idx: ShearletIndex, y=(0.0, 0.0), q_eff: float = 2.0, samples: int = DOUBLING_SAMPLES
) -> Doubling:
    """Largest |psi| and envelope on two patches in the far zone, the second at twice the distance.

    The patches lie DOUBLING_ROTATION off the frequency direction. The first starts at DOUBLING_START times
    the distance where the envelope leaves its plateau."""
    symbol = sample_symbol(g, idx)
    theta = discrete_angle(idx)
    crossover = (1.0 + 2.0 ** ((idx.j + 1) / 2) * abs(math.sin(DOUBLING_ROTATION))) * 2.0**-idx.j
    distance = DOUBLING_START * crossover
    t = np.linspace(0.0, 1.0, samples)
    radius, angle = np.meshgrid(1.0 + 0.25 * t, theta + DOUBLING_ROTATION + 0.1 * (t - 0.5), indexing="ij")
    patch = np.stack([radius * np.cos(angle), radius * np.sin(angle)], axis=-1)
    centre = 2.0 * np.pi * shifted_translate(y, idx)

    values, envelopes = [], []
    for scale in (distance, 2.0 * distance):
        offset = scale * patch
        values.append(float(np.max(np.abs(eval_shearlet_spatial(symbol, y, centre + offset)))))
        envelopes.append(float(np.max(decay_envelope(idx.j, theta, offset, q_eff))))
    floor = NOISE_FACTOR * float(np.finfo(float).eps) * float(np.abs(symbol.values).sum())
    LOG.info(f"Doubling {idx} at d={distance:.3g}: |psi| {values[0]:.3e} -> {values[1]:.3e}")
    return Doubling(distance, values[0], values[1], envelopes[0], envelopes[1], floor)


def far_point(e: EllipseRegion, resolution: int = 64, boundary: int = BOUNDARY_SAMPLES) -> tuple[np.ndarray, float]:
    """The point of a resolution^2 torus grid farthest from the ellipse boundary, and that distance."""
    axis = -np.pi + 2.0 * np.pi * (np.arange(resolution) + 0.5) / resolution
    c1, c2 = np.meshgrid(axis, axis, indexing="ij")
    candidates = np.column_stack([c1.ravel(), c2.ravel()])
    best, _ = boundary_distance(e, candidates, boundary)
    # outside the region only
    best[e.contains(candidates)] = -np.inf
    i = int(np.argmax(best))
    return candidates[i], float(best[i])


@dataclass(frozen=True)
class FarField:
    j: int
    index: ShearletIndex
    value: float
    floor: float

    @property
    def resolved(self) -> bool:
        return self.value > self.floor

    @property
    def level(self) -> float:
        """The coefficient, or the rounding floor when it is buried in it."""
        return max(self.value, self.floor)


def _far_value(
    symbols: SymbolSource, provider: FourierProvider, x: np.ndarray, idx: ShearletIndex
) -> tuple[float, float]:
    symbol = symbols(idx)
    value = abs(coeff_batch(symbol, provider, translate_for_centre(x, idx))[0])
    return value, noise_floor(symbol, provider)


def far_field_profile(
    e: EllipseRegion,
    g: WindowFunction1D = DEFAULT_WINDOW,
    j_list: Sequence[int] = DEFAULT_SCALES,
    provider: FourierProvider | None = None,
    x: np.ndarray | None = None,
    mapper: Mapper = map,
    symbols: SymbolSource | None = None,
) -> list[FarField]:
    """|coefficient| at a translate far from the boundary, per scale, for the shearlet best aligned
    with the normal of the nearest boundary point."""
    provider = RotatedEllipse(e) if provider is None else provider
    symbols = partial(sample_symbol, g) if symbols is None else symbols
    if x is None:
        x, _ = far_point(e)
    _, normal = boundary_distance(e, x)
    indices = [aligned_index(j, float(normal)) for j in j_list]
    profile = []
    for idx, (value, floor) in zip(indices, mapper(partial(_far_value, symbols, provider, x), indices)):
        profile.append(FarField(j=idx.j, index=idx, value=value, floor=floor))
        LOG.info(f"Far field j={idx.j}: {value:.3e} at {idx} (noise floor {floor:.1e})")
    return profile


def upper_bound_rhs(j: int, theta: float, x: np.ndarray, positions: np.ndarray, normals: np.ndarray, q: float) -> float:
    """sum over Q in Q_j^1 of (1 + 2^j |x0 - x|^2)^-q (1 + 2^(j/2) |sin(theta - gamma(x0))|)^(-5/2)."""
    d = torus_offset(positions, x)
    spatial = (1.0 + 2.0**j * np.sum(d * d, axis=-1)) ** -q
    angular = (1.0 + 2.0 ** (j / 2) * np.abs(np.sin(theta - normals))) ** -2.5
    return float(np.sum(spatial * angular))


def check_upper_bound(
    e: EllipseRegion = DEFAULT_ELLIPSE,
    g: WindowFunction1D = DEFAULT_WINDOW,
    j_list: Sequence[int] = DEFAULT_SCALES,
    q_eff: float = 2.0,
    samples: int = 8,
    provider: FourierProvider | None = None,
    mapper: Mapper = map,
) -> VerificationReport:
    provider = RotatedEllipse(e) if provider is None else provider
    j_list = sorted(j_list)
    report = VerificationReport(
        "upper", params={"region": provider.describe(), "j": j_list, "q_eff": q_eff, "samples": samples}
    )

    # far field
    x, distance = far_point(e)
    report.add_point({"far_point": x, "distance": True}, distance, "> 1", distance > 1.0, distance - 1.0)
    profile = far_field_profile(e, g, j_list, provider, x, mapper)
    for coarse, fine in zip(profile, profile[1:]):
        required = (q_eff - 0.5) * (fine.j - coarse.j)
        if fine.resolved and coarse.resolved:
            drop = math.log2(coarse.value) - math.log2(fine.value)
            report.add_point({"far": [coarse.j, fine.j]}, drop, required, drop >= required, drop - required)
        else:
            # below the rounding floor the drop can no longer be measured
            report.add_point({"far": [coarse.j, fine.j]}, fine.value, fine.floor, fine.value <= fine.floor)
            report.note(f"far field at j={fine.j} is at the noise floor {fine.floor:.2e}")
    resolved = [f for f in profile if f.resolved]
    if len(resolved) >= 2:
        slope = np.polyfit([f.j for f in resolved], np.log2([f.value for f in resolved]), 1)[0]
        report.fit("far_field_slope", slope)

    # shape of the right-hand side along the boundary
    constants = []
    for j in j_list:
        partition = dyadic_squares(j, e)
        reps = boundary_representatives(partition, e)
        chosen = np.unique(np.linspace(0, len(reps) - 1, samples).round().astype(int))
        ratios = []
        for i in chosen:
            point = reps.positions[i]
            aligned = aligned_index(j, float(reps.normal_angles[i]))
            for idx in (aligned, misaligned_index(aligned)):
                symbol = sample_symbol(g, idx)
                value = abs(coeff_batch(symbol, provider, translate_for_centre(point, idx))[0])
                rhs = upper_bound_rhs(j, discrete_angle(idx), point, reps.positions, reps.normal_angles, q_eff)
                ratios.append(value / rhs)
        constant = max(ratios) if not provider.is_zero else 0.0
        constants.append(constant)
        report.fit(f"C[j={j}]", constant)
        report.fit(f"boundary_density[j={j}]", partition.boundary_density)
        LOG.info(f"Upper bound j={j}: C={constant:.4g} over {len(ratios)} boundary translates")

    if provider.is_zero:
        report.add_point({"constants": True}, constants, 0.0, all(c == 0.0 for c in constants))
    else:
        ratio = _stability(constants)
        report.fit("stability", ratio)
        report.add_point({"constants": j_list}, ratio, UPPER_STABILITY, ratio <= UPPER_STABILITY)
    return report


@dataclass(frozen=True)
class BoundaryCoefficient:
    index: ShearletIndex
    slope: float
    position: np.ndarray
    value: float
    misaligned: float
    curvature: float
    mismatch: float


def slope_of(orientation: Orientation, angle: float) -> float:
    """tan(angle) for horizontal shearlets, cot(angle) for vertical ones."""
    return math.tan(angle) if orientation is Orientation.HORIZONTAL else 1.0 / math.tan(angle)


def resolves_curvature(curvature: float, j: int) -> bool:
    """Whether the curvature radius spans CURVATURE_RESOLUTION shearlet lengths at scale j."""
    return curvature * CURVATURE_RESOLUTION * 2.0 * math.pi * 2.0 ** (-j / 2) <= 1.0


def lower_bound_samples(
    e: EllipseRegion,
    g: WindowFunction1D,
    j: int,
    slopes: Sequence[float] = LOWER_BOUND_SLOPES,
    provider: FourierProvider | None = None,
    orientations: Sequence[Orientation] = tuple(Orientation),
) -> list[BoundaryCoefficient]:
    """|coefficient| of shearlets centred just inside the boundary point whose normal matches their angle.

    For every slope and orientation the shear is slope * 2^(j/2), so the same angles exist at every j.
    The centre moves inwards along e1 for horizontal and e2 for vertical shearlets."""
    provider = RotatedEllipse(e) if provider is None else provider
    half = 1 << (j // 2)
    out = []
    for orientation in orientations:
        axis = np.array([1.0, 0.0]) if orientation is Orientation.HORIZONTAL else np.array([0.0, 1.0])
        for slope in slopes:
            shear = slope * half
            if shear != round(shear):
                raise InvalidIndexError(f"Slope {slope} has no shear at j={j}")
            idx = ShearletIndex(orientation, j, int(shear))
            point = boundary_point_with_normal(e, discrete_angle(idx))
            inward = -math.copysign(1.0, float(point.normal @ axis)) * axis
            x = point.position + NORMAL_OFFSET * 2.0**-j * inward
            mismatch = 2.0 ** (j / 2) * slope_of(orientation, point.normal_angle) - idx.shear
            value = abs(coeff_batch(sample_symbol(g, idx), provider, translate_for_centre(x, idx))[0])
            control = misaligned_index(idx)
            misaligned = abs(coeff_batch(sample_symbol(g, control), provider, translate_for_centre(x, control))[0])
            out.append(BoundaryCoefficient(idx, slope, x, value, misaligned, point.curvature, mismatch))
    return out


def resolved_configurations(
    e: EllipseRegion, j: int, slopes: Sequence[float] = LOWER_BOUND_SLOPES
) -> dict[Orientation, list[float]]:
    """The slopes per orientation whose matching boundary point is resolved at scale j."""
    out: dict[Orientation, list[float]] = {}
    for orientation in Orientation:
        for slope in slopes:
            point = boundary_point_with_normal(e, angle_of(orientation, 0, slope))
            if resolves_curvature(point.curvature, j):
                out.setdefault(orientation, []).append(slope)
    return out


def check_lower_bound(
    e: EllipseRegion = DEFAULT_ELLIPSE,
    g: WindowFunction1D = DEFAULT_WINDOW,
    j_list: Sequence[int] = DEFAULT_SCALES,
    slopes: Sequence[float] = LOWER_BOUND_SLOPES,
    mapper: Mapper = map,
) -> VerificationReport:
    j_list = sorted(j_list)
    provider = RotatedEllipse(e)
    configs = resolved_configurations(e, j_list[0], slopes)
    report = VerificationReport(
        "lower",
        params={
            "region": provider.describe(),
            "j": j_list,
            "slopes": list(slopes),
            "normal_offset": NORMAL_OFFSET,
            "curvature_resolution": CURVATURE_RESOLUTION,
            "resolved": {str(o): s for o, s in configs.items()},
        },
    )
    report.note(f"stability window x{LOWER_STABILITY:g} across j is the operational reading of 'large j'")
    report.note(f"boundary points with curvature radius below {CURVATURE_RESOLUTION:g} shearlet lengths are skipped")
    count = sum(len(s) for s in configs.values())
    report.add_point({"resolved_configurations": True}, count, "> 0", count > 0)
    if not count:
        return report
    far = {f.j: f.level for f in far_field_profile(e, g, j_list, provider, mapper=mapper)}

    per_config: dict[tuple[Orientation, float], list[float]] = {}
    for j in j_list:
        for orientation, chosen in configs.items():
            for sample in lower_bound_samples(e, g, j, chosen, provider, (orientation,)):
                key = (sample.index.orientation, sample.slope)
                per_config.setdefault(key, []).append(sample.value)
                where = {"index": str(sample.index), "x": sample.position}
                report.add_point(where, sample.value, "> 0", sample.value > 0)
                report.add_point(
                    {**where, "p": True},
                    sample.mismatch,
                    ALIGNMENT_TOLERANCE,
                    abs(sample.mismatch) <= ALIGNMENT_TOLERANCE,
                )
                report.add_point(
                    {**where, "far_field": far[j]},
                    sample.value,
                    FAR_FIELD_MARGIN * far[j],
                    sample.value >= FAR_FIELD_MARGIN * far[j],
                )
                report.add_point(
                    {**where, "misaligned": True},
                    sample.misaligned,
                    sample.value / MISALIGNED_FACTOR,
                    sample.misaligned * MISALIGNED_FACTOR <= sample.value,
                )

    worst = 0.0
    for (orientation, slope), values in per_config.items():
        ratio = _stability(values)
        worst = max(worst, ratio)
        report.add_point(
            {"orientation": str(orientation), "slope": slope, "j": j_list},
            values,
            LOWER_STABILITY,
            ratio <= LOWER_STABILITY,
            LOWER_STABILITY - ratio,
        )
    report.fit("stability", worst)
    report.fit("C", min(min(v) for v in per_config.values()))
    return report


def check_map_shape(
    e: EllipseRegion = DEFAULT_ELLIPSE,
    g: WindowFunction1D = DEFAULT_WINDOW,
    idx: ShearletIndex = SHAPE_INDEX,
    s: int = 8,
    mapper: Mapper = map,
) -> VerificationReport:
    """Where the mass of one coefficient map and of the full edge map sits relative to the boundary.

    Distances are taken on the torus, since the coefficients see the periodized region."""
    provider = RotatedEllipse(e)
    j = idx.j
    reach = SHAPE_REACH * 2.0 * np.pi * 2.0 ** (-j / 2)
    window = 2.0 * abs(angle_of(idx.orientation, j, idx.shear + 2) - angle_of(idx.orientation, j, idx.shear - 2))
    report = VerificationReport(
        "shape", params={"region": provider.describe(), "index": str(idx), "s": s, "reach": reach, "window": window}
    )

    cmap = coeff_map(sample_symbol(g, idx), provider, s)
    magnitude = cmap.magnitude().ravel()
    centres = 2.0 * np.pi * shifted_translate(translates(s), idx)
    distance, _ = boundary_distance(e, centres, normal=discrete_angle(idx), window=window)
    restricted = float(magnitude[distance <= reach].sum() / magnitude.sum())
    report.fit("restricted_mass", restricted)
    report.add_point(
        {"map": str(idx), "aligned_arcs": True},
        restricted,
        SHAPE_RESTRICTED_MASS,
        restricted >= SHAPE_RESTRICTED_MASS,
        restricted - SHAPE_RESTRICTED_MASS,
    )

    ranked = cmap.sorted_magnitudes()
    tail = ranked[int(SHAPE_RANK_FRACTION * ranked.size)]
    drop = math.log10(ranked[0] / tail) if tail > 0 else math.inf
    report.fit("drop_decades", drop)
    margin = drop - SHAPE_DROP_DECADES
    report.add_point({"map": str(idx), "sorted": True}, drop, SHAPE_DROP_DECADES, margin >= 0, margin)

    edges = edge_map(g, j, s, provider, mapper=mapper).magnitudes.ravel()
    distance, _ = boundary_distance(e, 2.0 * np.pi * translates(s))
    near = float(edges[distance <= reach].sum() / edges.sum())
    report.fit("edge_mass", near)
    report.add_point({"edge_map": j}, near, SHAPE_EDGE_MASS, near >= SHAPE_EDGE_MASS, near - SHAPE_EDGE_MASS)
    LOG.info(f"Map shape {idx}: {restricted:.4f} near aligned arcs, drop {drop:.2f} decades, edge map {near:.4f}")
    return report
