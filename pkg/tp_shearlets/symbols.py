import csv
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.spatial import cKDTree

from .primitives import InvalidIndexError, InvalidParameterError
from .window1d import as_finite

LOG = logging.getLogger(__name__)

# Cephes j1: rational approximation on [0, 5], amplitude/phase form beyond.
BESSEL_SPLIT = 5.0
SQ2OPI = 7.9788456080286535587989e-1
THPIO4 = 2.35619449019234492885
Z1 = 1.46819706421238932572e1
Z2 = 4.92184563216946036703e1

RP1 = (
    -8.99971225705559398224e8,
    4.52228297998194034323e11,
    -7.27494245221818276015e13,
    3.68295732863852883286e15,
)
RQ1 = (
    6.20836478118054335476e2,
    2.56987256757748830383e5,
    8.35146791431949253037e7,
    2.21511595479792499675e10,
    4.74914122079991414898e12,
    7.84369607876235854894e14,
    8.95222336184627338078e16,
    5.32278620332680085395e18,
)
PP1 = (
    7.62125616208173112003e-4,
    7.31397056940917570436e-2,
    1.12719608129684925192e0,
    5.11207951146807644818e0,
    8.42404590141772420927e0,
    5.21451598682361504063e0,
    1.00000000000000000254e0,
)
PQ1 = (
    5.71323128072548699714e-4,
    6.88455908754495404082e-2,
    1.10514232634061696926e0,
    5.07386386128601488557e0,
    8.39985554327604159757e0,
    5.20982848682361821619e0,
    9.99999999999999997461e-1,
)
QP1 = (
    5.10862594750176621635e-2,
    4.98213872951233449420e0,
    7.58238284132545283818e1,
    3.66779609360150777800e2,
    7.10856304998926107277e2,
    5.97489612400613639965e2,
    2.11688757100572135698e2,
    2.52070205858023719784e1,
)
QQ1 = (
    7.42373277035675149943e1,
    1.05644886038262816351e3,
    4.98641058337653607651e3,
    9.56231892404756170795e3,
    7.99704160447350683650e3,
    2.82619278517639096600e3,
    3.36093607810698293419e2,
)

# sub-cells per dyadic square side in the boundary intersection test
SQUARE_SUBDIVISION = 16
BOUNDARY_SAMPLES = 8192


def _polevl(x: np.ndarray, coef: tuple[float, ...]) -> np.ndarray:
    ans = np.full_like(x, coef[0])
    for c in coef[1:]:
        ans = ans * x + c
    return ans


def _p1evl(x: np.ndarray, coef: tuple[float, ...]) -> np.ndarray:
    """Monic variant: leading coefficient 1 is implied."""
    ans = x + coef[0]
    for c in coef[1:]:
        ans = ans * x + c
    return ans


def _j1_large(x: np.ndarray) -> np.ndarray:
    w = BESSEL_SPLIT / x
    z = w * w
    p = _polevl(z, PP1) / _polevl(z, PQ1)
    q = _polevl(z, QP1) / _p1evl(z, QQ1)
    xn = x - THPIO4
    return SQ2OPI * (p * np.cos(xn) - w * q * np.sin(xn)) / np.sqrt(x)


def _j1_over_x(x) -> np.ndarray:
    """J1(x)/x for x >= 0; the small branch is evaluated without the factor x, so x -> 0 gives 1/2."""
    shape = np.shape(x)
    x = np.asarray(x, dtype=float).reshape(-1)
    out = np.empty_like(x)
    small = x <= BESSEL_SPLIT
    z = x[small] ** 2
    out[small] = _polevl(z, RP1) / _p1evl(z, RQ1) * (z - Z1) * (z - Z2)
    large = x[~small]
    out[~small] = _j1_large(large) / large
    out[x == 0] = 0.5
    return out.reshape(shape)


def bessel_j1(x):
    """Bessel function of the first kind of order one.

    Negative arguments use J1(-x) = -J1(x)."""
    x = as_finite(x)
    ax = np.abs(x)
    out = np.sign(x) * ax * _j1_over_x(ax)
    return out[()] if out.ndim == 0 else out


def disc_ft(xi):
    """Fourier transform of the unit disc indicator, J1(|xi|)/(2 pi |xi|), normalized by (2 pi)^-2."""
    xi = as_finite(xi, "xi")
    out = _j1_over_x(np.hypot(xi[..., 0], xi[..., 1])) / (2.0 * np.pi)
    return out[()] if out.ndim == 0 else out


def _rotation(gamma: float) -> np.ndarray:
    c, s = math.cos(gamma), math.sin(gamma)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class EllipseRegion:
    """c + R_gamma {(u1/a)^2 + (u2/b)^2 <= 1}, inside (-pi, pi)^2."""

    a: float
    b: float
    gamma: float = 0.0
    center: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self) -> None:
        for name in ("a", "b", "gamma"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise InvalidParameterError(f"Ellipse {name} must be finite, got {value!r}")
        if self.a <= 0 or self.b <= 0:
            raise InvalidParameterError(f"Ellipse semi-axes must be positive, got a={self.a}, b={self.b}")
        if max(self.a, self.b) >= math.pi:
            raise InvalidParameterError(f"Ellipse semi-axes must be below pi, got a={self.a}, b={self.b}")
        object.__setattr__(self, "gamma", self.gamma % (2.0 * math.pi))
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if any(abs(c) + h >= math.pi for c, h in zip(self.center, self.half_extent())):
            raise InvalidParameterError(f"Ellipse {self} does not fit into (-pi, pi)^2")

    def half_extent(self) -> tuple[float, float]:
        c, s = math.cos(self.gamma), math.sin(self.gamma)
        return (math.hypot(self.a * c, self.b * s), math.hypot(self.a * s, self.b * c))

    def rotation(self) -> np.ndarray:
        return _rotation(self.gamma)

    @property
    def area(self) -> float:
        return math.pi * self.a * self.b

    def to_local(self, x) -> np.ndarray:
        """R_gamma^T (x - c) for points of shape (..., 2)."""
        return (as_finite(x, "x") - np.asarray(self.center)) @ self.rotation()

    def implicit(self, x) -> np.ndarray:
        """Negative inside, zero on the boundary, positive outside."""
        u = self.to_local(x)
        return (u[..., 0] / self.a) ** 2 + (u[..., 1] / self.b) ** 2 - 1.0

    def contains(self, x) -> np.ndarray:
        return self.implicit(x) <= 0.0

    def describe(self) -> str:
        text = f"ellipse(a={self.a:g},b={self.b:g},gamma={self.gamma:.10g}"
        if any(self.center):
            text += f",center=({self.center[0]:g},{self.center[1]:g})"
        return text + ")"


def ellipse_ft(e: EllipseRegion, xi):
    """F[D_{a,b,gamma}](xi) = ab J1(|(a u1, b u2)|)/(2 pi |(a u1, b u2)|) at u = R_gamma^T xi.

    The center offset is not applied here; see RotatedEllipse."""
    u = as_finite(xi, "xi") @ e.rotation()
    scaled = np.stack([e.a * u[..., 0], e.b * u[..., 1]], axis=-1)
    out = e.a * e.b * np.asarray(disc_ft(scaled))
    return out[()] if out.ndim == 0 else out


class FourierProvider(ABC):
    """Fourier coefficients c_k of a 2 pi periodic test function."""

    @abstractmethod
    def coefficient(self, k: np.ndarray) -> np.ndarray:
        """c_k for integer frequencies of shape (..., 2); always complex."""

    @abstractmethod
    def describe(self) -> str:
        ...

    @property
    def is_zero(self) -> bool:
        return False


@dataclass(frozen=True)
class RotatedEllipse(FourierProvider):
    region: EllipseRegion

    def coefficient(self, k: np.ndarray) -> np.ndarray:
        k = np.asarray(k)
        values = np.asarray(ellipse_ft(self.region, k.astype(np.float64)), dtype=np.complex128)
        if any(self.region.center):
            values = values * np.exp(-1j * (k.astype(np.float64) @ np.asarray(self.region.center)))
        return values

    def describe(self) -> str:
        return self.region.describe()


class FourierTable(FourierProvider):
    """Finitely many nonzero coefficients; every other frequency is 0."""

    def __init__(self, entries: Mapping[tuple[int, int], complex]) -> None:
        keys = sorted(entries)
        for key in keys:
            if len(key) != 2 or any(int(v) != v for v in key):
                raise InvalidIndexError(f"Table keys must be integer pairs, got {key!r}")
            if not np.isfinite(complex(entries[key])):
                raise InvalidParameterError(f"Table value at {key} must be finite, got {entries[key]!r}")
        self.keys = np.array(keys, dtype=np.int64).reshape(-1, 2)
        self.values = np.array([complex(entries[k]) for k in keys], dtype=np.complex128)
        self._codes = self.__encode(self.keys)

    @staticmethod
    def __encode(k: np.ndarray) -> np.ndarray:
        # Exact for |k| < 2^31, far beyond any symbol support.
        return k[..., 0].astype(np.int64) * (1 << 32) + k[..., 1].astype(np.int64)

    def coefficient(self, k: np.ndarray) -> np.ndarray:
        k = np.asarray(k, dtype=np.int64)
        codes = np.asarray(FourierTable.__encode(k))
        flat = codes.reshape(-1)
        out = np.zeros(flat.shape, dtype=np.complex128)
        if self.values.size:
            pos = np.searchsorted(self._codes, flat).clip(0, self._codes.size - 1)
            hit = self._codes[pos] == flat
            out[hit] = self.values[pos[hit]]
        return out.reshape(codes.shape)

    def describe(self) -> str:
        return f"table({self.values.size} entries)"

    @property
    def is_zero(self) -> bool:
        return not np.any(self.values)

    def items(self) -> Iterable[tuple[tuple[int, int], complex]]:
        for key, value in zip(self.keys, self.values):
            yield (int(key[0]), int(key[1])), complex(value)

    @classmethod
    def from_csv(cls, file: Path) -> "FourierTable":
        entries: dict[tuple[int, int], complex] = {}
        with open(file, newline="") as f:
            for lineno, row in enumerate(csv.reader(f), start=1):
                if not row or row[0].strip().startswith("#"):
                    continue
                if lineno == 1 and row[0].strip() == "k1":
                    continue
                try:
                    k1, k2, re, im = row
                    key = (int(k1), int(k2))
                    entries[key] = entries.get(key, 0j) + complex(float(re), float(im))
                except ValueError as e:
                    e.add_note(f'[E]: Malformed row {lineno} in "{file}", expected k1,k2,re,im')
                    raise InvalidParameterError(f'Malformed Fourier table "{file}" at row {lineno}') from e
        LOG.debug(f"Read {len(entries)} coefficients from {file}")
        return cls(entries)

    def to_csv(self, file: Path) -> None:
        with open(file, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["k1", "k2", "re", "im"])
            for (k1, k2), value in self.items():
                writer.writerow([k1, k2, repr(value.real), repr(value.imag)])


@dataclass(frozen=True)
class LinearCombination(FourierProvider):
    terms: tuple[tuple[complex, FourierProvider], ...]

    def coefficient(self, k: np.ndarray) -> np.ndarray:
        k = np.asarray(k)
        out = np.zeros(k.shape[:-1], dtype=np.complex128)
        for weight, provider in self.terms:
            out = out + weight * provider.coefficient(k)
        return out

    def describe(self) -> str:
        return " + ".join(f"{complex(w):g}*{p.describe()}" for w, p in self.terms) or "zero"

    @property
    def is_zero(self) -> bool:
        return all(w == 0 or p.is_zero for w, p in self.terms)


def fourier_coefficient(p: FourierProvider, k):
    out = p.coefficient(np.asarray(k, dtype=np.int64))
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class BoundaryPoint:
    position: np.ndarray
    normal_angle: float
    curvature: float
    parameter: float

    @property
    def normal(self) -> np.ndarray:
        return np.array([math.cos(self.normal_angle), math.sin(self.normal_angle)])


@dataclass(frozen=True, eq=False)
class BoundarySamples:
    """Vectorized boundary geometry at parameters t: positions (n, 2), outward normal angles, curvatures."""

    parameters: np.ndarray
    positions: np.ndarray
    normal_angles: np.ndarray
    curvatures: np.ndarray

    def __len__(self) -> int:
        return self.parameters.size

    def point(self, i: int) -> BoundaryPoint:
        return BoundaryPoint(
            position=self.positions[i].copy(),
            normal_angle=float(self.normal_angles[i]),
            curvature=float(self.curvatures[i]),
            parameter=float(self.parameters[i]),
        )


def boundary_samples(e: EllipseRegion, t) -> BoundarySamples:
    t = np.atleast_1d(as_finite(t, "t"))
    ct, st = np.cos(t), np.sin(t)
    rotation = e.rotation()
    local = np.column_stack([e.a * ct, e.b * st])
    positions = local @ rotation.T + np.asarray(e.center)
    # gradient of the implicit function, rotated
    grad = np.column_stack([ct / e.a, st / e.b]) @ rotation.T
    normal_angles = np.arctan2(grad[:, 1], grad[:, 0])
    curvatures = e.a * e.b / (e.a**2 * st**2 + e.b**2 * ct**2) ** 1.5
    return BoundarySamples(parameters=t, positions=positions, normal_angles=normal_angles, curvatures=curvatures)


def boundary_points(e: EllipseRegion, n: int) -> list[BoundaryPoint]:
    if n < 4:
        raise InvalidParameterError(f"At least 4 boundary points are required, got {n}")
    samples = boundary_samples(e, 2.0 * np.pi * np.arange(n) / n)
    return [samples.point(i) for i in range(n)]


def boundary_point_with_normal(e: EllipseRegion, angle: float) -> BoundaryPoint:
    """The boundary point whose outward normal points along angle."""
    local = angle - e.gamma
    t = math.atan2(e.b * math.sin(local), e.a * math.cos(local))
    return boundary_samples(e, t).point(0)


def normal_offset(angles, reference: float) -> np.ndarray:
    """Signed angle from reference to each normal, folded into [-pi/2, pi/2) since normals count mod pi."""
    return np.mod(np.asarray(angles, dtype=float) - reference + math.pi / 2.0, math.pi) - math.pi / 2.0


def _torus_coordinates(x: np.ndarray) -> np.ndarray:
    wrapped = np.mod(x + math.pi, 2.0 * math.pi)
    wrapped[wrapped >= 2.0 * math.pi] = 0.0
    return wrapped


def boundary_distance(
    e: EllipseRegion,
    points,
    samples: int = BOUNDARY_SAMPLES,
    normal: float | None = None,
    window: float = math.pi / 2.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Distance on the torus from points (..., 2) to the boundary of the periodized region.

    Returns the distances and the normal angle of the nearest boundary sample. With normal given
    only the arcs whose normal lies within window of it (mod pi) are searched."""
    x = as_finite(points, "points")
    curve = boundary_samples(e, 2.0 * np.pi * np.arange(samples) / samples)
    keep = np.ones(len(curve), dtype=bool)
    if normal is not None:
        keep = np.abs(normal_offset(curve.normal_angles, normal)) <= window
        if not keep.any():
            raise InvalidParameterError(f"No boundary arc has a normal within {window:g} of {normal:g}")
    tree = cKDTree(_torus_coordinates(curve.positions[keep]), boxsize=2.0 * math.pi)
    distance, nearest = tree.query(_torus_coordinates(x.reshape(-1, 2)))
    shape = x.shape[:-1]
    return distance.reshape(shape), curve.normal_angles[keep][nearest].reshape(shape)


@dataclass(frozen=True, eq=False)
class DyadicPartition:
    """The 2^(j/2) x 2^(j/2) squares of side 2 pi 2^(-j/2) on [-pi, pi)^2.

    boundary[n1, n2] marks Q_j^1, the squares that meet the ellipse boundary."""

    j: int
    boundary: np.ndarray

    @property
    def per_axis(self) -> int:
        return 1 << (self.j // 2)

    @property
    def side(self) -> float:
        return 2.0 * np.pi / self.per_axis

    @property
    def total(self) -> int:
        return self.per_axis**2

    def q1(self) -> np.ndarray:
        return np.argwhere(self.boundary)

    def q0(self) -> np.ndarray:
        return np.argwhere(~self.boundary)

    def square(self, n1: int, n2: int) -> tuple[tuple[float, float], tuple[float, float]]:
        """Half-open bounds ((x1_lo, x1_hi), (x2_lo, x2_hi))."""
        lo1, lo2 = -np.pi + n1 * self.side, -np.pi + n2 * self.side
        return (lo1, lo1 + self.side), (lo2, lo2 + self.side)

    def centres(self, squares: np.ndarray) -> np.ndarray:
        return -np.pi + (np.asarray(squares) + 0.5) * self.side

    def locate(self, x) -> np.ndarray:
        """Square index of points x (..., 2) in [-pi, pi)^2."""
        return np.floor((as_finite(x, "x") + np.pi) / self.side).astype(np.int64).clip(0, self.per_axis - 1)

    @property
    def boundary_density(self) -> float:
        """|Q_j^1| / 2^(j/2)."""
        return int(self.boundary.sum()) / self.per_axis


def dyadic_squares(j: int, e: EllipseRegion) -> DyadicPartition:
    if j < 2 or j % 2:
        raise InvalidIndexError(f"Dyadic squares need an even scale j >= 2, got {j}")
    per_axis = 1 << (j // 2)
    sub = SQUARE_SUBDIVISION
    axis = np.linspace(-np.pi, np.pi, sub * per_axis + 1)
    x1, x2 = np.meshgrid(axis, axis, indexing="ij")
    values = e.implicit(np.stack([x1, x2], axis=-1))
    # (per_axis, per_axis, sub + 1, sub + 1): corners and sub-grid of every square
    windows = sliding_window_view(values, (sub + 1, sub + 1))[::sub, ::sub]
    low = windows.min(axis=(-2, -1))
    high = windows.max(axis=(-2, -1))
    boundary = (low <= 0.0) & (high >= 0.0)
    LOG.debug(f"j={j}: {int(boundary.sum())} of {per_axis**2} squares meet the boundary")
    return DyadicPartition(j=j, boundary=boundary)


@dataclass(frozen=True, eq=False)
class BoundaryRepresentatives:
    squares: np.ndarray
    positions: np.ndarray
    normal_angles: np.ndarray
    curvatures: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return self.squares.shape[0]


def boundary_representatives(
    partition: DyadicPartition, e: EllipseRegion, oversample: int = 64
) -> BoundaryRepresentatives:
    """A point x0 on the boundary inside (or next to) every Q in Q_j^1, with its normal angle."""
    n = max(256, oversample * partition.per_axis)
    samples = boundary_samples(e, 2.0 * np.pi * np.arange(n) / n)
    owner = partition.locate(samples.positions)
    squares = partition.q1()
    centres = partition.centres(squares)

    chosen = np.empty(len(squares), dtype=np.int64)
    by_square: dict[tuple[int, int], list[int]] = {}
    for i, (n1, n2) in enumerate(owner):
        by_square.setdefault((int(n1), int(n2)), []).append(i)
    for row, (square, centre) in enumerate(zip(squares, centres)):
        candidates = by_square.get((int(square[0]), int(square[1])))
        # squares grazed between sub-grid samples fall back to the nearest sample overall
        pool = np.asarray(candidates) if candidates else np.arange(n)
        distance = np.hypot(*(samples.positions[pool] - centre).T)
        chosen[row] = pool[int(np.argmin(distance))]

    return BoundaryRepresentatives(
        squares=squares,
        positions=samples.positions[chosen],
        normal_angles=samples.normal_angles[chosen],
        curvatures=samples.curvatures[chosen],
    )
