import logging
import math
import struct
from dataclasses import dataclass
from enum import StrEnum
from typing import Self

import numpy as np

from .primitives import (
    SYMBOL_ENTRY_DTYPE,
    SYMBOL_HEADER_FORMAT,
    InvalidIndexError,
    ResourceError,
    Serializable,
    Sizes,
    UndefinedAngleError,
)
from .window1d import WindowFunction1D, as_finite, eval_gtilde

LOG = logging.getLogger(__name__)

# Entries below this are dropped from sampled symbols (denormal guard).
SYMBOL_FLOOR = 1e-300
DEFAULT_MEMORY_BUDGET = 2 * 1024**3
# int64 k (2x), float64 value and the temporaries of the candidate scan
CANDIDATE_BYTES = 8 * 2 + 8 + 8 * 4
SPATIAL_CHUNK = 1 << 22


class Orientation(StrEnum):
    HORIZONTAL = "h"
    VERTICAL = "v"

    @property
    def code(self) -> int:
        return 0 if self is Orientation.HORIZONTAL else 1

    @classmethod
    def from_code(cls, code: int) -> "Orientation":
        return (cls.HORIZONTAL, cls.VERTICAL)[code]


@dataclass(frozen=True, order=True)
class ShearletIndex:
    orientation: Orientation
    j: int
    shear: int

    def __post_init__(self) -> None:
        try:
            object.__setattr__(self, "orientation", Orientation(self.orientation))
        except ValueError as e:
            raise InvalidIndexError(f"Unknown orientation {self.orientation!r}") from e
        if self.j < 0 or self.j % 2:
            raise InvalidIndexError(f"Scale j must be even and non-negative, got {self.j}")
        if abs(self.shear) > self.shear_limit:
            raise InvalidIndexError(f"Shear |l| must not exceed 2^(j/2) = {self.shear_limit}, got {self.shear}")

    @property
    def shear_limit(self) -> int:
        return 1 << (self.j // 2)

    @property
    def horizontal(self) -> bool:
        return self.orientation is Orientation.HORIZONTAL

    def __str__(self) -> str:
        return f"{self.orientation}:{self.j}:{self.shear}"


@dataclass(frozen=True)
class ShearMatrix:
    entries: tuple[tuple[int, int], tuple[int, int]]

    @property
    def determinant(self) -> int:
        (a, b), (c, d) = self.entries
        return a * d - b * c

    def as_array(self) -> np.ndarray:
        return np.array(self.entries, dtype=np.int64)


def shear_matrix(idx: ShearletIndex) -> ShearMatrix:
    fine = 1 << idx.j
    coarse = 1 << (idx.j // 2)
    if idx.horizontal:
        entries = ((fine, idx.shear * coarse), (0, coarse))
    else:
        entries = ((coarse, 0), (idx.shear * coarse, fine))
    matrix = ShearMatrix(entries)
    assert matrix.determinant == 1 << (3 * idx.j // 2)
    return matrix


def angle_of(orientation: Orientation, j: int, shear: float) -> float:
    """Discrete angle without the |l| <= 2^(j/2) restriction, for cone edges l +- 2."""
    slope = shear * 2.0 ** (-j / 2)
    if orientation is Orientation.HORIZONTAL:
        return math.atan(slope)
    # arccot with range (0, pi)
    return math.pi / 2 - math.atan(slope)


def discrete_angle(idx: ShearletIndex) -> float:
    return angle_of(idx.orientation, idx.j, idx.shear)


def _symbol_values(g: WindowFunction1D, idx: ShearletIndex, xi1: np.ndarray, xi2: np.ndarray) -> np.ndarray:
    fine = 2.0 ** (-idx.j)
    coarse = 2.0 ** (-idx.j / 2)
    shear_fine = idx.shear * fine
    if idx.horizontal:
        return eval_gtilde(g, fine * xi1) * g(coarse * xi2 - shear_fine * xi1)
    return g(coarse * xi1 - shear_fine * xi2) * eval_gtilde(g, fine * xi2)


def eval_symbol(g: WindowFunction1D, idx: ShearletIndex, xi) -> np.ndarray | float:
    """Psi_{j,l}(xi) = Psi(N^{-T} xi) for xi of shape (..., 2)."""
    xi = as_finite(xi, "xi")
    values = np.asarray(_symbol_values(g, idx, xi[..., 0], xi[..., 1]))
    return values[()] if values.ndim == 0 else values


@dataclass(frozen=True, eq=False)
class SparseSymbol(Serializable):
    """Nonzero integer samples of Psi_{j,l}; k has shape (n, 2), ordered by outer then inner coordinate."""

    index: ShearletIndex
    k: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        assert self.k.shape == (self.values.size, 2)
        self.k.setflags(write=False)
        self.values.setflags(write=False)

    @property
    def count(self) -> int:
        return int(self.values.size)

    def total(self) -> float:
        return float(self.values.sum())

    def __bytes__(self) -> bytes:
        header = struct.pack(
            SYMBOL_HEADER_FORMAT, self.index.orientation.code, self.index.j, self.index.shear, self.count
        )
        entries = np.empty(self.count, dtype=SYMBOL_ENTRY_DTYPE)
        entries["k1"] = self.k[:, 0]
        entries["k2"] = self.k[:, 1]
        entries["value"] = self.values
        return header + entries.tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> Self:
        orientation, j, shear, count = struct.unpack(SYMBOL_HEADER_FORMAT, data[: Sizes.SYMBOL_HEADER_SIZE])
        body = data[Sizes.SYMBOL_HEADER_SIZE :]
        assert len(body) == count * Sizes.SYMBOL_ENTRY_SIZE, "Truncated symbol dump"
        entries = np.frombuffer(body, dtype=SYMBOL_ENTRY_DTYPE, count=count)
        k = np.column_stack([entries["k1"], entries["k2"]]).astype(np.int64)
        values = entries["value"].astype(np.float64)
        return cls(index=ShearletIndex(Orientation.from_code(orientation), j, shear), k=k, values=values)

    @property
    def SIZE(self) -> int:
        return Sizes.SYMBOL_HEADER_SIZE + self.count * Sizes.SYMBOL_ENTRY_SIZE


def _support_runs(idx: ShearletIndex) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Outer (fine) coordinates and, per outer value, the closed inner range [lo, hi] holding the support."""
    fine = 1 << idx.j
    half = 1 << (idx.j // 2)
    # g~(2^-j k) > 0 only for 2^j/3 < |k| < 2^(j+2)/3
    outer_min = fine // 3
    outer_max = -(-4 * fine // 3)
    positive = np.arange(outer_min, outer_max + 1, dtype=np.int64)
    outer = np.concatenate([-positive[::-1], positive])
    # |2^(-j/2) k_in - l 2^(-j) k_out| < 2/3  <=>  |k_in - l k_out / 2^(j/2)| < (2/3) 2^(j/2)
    centre = idx.shear * outer / half
    width = 2.0 * half / 3.0
    lo = np.floor(centre - width).astype(np.int64)
    hi = np.ceil(centre + width).astype(np.int64)
    return outer, lo, hi


def sample_symbol(
    g: WindowFunction1D, idx: ShearletIndex, memory_budget: int = DEFAULT_MEMORY_BUDGET
) -> SparseSymbol:
    if idx.j < 2:
        raise InvalidIndexError(f"Symbol sampling needs j >= 2, got {idx.j}")

    outer, lo, hi = _support_runs(idx)
    counts = hi - lo + 1
    total = int(counts.sum())
    required = total * CANDIDATE_BYTES
    if required > memory_budget:
        raise ResourceError(
            f"Sampling {idx} scans {total} frequencies and needs about {required} bytes, "
            f"the memory budget is {memory_budget} bytes"
        )

    k_outer = np.repeat(outer, counts)
    run_start = np.repeat(np.cumsum(counts) - counts, counts)
    k_inner = np.repeat(lo, counts) + (np.arange(total, dtype=np.int64) - run_start)
    if idx.horizontal:
        k1, k2 = k_outer, k_inner
    else:
        k1, k2 = k_inner, k_outer

    values = np.asarray(_symbol_values(g, idx, k1.astype(np.float64), k2.astype(np.float64)))
    keep = values > SYMBOL_FLOOR
    k = np.column_stack([k1[keep], k2[keep]])
    LOG.debug(f"Sampled {idx}: {int(keep.sum())} of {total} candidates")
    return SparseSymbol(index=idx, k=k, values=values[keep].copy())


def cone_contains(idx: ShearletIndex, xi) -> np.ndarray | bool:
    """Membership of xi (shape (..., 2)) in the polar cone W_{j,l}."""
    xi = as_finite(xi, "xi")
    x1, x2 = xi[..., 0], xi[..., 1]
    radius = np.hypot(x1, x2)
    if np.any(radius == 0):
        raise UndefinedAngleError("The polar angle of xi = 0 is undefined")

    if idx.horizontal:
        # symbols are even: fold into [-pi/2, pi/2]
        flip = x1 < 0
        theta = np.arctan2(np.where(flip, -x2, x2), np.where(flip, -x1, x1))
        low = angle_of(idx.orientation, idx.j, idx.shear - 2)
        high = angle_of(idx.orientation, idx.j, idx.shear + 2)
    else:
        # fold into [0, pi]
        flip = x2 < 0
        theta = np.arctan2(np.where(flip, -x2, x2), np.where(flip, -x1, x1))
        low = angle_of(idx.orientation, idx.j, idx.shear + 2)
        high = angle_of(idx.orientation, idx.j, idx.shear - 2)

    inside = (radius > 2.0**idx.j / 3.0) & (radius < 2.0 ** (idx.j + 1)) & (theta > low) & (theta < high)
    return inside[()] if inside.ndim == 0 else inside


@dataclass(frozen=True)
class PatternGrid:
    """P(N_{j,l}) as the tensor grid {step_1 z_1} x {step_2 z_2}."""

    orientation: Orientation
    j: int
    steps: tuple[float, float]
    counts: tuple[int, int]

    @property
    def size(self) -> int:
        return self.counts[0] * self.counts[1]

    def z_range(self, axis: int) -> range:
        n = self.counts[axis]
        return range(-(n // 2), n - n // 2)

    def axis(self, axis: int) -> np.ndarray:
        return np.array(self.z_range(axis), dtype=np.float64) * self.steps[axis]

    def points(self) -> np.ndarray:
        a1, a2 = np.meshgrid(self.axis(0), self.axis(1), indexing="ij")
        return np.column_stack([a1.ravel(), a2.ravel()])

    def contains(self, y) -> bool:
        y = as_finite(y, "y")
        for axis in (0, 1):
            z = y[axis] / self.steps[axis]
            zr = self.z_range(axis)
            if z != round(z) or not (zr.start <= z < zr.stop):
                return False
        return True


def pattern(idx: ShearletIndex) -> PatternGrid:
    fine, coarse = 1 << idx.j, 1 << (idx.j // 2)
    if idx.horizontal:
        return PatternGrid(idx.orientation, idx.j, (1.0 / fine, 1.0 / coarse), (fine, coarse))
    return PatternGrid(idx.orientation, idx.j, (1.0 / coarse, 1.0 / fine), (coarse, fine))


def half_shift(idx: ShearletIndex) -> np.ndarray:
    shift = 2.0 ** (-idx.j - 1)
    return np.array([shift, 0.0]) if idx.horizontal else np.array([0.0, shift])


def shifted_translate(y, idx: ShearletIndex) -> np.ndarray:
    """y~ = y - (2^(-j-1), 0) for horizontal, y - (0, 2^(-j-1)) for vertical."""
    return as_finite(y, "y") - half_shift(idx)


def translate_for_centre(x, idx: ShearletIndex) -> np.ndarray:
    """The translate y whose shearlet is centred at x, i.e. 2 pi y~ = x."""
    return as_finite(x, "x") / (2.0 * np.pi) + half_shift(idx)


def eval_shearlet_spatial(symbol: SparseSymbol, y, x) -> np.ndarray | complex:
    """psi_{j,l,y}(x) = sum_k Psi_{j,l}(k) exp(i k.(x - 2 pi y~)) by direct summation."""
    centre = 2.0 * np.pi * shifted_translate(y, symbol.index)
    x = as_finite(x, "x")
    offsets = (x - centre).reshape(-1, 2)
    out = np.zeros(offsets.shape[0], dtype=np.complex128)
    if symbol.count:
        kt = symbol.k.T.astype(np.float64)
        chunk = max(1, SPATIAL_CHUNK // symbol.count)
        for start in range(0, offsets.shape[0], chunk):
            phase = offsets[start : start + chunk] @ kt
            out[start : start + chunk] = np.exp(1j * phase) @ symbol.values
    out = out.reshape(x.shape[:-1])
    return out[()] if out.ndim == 0 else out


def fold_frequencies(k: np.ndarray, weights: np.ndarray, n: int) -> np.ndarray:
    """Add weights[k] into an n x n buffer at k mod n (exact aliasing for n-periodic phases)."""
    flat = (np.mod(k[:, 0], n) * n + np.mod(k[:, 1], n)).astype(np.intp)
    real = np.bincount(flat, weights=weights.real, minlength=n * n)
    imag = np.bincount(flat, weights=weights.imag, minlength=n * n)
    return (real + 1j * imag).reshape(n, n)


def grid_phase_sign(k: np.ndarray) -> np.ndarray:
    """exp(-i pi (k1 + k2)): moves grid index m = 0 to the translate -1/2."""
    return np.where((k[:, 0] + k[:, 1]) % 2 == 0, 1.0, -1.0)


def reduced_turns(k: np.ndarray, point: np.ndarray) -> np.ndarray:
    """k.point reduced modulo 1 (exact for dyadic points), so 2 pi times it stays in [-pi, pi]."""
    turns = k.astype(np.float64) @ np.asarray(point, dtype=np.float64).T
    return turns - np.round(turns)


def shearlet_on_grid(symbol: SparseSymbol, y, s: int) -> np.ndarray:
    """psi_{j,l,y} on the torus grid x_m = 2 pi (m - 2^(s-1)) / 2^s, indexed [m1, m2]."""
    n = 1 << s
    ytilde = shifted_translate(y, symbol.index)
    weights = symbol.values * np.exp(-2j * np.pi * reduced_turns(symbol.k, ytilde)) * grid_phase_sign(symbol.k)
    return np.fft.ifft2(fold_frequencies(symbol.k, weights, n)) * (n * n)
