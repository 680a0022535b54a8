import logging
import math
from dataclasses import dataclass
from functools import partial
from typing import Any, Callable, Iterable, Sequence

import numpy as np
from PIL import Image

from .primitives import GridLike, InvalidIndexError, InvalidParameterError, ResourceError
from .symbols import EllipseRegion, FourierProvider
from .system import (
    DEFAULT_MEMORY_BUDGET,
    Orientation,
    ShearletIndex,
    SparseSymbol,
    fold_frequencies,
    grid_phase_sign,
    half_shift,
    reduced_turns,
    sample_symbol,
    shifted_translate,
)
from .window1d import WindowFunction1D, as_finite

LOG = logging.getLogger(__name__)

# frequency buffer, transform output and one temporary, all complex128
MAP_BUFFER_BYTES = 3 * 16
BATCH_CHUNK = 1 << 22

Mapper = Callable[[Callable[[Any], Any], Sequence[Any]], Iterable[Any]]


def translates(s: int) -> np.ndarray:
    """y(m) = (m - 2^(s-1)) 2^(-s) for m in {0..2^s - 1}^2, flattened in [m1, m2] order."""
    n = 1 << s
    axis = (np.arange(n) - n // 2) / n
    y1, y2 = np.meshgrid(axis, axis, indexing="ij")
    return np.column_stack([y1.ravel(), y2.ravel()])


@dataclass(frozen=True, eq=False)
class CoefficientMap(GridLike):
    index: ShearletIndex
    provider: str
    grid_exponent: int
    coefficients: np.ndarray

    @property
    def values(self) -> np.ndarray:
        return self.coefficients

    @property
    def s(self) -> int:
        return self.grid_exponent

    def metadata(self) -> dict[str, Any]:
        return {"index": str(self.index), "provider": self.provider}

    def csv_rows(self) -> tuple[str, np.ndarray, str]:
        m1, m2 = self.grid_indices(self.s)
        flat = self.coefficients.ravel()
        rows = np.column_stack([m1, m2, flat.real, flat.imag])
        return "m1,m2,re,im", rows, ["%d", "%d", "%.17g", "%.17g"]


@dataclass(frozen=True, eq=False)
class EdgeMap(GridLike):
    j: int
    grid_exponent: int
    selection: tuple[tuple[Orientation, int], ...]
    provider: str
    magnitudes: np.ndarray

    @property
    def values(self) -> np.ndarray:
        return self.magnitudes

    @property
    def s(self) -> int:
        return self.grid_exponent

    def metadata(self) -> dict[str, Any]:
        return {
            "j": self.j,
            "provider": self.provider,
            "selection": [f"{o}:{l}" for o, l in self.selection],
        }

    def csv_rows(self) -> tuple[str, np.ndarray, str]:
        m1, m2 = self.grid_indices(self.s)
        rows = np.column_stack([m1, m2, self.magnitudes.ravel()])
        return "m1,m2,value", rows, ["%d", "%d", "%.17g"]


def _parseval_weights(symbol: SparseSymbol, provider: FourierProvider) -> np.ndarray:
    return provider.coefficient(symbol.k) * symbol.values


def coeff_direct(symbol: SparseSymbol, provider: FourierProvider, y) -> complex | np.ndarray:
    """<f, psi_{j,l,y}> = sum_k c_k Psi_{j,l}(k) exp(2 pi i k.y~), accumulated with math.fsum.

    y is a single translate (2,) or a stack of translates (m, 2)."""
    y = as_finite(y, "y")
    weights = _parseval_weights(symbol, provider)
    ytilde = np.atleast_2d(shifted_translate(y, symbol.index))
    out = np.empty(ytilde.shape[0], dtype=np.complex128)
    for i, point in enumerate(ytilde):
        terms = weights * np.exp(2j * np.pi * reduced_turns(symbol.k, point))
        out[i] = complex(math.fsum(terms.real), math.fsum(terms.imag))
    return complex(out[0]) if y.ndim == 1 else out


def coeff_batch(symbol: SparseSymbol, provider: FourierProvider, points) -> np.ndarray:
    """The Parseval sum at many translates (m, 2) in one vectorized pass, plain double accumulation."""
    points = np.atleast_2d(as_finite(points, "points"))
    ytilde = shifted_translate(points, symbol.index)
    weights = _parseval_weights(symbol, provider)
    out = np.zeros(ytilde.shape[0], dtype=np.complex128)
    if symbol.count == 0:
        return out
    chunk = max(1, BATCH_CHUNK // symbol.count)
    for start in range(0, ytilde.shape[0], chunk):
        turns = reduced_turns(symbol.k, ytilde[start : start + chunk]).T
        out[start : start + chunk] = np.exp(2j * np.pi * turns) @ weights
    return out


def coeff_map(
    symbol: SparseSymbol, provider: FourierProvider, s: int, memory_budget: int = DEFAULT_MEMORY_BUDGET
) -> CoefficientMap:
    if s < 2:
        raise InvalidParameterError(f"Grid exponent s must be at least 2, got {s}")
    n = 1 << s
    required = n * n * MAP_BUFFER_BYTES
    if required > memory_budget:
        raise ResourceError(f"A 2^{s} x 2^{s} map needs {required} bytes, the memory budget is {memory_budget} bytes")

    # The half-shift phase is not 2^s-periodic in k, so it goes in before folding.
    sigma = half_shift(symbol.index)
    weights = (
        _parseval_weights(symbol, provider)
        * np.exp(-2j * np.pi * reduced_turns(symbol.k, sigma))
        * grid_phase_sign(symbol.k)
    )
    buffer = fold_frequencies(symbol.k, weights, n)
    values = np.fft.ifft2(buffer) * (n * n)
    return CoefficientMap(index=symbol.index, provider=provider.describe(), grid_exponent=s, coefficients=values)


def default_selection(
    j: int, orientations: Sequence[Orientation] = (Orientation.HORIZONTAL, Orientation.VERTICAL)
) -> list[tuple[Orientation, int]]:
    limit = 1 << (j // 2)
    return [(Orientation(o), l) for o in orientations for l in range(-limit + 1, limit)]


def reduction_key(item: tuple[Orientation, int]) -> tuple[int, int]:
    """Edge maps add shears in ascending order, horizontal before vertical."""
    orientation, shear = item
    return (shear, Orientation(orientation).code)


def _magnitude(
    symbol_for: Callable[[ShearletIndex], SparseSymbol],
    provider: FourierProvider,
    s: int,
    memory_budget: int,
    idx: ShearletIndex,
) -> np.ndarray:
    return np.abs(coeff_map(symbol_for(idx), provider, s, memory_budget).values)


def edge_map(
    g: WindowFunction1D,
    j: int,
    s: int,
    provider: FourierProvider,
    selection: Sequence[tuple[Orientation, int]] | None = None,
    mapper: Mapper = map,
    symbol_for: Callable[[ShearletIndex], SparseSymbol] | None = None,
    memory_budget: int = DEFAULT_MEMORY_BUDGET,
) -> EdgeMap:
    """Sum of |coeff_map| over the selected (orientation, shear) pairs at scale j.

    mapper evaluates the per-shear maps in any order and returns them in input order;
    the reduction itself always runs sequentially in reduction_key order."""
    chosen = sorted(set(default_selection(j) if selection is None else selection), key=reduction_key)
    if not chosen:
        raise InvalidIndexError("Edge map selection is empty")
    indices = [ShearletIndex(o, j, l) for o, l in chosen]
    if symbol_for is None:
        symbol_for = partial(sample_symbol, g, memory_budget=memory_budget)

    n = 1 << s
    total = np.zeros((n, n), dtype=np.float64)
    work = partial(_magnitude, symbol_for, provider, s, memory_budget)
    for magnitude in mapper(work, indices):
        total += magnitude
    return EdgeMap(j=j, grid_exponent=s, selection=tuple(chosen), provider=provider.describe(), magnitudes=total)


def indicator_on_grid(e: EllipseRegion, s: int) -> np.ndarray:
    """chi_T at x_m = 2 pi y(m), indexed [m1, m2]."""
    n = 1 << s
    points = 2.0 * np.pi * translates(s)
    return e.contains(points).reshape(n, n)


def render_overlay(grid: GridLike, background: np.ndarray | None = None, shade: float = 0.5) -> Image.Image:
    """RGB picture, saved as binary PPM: gray background (region indicator) with |coefficients| overlaid in red."""
    magnitude = grid.magnitude()
    peak = float(magnitude.max(initial=0.0))
    level = magnitude / peak if peak > 0 else np.zeros_like(magnitude)
    base = np.zeros_like(level) if background is None else shade * np.asarray(background, dtype=np.float64)

    red = base + (1.0 - base) * level
    rest = base * (1.0 - level)
    rgb = np.stack([red, rest, rest], axis=-1)
    # same orientation as GridLike.image: row 0 is the top of the picture
    rgb = np.flipud(np.transpose(rgb, (1, 0, 2)))
    pixels = np.rint(rgb * 255.0).clip(0, 255).astype(np.uint8)
    return Image.fromarray(np.ascontiguousarray(pixels))
