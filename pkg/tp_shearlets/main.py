import hashlib
import logging
import math
import struct
import sys
import traceback
from dataclasses import dataclass, field
from enum import StrEnum
from functools import partial
from operator import itemgetter
from pathlib import Path
from typing import Any, Callable, Sequence, TypeVar

import numpy as np
from multiprocess.pool import Pool

from .coeffs import MAP_BUFFER_BYTES, coeff_map, default_selection, edge_map, indicator_on_grid, render_overlay
from .primitives import Paths, ResourceError, UsageError
from .symbols import EllipseRegion, FourierProvider, FourierTable, LinearCombination, RotatedEllipse
from .system import DEFAULT_MEMORY_BUDGET, Orientation, ShearletIndex, SparseSymbol, sample_symbol
from .verify import DEFAULT_ELLIPSE, SUITES, SuiteOptions, VerificationReport, far_field_profile, far_point, run_suite
from .window1d import WindowFunction1D, make_exp_window

LOG = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


class Command(StrEnum):
    COEFF_MAP = "coeff-map"
    EDGE_MAP = "edge-map"
    VERIFY = "verify"
    DECAY = "decay"
    RENDER = "render"


@dataclass(frozen=True)
class RunConfig:
    command: Command
    paths: Paths
    b: float = 0.025
    j: int = 8
    shears: tuple[int, ...] | None = None
    orientations: tuple[Orientation, ...] = (Orientation.HORIZONTAL, Orientation.VERTICAL)
    s: int = 8
    ellipse: EllipseRegion | None = None
    table: Path | None = None
    threads: int | None = None
    tol: float | None = None
    suite: str | None = None
    j_list: tuple[int, ...] = (6, 8, 10)
    memory_budget_bytes: int = DEFAULT_MEMORY_BUDGET
    window: WindowFunction1D = field(init=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "command", Command(self.command))
        object.__setattr__(self, "orientations", tuple(Orientation(o) for o in self.orientations))
        object.__setattr__(self, "window", make_exp_window(self.b))

        if not self.orientations:
            raise UsageError("At least one orientation is required.")
        if self.s < 2:
            raise UsageError(f"Grid exponent s must be at least 2, got {self.s}")
        if self.threads is not None and self.threads < 1:
            raise UsageError(f"Thread count must be positive, got {self.threads}")
        if self.tol is not None and not (math.isfinite(self.tol) and self.tol > 0):
            raise UsageError(f"Tolerance must be positive, got {self.tol}")
        if self.table is not None and not self.table.is_file():
            raise UsageError(f'Fourier table "{self.table}" does not exist.')
        for j in self.j_list:
            ShearletIndex(Orientation.HORIZONTAL, j, 0)
        # validates j and every requested shear
        self.indices()

        if self.command in (Command.COEFF_MAP, Command.RENDER):
            if len(self.orientations) != 1 or self.shears is None or len(self.shears) != 1:
                raise UsageError(f"{self.command} needs exactly one orientation (--orient h|v) and one shear (--l)")
        if self.command is Command.VERIFY and self.suite not in SUITES:
            raise UsageError(f"Unknown suite {self.suite!r}, expected one of {', '.join(SUITES)}")
        if self.command in (Command.COEFF_MAP, Command.EDGE_MAP, Command.RENDER):
            required = (1 << (2 * self.s)) * MAP_BUFFER_BYTES
            if required > self.memory_budget_bytes:
                raise ResourceError(
                    f"A 2^{self.s} x 2^{self.s} map needs {required} bytes, "
                    f"the memory budget is {self.memory_budget_bytes} bytes"
                )

    def selection(self) -> list[tuple[Orientation, int]]:
        if self.shears is None:
            return default_selection(self.j, self.orientations)
        return [(o, l) for o in self.orientations for l in self.shears]

    def indices(self) -> list[ShearletIndex]:
        return [ShearletIndex(o, self.j, l) for o, l in self.selection()]

    @property
    def region(self) -> EllipseRegion:
        """Geometry for harnesses and render backgrounds."""
        return DEFAULT_ELLIPSE if self.ellipse is None else self.ellipse

    def provider(self) -> FourierProvider:
        parts: list[FourierProvider] = []
        if self.ellipse is not None:
            parts.append(RotatedEllipse(self.ellipse))
        if self.table is not None:
            parts.append(FourierTable.from_csv(self.table))
        if not parts:
            return RotatedEllipse(DEFAULT_ELLIPSE)
        if len(parts) == 1:
            return parts[0]
        return LinearCombination(tuple((1.0, p) for p in parts))


class SymbolCache:
    """Sampled symbols, optionally persisted as binary dumps keyed by a SHA-1 of (b, orientation, j, shear)."""

    def __init__(self, window: WindowFunction1D, directory: Path | None, memory_budget: int) -> None:
        self.window = window
        self.directory = directory
        self.memory_budget = memory_budget

    def key(self, idx: ShearletIndex) -> str:
        b = self.window.family_params.get("b")
        return hashlib.sha1(f"{b!r}|{idx.orientation}|{idx.j}|{idx.shear}".encode()).hexdigest()

    def file(self, idx: ShearletIndex) -> Path | None:
        return None if self.directory is None else self.directory / f"{self.key(idx)}.sym"

    def __call__(self, idx: ShearletIndex) -> SparseSymbol:
        file = self.file(idx)
        if file is not None and file.exists():
            try:
                symbol = SparseSymbol.from_file(file)
                assert symbol.index == idx, f"Cache entry {file} holds {symbol.index}, expected {idx}"
                LOG.debug(f"Cache hit {idx}")
                return symbol
            except (AssertionError, struct.error, ValueError) as e:
                LOG.warning(f"Discarding unreadable cache entry {file}: {e}")

        symbol = sample_symbol(self.window, idx, self.memory_budget)
        if file is not None:
            symbol.save_to_file(file)
        return symbol


def _describe(item: Any) -> str:
    if isinstance(item, ShearletIndex):
        return f"shear {item.orientation}:{item.shear}"
    return str(item)


def process_batch(
    fn: Callable[[T], R], items: list[tuple[int, T]]
) -> tuple[list[tuple[int, R]], list[tuple[Exception, str]]]:
    l = len(items)
    results: list[tuple[int, R]] = []
    exceptions: list[tuple[Exception, str]] = []
    for i, (position, item) in enumerate(items, start=1):
        LOG.info(f"Processing {_describe(item)} ({i}/{l})")
        try:
            results.append((position, fn(item)))
        except AssertionError as e:
            e.add_note(f"[E]: AssertionError while processing {_describe(item)}")
            tb = str(traceback.extract_tb(sys.exc_info()[2]))
            exceptions.append((e, tb))
        except Exception as e:
            e.add_note(f"[E]: Exception while processing {_describe(item)}")
            tb = str(traceback.extract_tb(sys.exc_info()[2]))
            exceptions.append((e, tb))
    return results, exceptions


class BatchMapper:
    """map() over a worker pool: round-robin batches, results returned in input order.

    Failed items are logged with their notes; the first failure is re-raised after all batches finish."""

    def __init__(self, threads: int | None) -> None:
        self.threads = threads

    def __call__(self, fn: Callable[[T], R], items: Sequence[T]) -> list[R]:
        indexed = list(enumerate(items))
        if self.threads is None or self.threads == 1 or len(indexed) <= 1:
            res = [process_batch(fn, indexed)]
        else:
            work: list[list[tuple[int, T]]] = [[] for _ in range(self.threads)]
            for i, item in enumerate(indexed):
                work[i % self.threads].append(item)

            foo = partial(process_batch, fn)
            with Pool(self.threads) as p:
                res = p.map(func=foo, iterable=work)

        results: list[tuple[int, R]] = []
        failures: list[tuple[Exception, str]] = []
        for done, errors in res:
            results.extend(done)
            failures.extend(errors)
        for e, tb in failures:
            LOG.error("\n".join([*getattr(e, "__notes__", []), f"{type(e).__name__}: {e}", tb]))
        if failures:
            raise failures[0][0]
        return [r for _, r in sorted(results, key=itemgetter(0))]


def _cache(config: RunConfig) -> SymbolCache:
    return SymbolCache(config.window, config.paths.cache, config.memory_budget_bytes)


def _export(grid, stem: str, paths: Paths) -> list[Path]:
    written = [paths.file(f"{stem}.pgm"), paths.file(f"{stem}.csv"), paths.file(f"{stem}_sorted.csv")]
    grid.save_pgm(written[0])
    grid.save_csv(written[1])
    grid.save_sorted_csv(written[2])
    return [written[0], written[0].with_suffix(".json"), *written[1:]]


def cmd_coeff_map(config: RunConfig) -> list[Path]:
    (idx,) = config.indices()
    provider = config.provider()
    cmap = coeff_map(_cache(config)(idx), provider, config.s, config.memory_budget_bytes)
    return _export(cmap, f"coeff_{idx.orientation}_{idx.j}_{idx.shear}", config.paths)


def cmd_edge_map(config: RunConfig) -> list[Path]:
    emap = edge_map(
        config.window,
        config.j,
        config.s,
        config.provider(),
        selection=config.selection(),
        mapper=BatchMapper(config.threads),
        symbol_for=_cache(config),
        memory_budget=config.memory_budget_bytes,
    )
    return _export(emap, f"edge_{config.j}", config.paths)


def cmd_verify(config: RunConfig) -> VerificationReport:
    options = SuiteOptions(
        b=config.b,
        j=config.j,
        s=config.s,
        ellipse=config.region,
        j_list=config.j_list,
        tol=config.tol,
        mapper=BatchMapper(config.threads),
    )
    report = run_suite(config.suite, options)
    report.save(config.paths.file(f"verify_{config.suite}.json"))
    return report


def cmd_decay(config: RunConfig) -> list[Path]:
    """Far-field |coefficient| per scale, as a CSV table."""
    x, distance = far_point(config.region)
    LOG.info(f"Far translate at ({x[0]:.4f}, {x[1]:.4f}), {distance:.3f} from the boundary")
    profile = far_field_profile(
        config.region,
        config.window,
        config.j_list,
        config.provider(),
        x,
        mapper=BatchMapper(config.threads),
        symbols=_cache(config),
    )
    file = config.paths.file("decay.csv")
    with open(file, "w") as f:
        f.write("j,orientation,shear,value,log2,noise_floor\n")
        for row in profile:
            log2 = math.log2(row.value) if row.value > 0 else -math.inf
            f.write(f"{row.j},{row.index.orientation},{row.index.shear},{row.value!r},{log2!r},{row.floor!r}\n")
    LOG.info(f"Written {file}")
    return [file]


def cmd_render(config: RunConfig) -> list[Path]:
    (idx,) = config.indices()
    cmap = coeff_map(_cache(config)(idx), config.provider(), config.s, config.memory_budget_bytes)
    background = indicator_on_grid(config.region, config.s) if config.table is None else None
    file = config.paths.file(f"render_{idx.orientation}_{idx.j}_{idx.shear}.ppm")
    render_overlay(cmap, None if background is None else background.astype(np.float64)).save(file, format="PPM")
    LOG.info(f"Written {file}")
    return [file]


COMMANDS: dict[Command, Callable[[RunConfig], Any]] = {
    Command.COEFF_MAP: cmd_coeff_map,
    Command.EDGE_MAP: cmd_edge_map,
    Command.VERIFY: cmd_verify,
    Command.DECAY: cmd_decay,
    Command.RENDER: cmd_render,
}


def main(config: RunConfig) -> int:
    """Run one command; the result is the process exit status."""
    result = COMMANDS[config.command](config)
    if isinstance(result, VerificationReport) and not result.passed:
        for point in result.failures[:10]:
            LOG.error(f"Failed: {point['input']} value={point['value']} bound={point['bound']}")
        return 1
    return 0
