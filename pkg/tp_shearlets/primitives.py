import json
import logging
import os
import struct
from abc import ABC, abstractmethod
from enum import IntEnum
from pathlib import Path
from typing import Any, Self

import numpy as np
from PIL import Image

LOG = logging.getLogger(__name__)


class ShearletError(Exception):
    """Base class of every error raised by this package."""


class InvalidParameterError(ShearletError, ValueError):
    pass


class InvalidIndexError(ShearletError, ValueError):
    pass


class UndefinedAngleError(ShearletError, ValueError):
    pass


class ResourceError(ShearletError, MemoryError):
    """Memory budget exceeded or an output location is unusable."""


class UsageError(ShearletError):
    pass


class Paths:
    def __init__(self, out: Path, cache: Path | None = None) -> None:
        if cache is not None and cache == out:
            raise UsageError("Output and cache directories cannot be the same.")

        self.out: Path = out
        self.cache: Path | None = cache

        Paths.__assert_writable(self.out)
        if self.cache is not None:
            Paths.__assert_writable(self.cache)

    def file(self, name: str) -> Path:
        return self.out / name

    @staticmethod
    def __assert_writable(path: Path) -> None:
        try:
            path.mkdir(exist_ok=True, parents=True)
        except OSError as e:
            raise ResourceError(f'Path "{path}" cannot be created: {e}') from e
        if not os.access(path, os.W_OK):
            raise ResourceError(f'Path "{path}" is not writable. Aborting.')


class Sizes(IntEnum):
    # <BBiI: orientation, j, shear, entry count
    SYMBOL_HEADER_SIZE = 1 + 1 + 4 + 4
    # <iid: k1, k2, value
    SYMBOL_ENTRY_SIZE = 4 + 4 + 8


SYMBOL_HEADER_FORMAT = "<BBiI"
SYMBOL_ENTRY_DTYPE = np.dtype([("k1", "<i4"), ("k2", "<i4"), ("value", "<f8")])
assert struct.calcsize(SYMBOL_HEADER_FORMAT) == Sizes.SYMBOL_HEADER_SIZE
assert SYMBOL_ENTRY_DTYPE.itemsize == Sizes.SYMBOL_ENTRY_SIZE


class Serializable(ABC):
    @abstractmethod
    def __bytes__(self) -> bytes:
        ...

    @classmethod
    @abstractmethod
    def from_bytes(cls, data: bytes) -> Self:
        ...

    @property
    @abstractmethod
    def SIZE(self) -> int:
        ...

    def save_to_file(self, file: Path) -> None:
        data = bytes(self)
        with open(file, "wb") as f:
            f.write(data)
        LOG.debug(f"Written {file} ({len(data)} bytes)")

    @classmethod
    def from_file(cls, file: Path) -> Self:
        with open(file, "rb") as f:
            return cls.from_bytes(memoryview(f.read()).toreadonly())


class GridLike(ABC):
    """A 2^s x 2^s map over the translate grid, indexed [m1, m2]."""

    @property
    @abstractmethod
    def values(self) -> np.ndarray:
        ...

    @property
    @abstractmethod
    def s(self) -> int:
        ...

    @abstractmethod
    def metadata(self) -> dict[str, Any]:
        ...

    @abstractmethod
    def csv_rows(self) -> tuple[str, np.ndarray, str]:
        """Header, row matrix and printf format for the CSV export."""

    def magnitude(self) -> np.ndarray:
        return np.abs(self.values)

    def image(self) -> np.ndarray:
        # Pixel (0, 0) of the grid is the lower-left corner of the picture.
        return np.flipud(self.magnitude().T)

    def pgm_scale(self) -> float:
        peak = float(self.magnitude().max(initial=0.0))
        return 65535.0 / peak if peak > 0 else 0.0

    def pgm_image(self) -> Image.Image:
        """16-bit grayscale picture. Pillow writes mode I as a big-endian P5 with maxval 65535."""
        pixels = np.rint(self.image() * self.pgm_scale()).clip(0, 65535).astype(np.int32)
        return Image.fromarray(np.ascontiguousarray(pixels))

    def sidecar(self) -> dict[str, Any]:
        mag = self.magnitude()
        meta = dict(self.metadata())
        meta.update(
            s=self.s,
            min=float(mag.min(initial=0.0)),
            max=float(mag.max(initial=0.0)),
            scale=self.pgm_scale(),
        )
        return meta

    def sorted_magnitudes(self) -> np.ndarray:
        return np.sort(self.magnitude(), axis=None)[::-1]

    def save_pgm(self, file: Path) -> None:
        self.pgm_image().save(file, format="PPM")
        with open(file.with_suffix(".json"), "w") as f:
            json.dump(self.sidecar(), f, indent=2)
        LOG.info(f"Written {file}")

    def save_csv(self, file: Path) -> None:
        header, rows, fmt = self.csv_rows()
        np.savetxt(file, rows, fmt=fmt, delimiter=",", header=header, comments="")
        LOG.info(f"Written {file}")

    def save_sorted_csv(self, file: Path) -> None:
        ranked = self.sorted_magnitudes()
        rows = np.column_stack([np.arange(1, ranked.size + 1), ranked])
        np.savetxt(file, rows, fmt=["%d", "%.17g"], delimiter=",", header="rank,value", comments="")
        LOG.info(f"Written {file}")

    @staticmethod
    def grid_indices(s: int) -> tuple[np.ndarray, np.ndarray]:
        n = 1 << s
        m1, m2 = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        return m1.ravel(), m2.ravel()
