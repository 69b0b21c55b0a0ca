"""Grid and mask primitives shared by the whole pipeline.

Coordinate convention, fixed repo-wide: origin at the top-left corner,
x = column (rightward), y = row (downward); offset vectors are (dx, dy)
in the same frame. Flat pixel indices are row-major: p = y * width + x.

All types are immutable after construction (backing arrays are marked
read-only) and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BACKGROUND = 0
PIGLET = 1
SOW = 2

CLASS_PIGLET = "piglet"
CLASS_SOW = "sow"


class DimensionMismatch(ValueError):
    """Two grids that must share dimensions do not."""


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class GridDims:
    """Pixel grid size: width = columns, height = rows."""

    width: int
    height: int

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise ValueError(f"grid must be at least 1x1, got {self.width}x{self.height}")

    @property
    def npixels(self) -> int:
        return self.width * self.height

    @property
    def shape(self) -> tuple[int, int]:
        """Numpy array shape (rows, cols)."""
        return (self.height, self.width)

    def flat_index(self, x: int, y: int) -> int:
        if not (0 <= x < self.width and 0 <= y < self.height):
            raise ValueError(f"pixel ({x}, {y}) out of bounds for {self.width}x{self.height}")
        return y * self.width + x

    def coords(self, p: int) -> tuple[int, int]:
        if not (0 <= p < self.npixels):
            raise ValueError(f"flat index {p} out of bounds for {self.width}x{self.height}")
        return (p % self.width, p // self.width)


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """A set of pixels on a grid, stored as a boolean (rows, cols) array."""

    dims: GridDims
    pixels: np.ndarray

    def __post_init__(self) -> None:
        px = np.asarray(self.pixels, dtype=bool)
        if px.shape != self.dims.shape:
            raise ValueError(f"mask shape {px.shape} does not match dims {self.dims.shape}")
        object.__setattr__(self, "pixels", _frozen(px))

    @classmethod
    def empty(cls, dims: GridDims) -> "BinaryMask":
        return cls(dims, np.zeros(dims.shape, dtype=bool))

    @classmethod
    def full(cls, dims: GridDims) -> "BinaryMask":
        return cls(dims, np.ones(dims.shape, dtype=bool))

    @classmethod
    def from_flat_indices(cls, dims: GridDims, indices) -> "BinaryMask":
        idx = np.asarray(indices, dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= dims.npixels):
            raise ValueError("flat index out of bounds")
        flat = np.zeros(dims.npixels, dtype=bool)
        flat[idx] = True
        return cls(dims, flat.reshape(dims.shape))

    @property
    def area(self) -> int:
        return int(self.pixels.sum())

    def flat_indices(self) -> np.ndarray:
        """Set pixels as ascending row-major flat indices."""
        return np.flatnonzero(self.pixels.ravel())

    def __eq__(self, other) -> bool:
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return self.dims == other.dims and np.array_equal(self.pixels, other.pixels)

    def __hash__(self):
        return hash((self.dims, self.pixels.tobytes()))


@dataclass(frozen=True, eq=False)
class SemanticMap:
    """Per-pixel class grid: 0 = background, 1 = piglet, 2 = sow.

    ``probs`` optionally carries the per-pixel class probability vectors;
    when present each pixel's probabilities must sum to 1 (within 1e-6)
    and the argmax must agree with ``labels``.
    """

    dims: GridDims
    labels: np.ndarray
    probs: np.ndarray | None = None

    def __post_init__(self) -> None:
        lab = np.asarray(self.labels, dtype=np.uint8)
        if lab.shape != self.dims.shape:
            raise ValueError(f"labels shape {lab.shape} does not match dims {self.dims.shape}")
        if lab.size and lab.max() > SOW:
            raise ValueError("labels must be in {0, 1, 2}")
        object.__setattr__(self, "labels", _frozen(lab))
        if self.probs is not None:
            pr = np.asarray(self.probs, dtype=np.float64)
            if pr.ndim != 3 or pr.shape[:2] != self.dims.shape:
                raise ValueError("probs must be (rows, cols, nclasses)")
            if not np.allclose(pr.sum(axis=-1), 1.0, atol=1e-6):
                raise ValueError("probs must sum to 1 per pixel")
            if not np.array_equal(np.argmax(pr, axis=-1).astype(np.uint8), lab):
                raise ValueError("probs argmax must match labels")
            object.__setattr__(self, "probs", _frozen(pr))

    def class_mask(self, label: int) -> BinaryMask:
        return BinaryMask(self.dims, self.labels == label)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SemanticMap):
            return NotImplemented
        if self.dims != other.dims or not np.array_equal(self.labels, other.labels):
            return False
        if (self.probs is None) != (other.probs is None):
            return False
        return self.probs is None or np.array_equal(self.probs, other.probs)


@dataclass(frozen=True, eq=False)
class OffsetMap:
    """Per-pixel (dx, dy) displacement grid pointing toward object centers.

    Stored as float32, the on-disk precision, so a map written to a file
    re-parses to an equal value.
    """

    dims: GridDims
    vectors: np.ndarray

    def __post_init__(self) -> None:
        vec = np.asarray(self.vectors, dtype=np.float32)
        if vec.shape != (*self.dims.shape, 2):
            raise ValueError(f"vectors shape {vec.shape} does not match dims {self.dims.shape} + (2,)")
        if not np.all(np.isfinite(vec)):
            raise ValueError("offset components must be finite")
        object.__setattr__(self, "vectors", _frozen(vec))

    def __eq__(self, other) -> bool:
        if not isinstance(other, OffsetMap):
            return NotImplemented
        return self.dims == other.dims and np.array_equal(self.vectors, other.vectors)


def rle_encode(mask: BinaryMask) -> list[int]:
    """Run-length counts of a mask in row-major order.

    Counts alternate unset/set runs and always start with the unset run
    (zero if the first pixel is set); they sum to width * height. Runs
    spanning a row boundary are merged, so the encoding is canonical:
    only the leading count may be zero.
    """
    flat = mask.pixels.ravel()
    n = flat.size
    boundaries = np.flatnonzero(np.diff(flat)) + 1
    starts = np.concatenate(([0], boundaries, [n]))
    counts = np.diff(starts).tolist()
    if flat[0]:
        counts.insert(0, 0)
    return [int(c) for c in counts]


def rle_decode(counts, dims: GridDims) -> BinaryMask:
    """Inverse of :func:`rle_encode`.

    Accepts zero-length runs anywhere (the alternation simply continues),
    so any counts list that sums to width * height decodes.
    """
    counts = [int(c) for c in counts]
    if any(c < 0 for c in counts):
        raise ValueError("run lengths must be non-negative")
    total = sum(counts)
    if total != dims.npixels:
        raise ValueError(
            f"run lengths sum to {total}, expected {dims.npixels} for {dims.width}x{dims.height}"
        )
    values = np.arange(len(counts)) % 2 == 1
    flat = np.repeat(values, counts)
    return BinaryMask(dims, flat.reshape(dims.shape))
