"""8-neighborhood connectivity masks and their topology operations.

A binary mask is lifted to an 8-channel map where channel ``i`` says whether a
pixel and its neighbor in direction ``i`` are jointly foreground. Directions
scan the 3x3 neighborhood row by row (center excluded), which makes channel
``9 - i`` the geometric opposite of channel ``i``:

    1 2 3
    4 . 5
    6 7 8

Bilateral voting multiplies each channel value with its opposite channel at
the neighboring pixel, enforcing pairwise consistency; max-aggregation then
collapses the 8 channels back to a single-channel probability map.
"""

from __future__ import annotations

import enum
from typing import NamedTuple

import numpy as np

from .errors import ShapeMismatch
from .tensor import Tensor


class Direction(NamedTuple):
    index: int
    dy: int
    dx: int

    @property
    def offset(self) -> tuple[int, int]:
        return (self.dy, self.dx)


DIRECTIONS: tuple[Direction, ...] = (
    Direction(1, -1, -1),
    Direction(2, -1, 0),
    Direction(3, -1, 1),
    Direction(4, 0, -1),
    Direction(5, 0, 1),
    Direction(6, 1, -1),
    Direction(7, 1, 0),
    Direction(8, 1, 1),
)


def opposite(d: Direction) -> Direction:
    return DIRECTIONS[8 - d.index]


class BoundaryConvention(enum.Enum):
    """How neighbors that fall outside the image are encoded."""
    CLASSIC_ZERO = "classic_zero"    # out-of-bounds neighbor counts as background
    SAME_AS_SELF = "same_as_self"    # out-of-bounds neighbor copies the pixel itself


def require_binary_mask(y) -> np.ndarray:
    a = np.asarray(y)
    if a.ndim != 2:
        raise ShapeMismatch(f"binary mask must be 2-D, got shape {a.shape}")
    if not np.isin(a, (0, 1)).all():
        raise ValueError("mask values must be 0 or 1")
    return a.astype(np.uint8, copy=False)


def require_connectivity(x: Tensor) -> Tensor:
    if x.c != 8:
        raise ShapeMismatch(f"connectivity mask needs 8 channels, got {x.c}")
    a = x.array
    if a.size and (a.min() < 0.0 or a.max() > 1.0):
        raise ValueError("connectivity values must lie in [0, 1]")
    return x


def _shift_plane(a: np.ndarray, dy: int, dx: int, mode: str, fill: float) -> np.ndarray:
    """out(p) = a(p + (dy, dx)); out-of-bounds sources take ``fill`` or the edge."""
    h, w = a.shape[-2], a.shape[-1]
    spec = [(0, 0)] * (a.ndim - 2) + [(1, 1), (1, 1)]
    if mode == "replicate":
        padded = np.pad(a, spec, mode="edge")
    else:
        padded = np.pad(a, spec, mode="constant", constant_values=fill)
    return padded[..., 1 + dy:1 + dy + h, 1 + dx:1 + dx + w]


def shift(x: Tensor, d: Direction, fill: str = "zero") -> Tensor:
    """Translate the spatial planes so each pixel reads its ``d``-neighbor."""
    if fill not in ("zero", "replicate"):
        raise ValueError(f"fill must be 'zero' or 'replicate', got {fill!r}")
    out = _shift_plane(x.array, d.dy, d.dx, fill, 0.0)
    return Tensor(out, copy=True)


def encode_connectivity(y, convention: BoundaryConvention) -> Tensor:
    """Lift a binary (h, w) mask to its (1, 8, h, w) connectivity mask."""
    m = require_binary_mask(y).astype(np.float32)
    inside = np.ones_like(m)
    channels = []
    for d in DIRECTIONS:
        nb = _shift_plane(m, d.dy, d.dx, "constant", 0.0)
        if convention is BoundaryConvention.SAME_AS_SELF:
            inb = _shift_plane(inside, d.dy, d.dx, "constant", 0.0)
            nb = inb * nb + (1.0 - inb) * m
        channels.append(m * nb)
    return Tensor(np.stack(channels)[np.newaxis], copy=False)


def bilateral_vote(xc: Tensor) -> Tensor:
    """Multiply each channel with its opposite channel at the neighbor pixel.

    Where the neighbor falls outside the image the partner is the neutral
    value 1, so border channels pass through unchanged.
    """
    require_connectivity(xc)
    a = xc.array
    out = np.empty_like(a)
    for d in DIRECTIONS:
        partner = _shift_plane(a[:, opposite(d).index - 1], d.dy, d.dx,
                               "constant", 1.0)
        out[:, d.index - 1] = a[:, d.index - 1] * partner
    return Tensor(out, copy=False)


def rca_aggregate(xb: Tensor) -> Tensor:
    """Region-guided channel aggregation: per-pixel max over the 8 channels."""
    require_connectivity(xb)
    return Tensor(xb.array.max(axis=1, keepdims=True), copy=False)


def decode_mask(xc: Tensor, threshold: float = 0.5) -> np.ndarray:
    """Vote, aggregate and binarize a connectivity mask back to a 2-D mask."""
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    require_connectivity(xc)
    if xc.n != 1:
        raise ShapeMismatch(f"decode_mask expects a single-image batch, got n={xc.n}")
    prob = rca_aggregate(bilateral_vote(xc))
    return (prob.array[0, 0] >= threshold).astype(np.uint8)
