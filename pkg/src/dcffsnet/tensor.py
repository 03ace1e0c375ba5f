"""Dense 4-D float32 tensors with a fixed NCHW row-major layout.

Every feature map in the pipeline is carried by :class:`Tensor`: a batch of
channel planes stored contiguously so that ``index(n, c, h, w) =
((n*C + c)*H + h)*W + w``. Tensors are immutable after construction, compare
bit-exactly, and all operations on them are pure functions, so results are
reproducible byte for byte across runs.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .errors import ShapeMismatch

Shape = tuple[int, int, int, int]


class Tensor:
    """Immutable (n, c, h, w) array of 32-bit floats."""

    __slots__ = ("_a",)

    def __init__(self, array, copy: bool = True):
        a = np.asarray(array)
        if a.ndim != 4:
            raise ShapeMismatch(f"tensor must be 4-D (n, c, h, w), got shape {a.shape}")
        if a.dtype != np.float32 or not a.flags.c_contiguous:
            a = np.ascontiguousarray(a, dtype=np.float32)
        elif copy:
            a = a.copy()
        a.setflags(write=False)
        object.__setattr__(self, "_a", a)

    # -- construction helpers -------------------------------------------------

    @classmethod
    def zeros(cls, dims: Shape) -> "Tensor":
        return cls(np.zeros(dims, dtype=np.float32), copy=False)

    @classmethod
    def full(cls, dims: Shape, value: float) -> "Tensor":
        return cls(np.full(dims, value, dtype=np.float32), copy=False)

    @classmethod
    def from_flat(cls, dims: Shape, values: Iterable[float]) -> "Tensor":
        a = np.asarray(list(values) if not isinstance(values, np.ndarray) else values,
                       dtype=np.float32)
        expect = int(np.prod(dims)) if len(dims) == 4 else -1
        if a.size != expect:
            raise ShapeMismatch(f"{a.size} values cannot fill dims {dims}")
        return cls(a.reshape(dims), copy=False)

    # -- views ----------------------------------------------------------------

    @property
    def array(self) -> np.ndarray:
        """Read-only numpy view in the canonical layout."""
        return self._a

    @property
    def dims(self) -> Shape:
        return tuple(int(d) for d in self._a.shape)  # type: ignore[return-value]

    @property
    def n(self) -> int:
        return self._a.shape[0]

    @property
    def c(self) -> int:
        return self._a.shape[1]

    @property
    def h(self) -> int:
        return self._a.shape[2]

    @property
    def w(self) -> int:
        return self._a.shape[3]

    @property
    def size(self) -> int:
        return self._a.size

    def tobytes(self) -> bytes:
        return self._a.tobytes()

    # -- identity -------------------------------------------------------------

    def __eq__(self, other) -> bool:
        if not isinstance(other, Tensor):
            return NotImplemented
        if self.dims != other.dims:
            return False
        # bit-level comparison; NaN payloads included
        return bool(np.array_equal(self._a.view(np.uint32), other._a.view(np.uint32)))

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"Tensor(dims={self.dims})"


def _broadcastable(a: Shape, b: Shape) -> bool:
    return all(bd == ad or bd == 1 for ad, bd in zip(a, b))


def elementwise_binary(a: Tensor, b: Tensor, op: str) -> Tensor:
    """Elementwise ``add`` or ``mul``.

    ``b`` must either match ``a`` exactly or have size 1 along the axes it
    broadcasts over (batch, channel and/or spatial); the result always has
    ``a``'s dims.
    """
    if op not in ("add", "mul"):
        raise ValueError(f"unknown elementwise op {op!r}")
    if a.dims != b.dims and not _broadcastable(a.dims, b.dims):
        raise ShapeMismatch(f"cannot {op} tensors of dims {a.dims} and {b.dims}")
    fn = np.add if op == "add" else np.multiply
    return Tensor(fn(a.array, b.array), copy=False)


def add(a: Tensor, b: Tensor) -> Tensor:
    return elementwise_binary(a, b, "add")


def mul(a: Tensor, b: Tensor) -> Tensor:
    return elementwise_binary(a, b, "mul")


def concat_channels(parts: Sequence[Tensor]) -> Tensor:
    """Concatenate along the channel axis; parts keep their input order."""
    if not parts:
        raise ShapeMismatch("concat_channels needs at least one part")
    first = parts[0].dims
    for p in parts[1:]:
        d = p.dims
        if (d[0], d[2], d[3]) != (first[0], first[2], first[3]):
            raise ShapeMismatch(
                f"concat_channels parts disagree outside the channel axis: "
                f"{first} vs {d}")
    if len(parts) == 1:
        return parts[0]
    return Tensor(np.concatenate([p.array for p in parts], axis=1), copy=False)


def split_channels(x: Tensor, groups: int) -> list[Tensor]:
    """Split into ``groups`` contiguous channel blocks of equal width."""
    if groups < 1 or x.c % groups != 0:
        raise ShapeMismatch(f"{x.c} channels are not divisible into {groups} groups")
    step = x.c // groups
    return [Tensor(x.array[:, g * step:(g + 1) * step], copy=True)
            for g in range(groups)]
