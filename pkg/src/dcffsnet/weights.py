"""Named-parameter storage and the DCFW container format.

DCFW layout::

    "DCFW" | entry count as u32 LE | entries...
    entry: name length as u32 LE | UTF-8 name | embedded NTF tensor

Round trips are bit-exact. Entry order is preserved and names must be unique.

``random_store`` fills a declared parameter list from a seeded PCG64 stream:
parameters are drawn in declaration order, each value from one 32-bit draw
mapped to a uniform float, so the same seed reproduces the same store on any
machine.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import FormatError, WeightMismatch
from .fileio import NTF_MAGIC, ntf_bytes, ntf_parse
from .tensor import Tensor

DCFW_MAGIC = b"DCFW"
_U32 = struct.Struct("<I")


class WeightStore:
    """Ordered, unique mapping of parameter names to tensors."""

    def __init__(self, entries=()):
        self._entries: dict[str, Tensor] = {}
        for name, tensor in entries:
            self.add(name, tensor)

    def add(self, name: str, tensor: Tensor) -> None:
        if name in self._entries:
            raise WeightMismatch(f"duplicate parameter name {name!r}")
        self._entries[name] = tensor

    def get(self, name: str) -> Tensor:
        try:
            return self._entries[name]
        except KeyError:
            raise WeightMismatch(f"missing parameter {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def names(self) -> list[str]:
        return list(self._entries)

    def items(self):
        return self._entries.items()

    def __eq__(self, other) -> bool:
        if not isinstance(other, WeightStore):
            return NotImplemented
        return (self.names() == other.names()
                and all(a == b for (_, a), (_, b) in zip(self.items(), other.items())))

    __hash__ = None  # type: ignore[assignment]


def store_bytes(store: WeightStore) -> bytes:
    chunks = [DCFW_MAGIC, _U32.pack(len(store))]
    for name, tensor in store.items():
        encoded = name.encode("utf-8")
        chunks.append(_U32.pack(len(encoded)))
        chunks.append(encoded)
        chunks.append(ntf_bytes(tensor))
    return b"".join(chunks)


def store_parse(data: bytes) -> WeightStore:
    if len(data) < 8:
        raise FormatError(f"DCFW data truncated: {len(data)} bytes")
    if data[:4] != DCFW_MAGIC:
        raise FormatError(f"bad DCFW magic {data[:4]!r}")
    (count,) = _U32.unpack_from(data, 4)
    pos = 8
    store = WeightStore()
    for _ in range(count):
        if pos + 4 > len(data):
            raise FormatError("DCFW entry header truncated")
        (name_len,) = _U32.unpack_from(data, pos)
        pos += 4
        if pos + name_len > len(data):
            raise FormatError("DCFW name truncated")
        name = data[pos:pos + name_len].decode("utf-8")
        pos += name_len
        header = data[pos:pos + 20]
        if len(header) < 20 or header[:4] != NTF_MAGIC:
            raise FormatError(f"entry {name!r}: embedded tensor header invalid")
        n, c, h, w = struct.unpack_from("<IIII", header, 4)
        size = 20 + 4 * n * c * h * w
        tensor = ntf_parse(data[pos:pos + size])
        pos += size
        try:
            store.add(name, tensor)
        except WeightMismatch as exc:
            raise FormatError(str(exc)) from None
    if pos != len(data):
        raise FormatError(f"{len(data) - pos} trailing bytes after last DCFW entry")
    return store


def save_weights(store: WeightStore, path) -> None:
    with open(path, "wb") as fh:
        fh.write(store_bytes(store))


def load_weights(path) -> WeightStore:
    with open(path, "rb") as fh:
        return store_parse(fh.read())


def _uniform(rng: np.random.Generator, size: int, low: float, high: float) -> np.ndarray:
    u = rng.integers(0, 1 << 32, size=size, dtype=np.uint64) / float(1 << 32)
    return (low + (high - low) * u).astype(np.float32)


def random_store(entries, seed: int) -> WeightStore:
    """Fill the declared (name, dims) list with reproducible pseudo-random values.

    Conv weights and biases are uniform in +-sqrt(1/fan_in) where fan_in is
    the product of all dims past the first; norm vectors get scale and var in
    [0.5, 1.5] and shift and mean in [-0.5, 0.5], keeping variances positive.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    store = WeightStore()
    for name, dims in entries:
        size = int(np.prod(dims))
        leaf = name.rsplit(".", 1)[-1]
        if leaf in ("scale", "var"):
            values = _uniform(rng, size, 0.5, 1.5)
        elif leaf in ("shift", "mean"):
            values = _uniform(rng, size, -0.5, 0.5)
        else:
            fan_in = max(int(np.prod(dims[1:])), 1)
            bound = float(np.sqrt(1.0 / fan_in))
            values = _uniform(rng, size, -bound, bound)
        store.add(name, Tensor(values.reshape(dims), copy=False))
    return store
