"""Inference-mode neural primitives over :class:`~dcffsnet.tensor.Tensor`.

Convolution is plain cross-correlation with zero padding (no kernel flip, no
dilation, no channel groups; grouped behaviour is built from split/concat one
level up). Batch norm runs with frozen statistics. Everything is float32 with
a fixed accumulation order, so outputs are bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatch
from .tensor import Tensor


@dataclass(frozen=True)
class ConvParams:
    """Weights for one 2-D convolution.

    weight dims are (c_out, c_in, k, k) with odd square k; bias, when present,
    is one value per output channel.
    """
    weight: Tensor
    bias: np.ndarray | None = None
    stride: int = 1
    padding: int = 0

    def __post_init__(self):
        co, ci, kh, kw = self.weight.dims
        if kh != kw or kh % 2 == 0:
            raise ShapeMismatch(f"kernel must be odd and square, got {kh}x{kw}")
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")
        if self.padding < 0:
            raise ValueError(f"padding must be >= 0, got {self.padding}")
        if self.bias is not None:
            b = np.ascontiguousarray(self.bias, dtype=np.float32).reshape(-1)
            if b.size != co:
                raise ShapeMismatch(f"bias length {b.size} != {co} output channels")
            b.setflags(write=False)
            object.__setattr__(self, "bias", b)

    @property
    def c_out(self) -> int:
        return self.weight.dims[0]

    @property
    def c_in(self) -> int:
        return self.weight.dims[1]

    @property
    def kernel(self) -> int:
        return self.weight.dims[2]


@dataclass(frozen=True)
class BatchNormParams:
    """Frozen per-channel normalization statistics."""
    scale: np.ndarray
    shift: np.ndarray
    mean: np.ndarray
    var: np.ndarray
    epsilon: float = 1e-5

    def __post_init__(self):
        for name in ("scale", "shift", "mean", "var"):
            v = np.ascontiguousarray(getattr(self, name), dtype=np.float32).reshape(-1)
            v.setflags(write=False)
            object.__setattr__(self, name, v)
        c = self.scale.size
        if not (self.shift.size == self.mean.size == self.var.size == c):
            raise ShapeMismatch("batch-norm vectors have unequal lengths")
        if np.any(self.var < 0):
            raise ValueError("running variance must be non-negative")

    @property
    def channels(self) -> int:
        return self.scale.size

    @classmethod
    def identity(cls, channels: int, epsilon: float = 0.0) -> "BatchNormParams":
        ones = np.ones(channels, dtype=np.float32)
        zeros = np.zeros(channels, dtype=np.float32)
        return cls(scale=ones, shift=zeros, mean=zeros, var=ones, epsilon=epsilon)


def conv_output_hw(h: int, w: int, k: int, stride: int, padding: int) -> tuple[int, int]:
    ho = (h + 2 * padding - k) // stride + 1
    wo = (w + 2 * padding - k) // stride + 1
    return ho, wo


# column matrices above this size fall back to tap-wise accumulation
_IM2COL_BYTE_CAP = 1 << 29


def conv2d(x: Tensor, p: ConvParams) -> Tensor:
    """Cross-correlate ``x`` with ``p.weight`` under zero padding.

    Windows are gathered into a column matrix and contracted in one matmul;
    when that matrix would be unreasonably large the taps are accumulated one
    (dy, dx) offset at a time instead. Both paths order their sums the same
    way for a given shape, so outputs stay bit-reproducible.
    """
    if x.c != p.c_in:
        raise ShapeMismatch(f"input has {x.c} channels, kernel expects {p.c_in}")
    n, ci, h, w = x.dims
    k, s, pad = p.kernel, p.stride, p.padding
    if h + 2 * pad < k or w + 2 * pad < k:
        raise ShapeMismatch(
            f"kernel {k}x{k} larger than padded input {h + 2 * pad}x{w + 2 * pad}")
    ho, wo = conv_output_hw(h, w, k, s, pad)
    xa = x.array
    if pad:
        xa = np.pad(xa, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    wgt = p.weight.array

    def window(dy, dx):
        return xa[:, :, dy:dy + (ho - 1) * s + 1:s, dx:dx + (wo - 1) * s + 1:s]

    if k == 1:
        out = np.matmul(wgt.reshape(p.c_out, ci),
                        window(0, 0).reshape(n, ci, ho * wo))
    elif n * ci * k * k * ho * wo * 4 <= _IM2COL_BYTE_CAP:
        cols = np.empty((n, ci, k, k, ho * wo), dtype=np.float32)
        for dy in range(k):
            for dx in range(k):
                cols[:, :, dy, dx, :] = window(dy, dx).reshape(n, ci, ho * wo)
        out = np.matmul(wgt.reshape(p.c_out, ci * k * k),
                        cols.reshape(n, ci * k * k, ho * wo))
    else:
        out = np.zeros((n, p.c_out, ho * wo), dtype=np.float32)
        for dy in range(k):
            for dx in range(k):
                out += np.matmul(wgt[:, :, dy, dx],
                                 window(dy, dx).reshape(n, ci, ho * wo))
    out = out.reshape(n, p.c_out, ho, wo)
    if p.bias is not None:
        out += p.bias.reshape(1, p.c_out, 1, 1)
    return Tensor(out, copy=False)


def batch_norm_infer(x: Tensor, p: BatchNormParams) -> Tensor:
    if x.c != p.channels:
        raise ShapeMismatch(f"input has {x.c} channels, norm expects {p.channels}")
    denom = np.sqrt(p.var + np.float32(p.epsilon))
    out = (x.array - p.mean.reshape(1, -1, 1, 1)) / denom.reshape(1, -1, 1, 1)
    out = out * p.scale.reshape(1, -1, 1, 1) + p.shift.reshape(1, -1, 1, 1)
    return Tensor(out, copy=False)


def relu(x: Tensor) -> Tensor:
    return Tensor(np.maximum(x.array, np.float32(0)), copy=False)


def sigmoid(x: Tensor) -> Tensor:
    return Tensor(sigmoid_array(x.array), copy=False)


def sigmoid_array(a: np.ndarray) -> np.ndarray:
    # two-branch form: never exponentiates a positive argument
    out = np.empty_like(a)
    pos = a >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
    ez = np.exp(a[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def activate(x: Tensor, kind: str) -> Tensor:
    if kind == "relu":
        return relu(x)
    if kind == "sigmoid":
        return sigmoid(x)
    raise ValueError(f"unknown activation {kind!r}")


def global_avg_pool(x: Tensor) -> Tensor:
    if x.h * x.w < 1:
        raise ShapeMismatch(f"cannot pool empty spatial extent {x.h}x{x.w}")
    return Tensor(np.mean(x.array, axis=(2, 3), keepdims=True, dtype=np.float32),
                  copy=False)


def directional_avg_pool(x: Tensor, axis: str) -> Tensor:
    """Collapse one spatial axis to its mean: ``height`` keeps per-column
    means as (n, c, 1, w), ``width`` keeps per-row means as (n, c, h, 1)."""
    if axis == "height":
        return Tensor(np.mean(x.array, axis=2, keepdims=True, dtype=np.float32),
                      copy=False)
    if axis == "width":
        return Tensor(np.mean(x.array, axis=3, keepdims=True, dtype=np.float32),
                      copy=False)
    raise ValueError(f"axis must be 'height' or 'width', got {axis!r}")


def _linear_taps(size: int, factor: int):
    # half-pixel source coordinates, clamped at the borders
    t = np.arange(size * factor, dtype=np.float64)
    src = np.clip((t + 0.5) / factor - 0.5, 0.0, size - 1)
    i0 = np.floor(src).astype(np.int64)
    i1 = np.minimum(i0 + 1, size - 1)
    frac = (src - i0).astype(np.float32)
    return i0, i1, frac


def upsample(x: Tensor, factor: int, mode: str) -> Tensor:
    """Scale both spatial axes by an integer factor.

    ``nearest`` replicates source pixels; ``bilinear`` interpolates with
    half-pixel centers (clamped at the borders) and is written as
    ``x0 + frac*(x1 - x0)`` so constant inputs are preserved bit-exactly.
    """
    if factor < 1:
        raise ValueError(f"upsample factor must be >= 1, got {factor}")
    if factor == 1:
        return x
    a = x.array
    if mode == "nearest":
        return Tensor(np.repeat(np.repeat(a, factor, axis=2), factor, axis=3),
                      copy=False)
    if mode != "bilinear":
        raise ValueError(f"unknown upsample mode {mode!r}")
    i0, i1, fr = _linear_taps(x.h, factor)
    rows0, rows1 = a[:, :, i0, :], a[:, :, i1, :]
    a = rows0 + fr.reshape(1, 1, -1, 1) * (rows1 - rows0)
    j0, j1, fc = _linear_taps(x.w, factor)
    cols0, cols1 = a[:, :, :, j0], a[:, :, :, j1]
    a = cols0 + fc.reshape(1, 1, 1, -1) * (cols1 - cols0)
    return Tensor(a, copy=False)


def softmax_channels(x: Tensor) -> Tensor:
    """Per-site softmax across the channel axis (max-subtracted for stability)."""
    if x.c < 1:
        raise ShapeMismatch("softmax needs at least one channel")
    a = x.array
    e = np.exp(a - a.max(axis=1, keepdims=True))
    return Tensor(e / e.sum(axis=1, keepdims=True, dtype=np.float32), copy=False)


def max_pool_2x2(x: Tensor) -> Tensor:
    n, c, h, w = x.dims
    if h % 2 or w % 2:
        raise ShapeMismatch(f"max_pool_2x2 needs even spatial dims, got {h}x{w}")
    a = x.array.reshape(n, c, h // 2, 2, w // 2, 2)
    return Tensor(a.max(axis=(3, 5)), copy=False)
