"""Forward passes of the DCFFSNet building blocks.

Four blocks, all pure functions over immutable tensors:

* ``dscrim_forward``: bottleneck connectivity injection. A deeply supervised
  full-resolution head plus per-direction grouped attention over the shifted
  bottleneck groups.
* ``msffm_forward``: skip-connection fusion. A feature stream and a
  connectivity stream cross-calibrate each other through mutual spatial
  attention, group by group.
* ``msrcm_forward``: decoder refinement. Parallel 1/3/5/7 kernel branches,
  summed, residual-added and re-encoded with a 1x1 conv.
* ``pconv_forward``: prediction head. Channel groups are shifted along their
  direction and run through one shared 3x3 kernel before re-aggregation.

Channel widths entering any grouped operation must be divisible by
``GROUP_COUNT`` (8, one group per connectivity direction).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ops
from .connectivity import DIRECTIONS, shift
from .errors import ShapeMismatch, WeightMismatch
from .ops import BatchNormParams, ConvParams
from .tensor import Tensor, concat_channels, split_channels

GROUP_COUNT = 8

MSRCM_KERNELS = (1, 3, 5, 7)


class BlockParams:
    """Named conv / batch-norm parameters for one block, keyed by dotted path."""

    def __init__(self, entries: dict[str, ConvParams | BatchNormParams]):
        self._entries = dict(entries)

    def conv(self, key: str) -> ConvParams:
        p = self._entries.get(key)
        if not isinstance(p, ConvParams):
            raise WeightMismatch(f"block parameter {key!r} missing or not a conv")
        return p

    def norm(self, key: str) -> BatchNormParams:
        p = self._entries.get(key)
        if not isinstance(p, BatchNormParams):
            raise WeightMismatch(f"block parameter {key!r} missing or not a norm")
        return p

    def sub(self, prefix: str) -> "BlockParams":
        """A view of all entries under ``prefix.``, with the prefix stripped."""
        cut = len(prefix) + 1
        return BlockParams({k[cut:]: v for k, v in self._entries.items()
                            if k.startswith(prefix + ".")})

    def keys(self):
        return self._entries.keys()


def _require_grouped(x: Tensor, who: str) -> int:
    if x.c % GROUP_COUNT != 0:
        raise ShapeMismatch(
            f"{who} needs channels divisible by {GROUP_COUNT}, got {x.c}")
    return x.c // GROUP_COUNT


def channel_attention(x: Tensor, p: BlockParams) -> Tensor:
    """Gate each channel by a squeeze-excite weight in (0, 1)."""
    w = ops.global_avg_pool(x)
    w = ops.relu(ops.conv2d(w, p.conv("squeeze")))
    w = ops.sigmoid(ops.conv2d(w, p.conv("excite")))
    return Tensor(x.array * w.array, copy=False)


def spatial_attention(x: Tensor, p: BlockParams) -> Tensor:
    """Gate each location by one map built from channel mean and max."""
    a = x.array
    stats = np.concatenate([a.mean(axis=1, keepdims=True, dtype=np.float32),
                            a.max(axis=1, keepdims=True)], axis=1)
    m = ops.sigmoid(ops.conv2d(Tensor(stats, copy=False), p.conv("conv")))
    return Tensor(a * m.array, copy=False)


@dataclass(frozen=True)
class DscrimOutput:
    c5: Tensor      # refined bottleneck features, same dims as the input
    p_out: Tensor   # 8-channel full-resolution supervision head (pre-sigmoid)


def dscrim_forward(f5: Tensor, p: BlockParams, full_res: tuple[int, int],
                   shift_fill: str = "zero", upsample_mode: str = "bilinear",
                   injection_gate: str = "fused") -> DscrimOutput:
    """Bottleneck connectivity injection.

    The supervision head reduces the bottleneck to 8 channels, upsamples by 32
    to full resolution and re-projects. Its pooled response, pushed back
    through a sigmoid gate, modulates 8 direction-shifted channel groups of
    the bottleneck; each group is refined with spatial plus channel attention
    and re-fused. ``injection_gate`` selects what the per-group gate
    multiplies: the attention sum (``fused``) or the channel branch alone
    (``channel_only``).
    """
    _require_grouped(f5, "dscrim_forward")
    if full_res != (f5.h * 32, f5.w * 32):
        raise ShapeMismatch(
            f"full resolution {full_res} is not 32x the bottleneck "
            f"{(f5.h, f5.w)}")
    if injection_gate not in ("fused", "channel_only"):
        raise ValueError(f"unknown injection_gate {injection_gate!r}")

    head = ops.conv2d(f5, p.conv("head.reduce"))
    head = ops.upsample(head, 32, upsample_mode)
    p_out = ops.conv2d(head, p.conv("head.project"))

    gate = ops.sigmoid(ops.conv2d(ops.global_avg_pool(p_out), p.conv("gate")))
    gate_groups = split_channels(gate, GROUP_COUNT)
    feat_groups = split_channels(f5, GROUP_COUNT)

    refined = []
    for i, d in enumerate(DIRECTIONS):
        g = p.sub(f"group{d.index}")
        x_i = shift(feat_groups[i], d, shift_fill)
        sam = spatial_attention(x_i, g.sub("sam"))
        cam = channel_attention(x_i, g.sub("cam"))
        p_i = gate_groups[i].array
        if injection_gate == "fused":
            mixed = (sam.array + cam.array) * p_i
        else:
            mixed = sam.array + cam.array * p_i
        fused = ops.conv2d(Tensor(mixed, copy=False), g.conv("fuse"))
        refined.append(Tensor(x_i.array + fused.array, copy=False))

    c5 = ops.conv2d(concat_channels(refined), p.conv("merge"))
    return DscrimOutput(c5=c5, p_out=p_out)


def _axis_gates(f_i: Tensor, strip_conv: ConvParams) -> tuple[np.ndarray, np.ndarray]:
    """Coordinate gates for one group: pool each axis, convolve the joined
    strip, split it back and squash each part."""
    h, w = f_i.h, f_i.w
    row_means = ops.directional_avg_pool(f_i, "width").array    # (n, cg, h, 1)
    col_means = ops.directional_avg_pool(f_i, "height").array   # (n, cg, 1, w)
    strip = np.concatenate([row_means.transpose(0, 1, 3, 2), col_means], axis=3)
    enc = ops.conv2d(Tensor(strip, copy=False), strip_conv).array
    gate_h = ops.sigmoid_array(enc[:, :, :, :h]).transpose(0, 1, 3, 2)
    gate_w = ops.sigmoid_array(enc[:, :, :, h:])
    return gate_h, gate_w


def msffm_forward(f: Tensor, c: Tensor, p: BlockParams) -> tuple[Tensor, Tensor]:
    """Cross-calibrate a feature stream and a connectivity stream.

    Per group: the feature side is gated along both spatial axes and
    normalized; the connectivity side is convolved and normalized. Each side
    then produces a channel descriptor (softmax of its pooled response) that
    weights the *other* side into a single spatial map; the sigmoid of the two
    maps' sum rescales both group inputs. Returns ``(c_next, f_next)``.
    """
    if f.dims != c.dims:
        raise ShapeMismatch(f"streams disagree: {f.dims} vs {c.dims}")
    _require_grouped(f, "msffm_forward")

    f_groups = split_channels(f, GROUP_COUNT)
    c_groups = split_channels(c, GROUP_COUNT)
    c_out, f_out = [], []
    for i in range(GROUP_COUNT):
        g = p.sub(f"group{i + 1}")
        f_i, c_i = f_groups[i], c_groups[i]

        gate_h, gate_w = _axis_gates(f_i, g.conv("gate_conv"))
        x_f = ops.batch_norm_infer(Tensor(f_i.array * gate_h * gate_w, copy=False),
                                   g.norm("feature_bn"))
        x_c = ops.batch_norm_infer(ops.conv2d(c_i, g.conv("conn_conv")),
                                   g.norm("conn_bn"))

        w_f = ops.softmax_channels(ops.global_avg_pool(x_f)).array
        w_c = ops.softmax_channels(ops.global_avg_pool(x_c)).array
        w_fc = np.sum(w_f * x_c.array, axis=1, keepdims=True, dtype=np.float32)
        w_cf = np.sum(w_c * x_f.array, axis=1, keepdims=True, dtype=np.float32)
        gate = ops.sigmoid_array(w_cf + w_fc)

        c_out.append(Tensor(c_i.array * gate, copy=False))
        f_out.append(Tensor(f_i.array * gate, copy=False))

    return concat_channels(c_out), concat_channels(f_out)


def msrcm_forward(x: Tensor, p: BlockParams) -> Tensor:
    """Multi-scale residual refinement with 1/3/5/7 kernel branches."""
    acc = None
    for k in MSRCM_KERNELS:
        conv = p.conv(f"branch{k}.conv")
        if conv.c_in != x.c:
            raise ShapeMismatch(
                f"msrcm branch{k} expects {conv.c_in} channels, input has {x.c}")
        t = ops.batch_norm_infer(ops.conv2d(x, conv), p.norm(f"branch{k}.bn"))
        acc = t.array if acc is None else acc + t.array
    merged = ops.relu(Tensor(acc, copy=False))
    residual = Tensor(x.array + merged.array, copy=False)
    out = ops.batch_norm_infer(ops.conv2d(residual, p.conv("project")),
                               p.norm("project_bn"))
    return ops.relu(out)


def pconv_forward(x: Tensor, p: BlockParams, shift_fill: str = "zero") -> Tensor:
    """Directional head: shift each group along its direction, convolve every
    group with the one shared kernel, then normalize and re-encode."""
    _require_grouped(x, "pconv_forward")
    shared = p.conv("shared")
    groups = split_channels(x, GROUP_COUNT)
    parts = [ops.conv2d(shift(groups[i], d, shift_fill), shared)
             for i, d in enumerate(DIRECTIONS)]
    out = ops.relu(ops.batch_norm_infer(concat_channels(parts), p.norm("bn")))
    return ops.conv2d(out, p.conv("project"))
