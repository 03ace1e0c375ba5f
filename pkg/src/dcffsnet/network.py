"""Assembly of the full DCFFSNet forward pass.

Wiring (one consistent reading of the architecture, kept entirely inside this
module so alternates can be swapped in without touching block code):

* Encoder: five stages of two (3x3 conv + BN + ReLU) layers, each stage
  followed by a 2x2 max-pool, taking the input from full resolution down to
  1/32. Stage outputs (pre-pool) are the skip features.
* Bottleneck: ``dscrim_forward`` consumes the pooled 1/32 features and emits
  the refined bottleneck stream plus the full-resolution supervision head
  (``output1`` after a sigmoid).
* Decoder: five levels, deepest first. Each level upsamples the running
  stream by 2, re-projects its channels with a 1x1 conv to the skip width,
  cross-calibrates against the skip via ``msffm_forward`` and refines the
  calibrated connectivity stream with ``msrcm_forward``. Only the final level
  merges both calibrated streams (elementwise add) before refinement.
* Head: ``pconv_forward`` maps the full-resolution stream to 8 channels;
  ``output2`` is its sigmoid.

``architecture_plan`` walks the same wiring declaratively and is the single
source for parameter names, shapes and layer geometry; building, seeding and
cost accounting all derive from it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import ops
from .blocks import (GROUP_COUNT, MSRCM_KERNELS, BlockParams, dscrim_forward,
                     msffm_forward, msrcm_forward, pconv_forward)
from .connectivity import BoundaryConvention
from .errors import ConfigError, ShapeMismatch, WeightMismatch
from .losses import LossWeights
from .tensor import Shape, Tensor
from .weights import WeightStore, random_store

ENCODER_STAGES = 5
INPUT_CHANNELS = 3
OUTPUT_CHANNELS = 8
BOTTLENECK_FACTOR = 32  # five 2x2 pools


@dataclass(frozen=True)
class NetworkConfig:
    input_size: tuple[int, int]
    encoder_channels: tuple[int, ...] = (32, 64, 128, 256, 512)
    upsample_mode: str = "bilinear"
    shift_fill: str = "zero"
    boundary: BoundaryConvention = BoundaryConvention.SAME_AS_SELF
    decode_threshold: float = 0.5
    loss_weights: LossWeights = field(default_factory=LossWeights)
    injection_gate: str = "fused"
    bn_epsilon: float = 1e-5

    def validate(self) -> "NetworkConfig":
        h, w = self.input_size
        if h < BOTTLENECK_FACTOR or w < BOTTLENECK_FACTOR \
                or h % BOTTLENECK_FACTOR or w % BOTTLENECK_FACTOR:
            raise ConfigError(
                f"input size {self.input_size} must be >= {BOTTLENECK_FACTOR} "
                f"and divisible by {BOTTLENECK_FACTOR}")
        ch = self.encoder_channels
        if len(ch) != ENCODER_STAGES:
            raise ConfigError(f"need {ENCODER_STAGES} encoder widths, got {len(ch)}")
        for c in ch:
            if c < GROUP_COUNT or c % GROUP_COUNT:
                raise ConfigError(
                    f"encoder width {c} is not divisible by {GROUP_COUNT}")
        if any(a >= b for a, b in zip(ch, ch[1:])):
            raise ConfigError(f"encoder widths must ascend, got {ch}")
        if self.upsample_mode not in ("nearest", "bilinear"):
            raise ConfigError(f"unknown upsample mode {self.upsample_mode!r}")
        if self.shift_fill not in ("zero", "replicate"):
            raise ConfigError(f"unknown shift fill {self.shift_fill!r}")
        if self.injection_gate not in ("fused", "channel_only"):
            raise ConfigError(f"unknown injection gate {self.injection_gate!r}")
        if not 0.0 < self.decode_threshold < 1.0:
            raise ConfigError(
                f"decode threshold {self.decode_threshold} not in (0, 1)")
        if not isinstance(self.boundary, BoundaryConvention):
            raise ConfigError(f"bad boundary convention {self.boundary!r}")
        lw = self.loss_weights
        if min(lw.bbce, lw.cbce, lw.output1) < 0:
            raise ConfigError("loss weights must be non-negative")
        if self.bn_epsilon <= 0:
            raise ConfigError(f"bn epsilon must be positive, got {self.bn_epsilon}")
        return self


# -- declarative layer plan ----------------------------------------------------

@dataclass(frozen=True)
class ConvSpec:
    name: str
    c_in: int
    c_out: int
    kernel: int
    padding: int
    bias: bool
    out_hw: tuple[int, int]
    stride: int = 1


@dataclass(frozen=True)
class NormSpec:
    name: str
    channels: int
    out_hw: tuple[int, int]


@dataclass(frozen=True)
class ActSpec:
    name: str    # owning layer path, used for per-module cost grouping
    kind: str    # "relu" or "sigmoid"
    elements: int


def _attention_specs(prefix: str, channels: int, hw: tuple[int, int]):
    """SAM (7x7 over mean/max maps) and CAM (squeeze-excite) for one group."""
    mid = max(channels // 4, 1)
    area = hw[0] * hw[1]
    yield ConvSpec(f"{prefix}.sam.conv", 2, 1, 7, 3, True, hw)
    yield ActSpec(f"{prefix}.sam.conv", "sigmoid", area)
    yield ConvSpec(f"{prefix}.cam.squeeze", channels, mid, 1, 0, True, (1, 1))
    yield ActSpec(f"{prefix}.cam.squeeze", "relu", mid)
    yield ConvSpec(f"{prefix}.cam.excite", mid, channels, 1, 0, True, (1, 1))
    yield ActSpec(f"{prefix}.cam.excite", "sigmoid", channels)


def architecture_plan(cfg: NetworkConfig):
    """Yield Conv/Norm/Act records in forward order for ``cfg``."""
    cfg.validate()
    full_h, full_w = cfg.input_size
    ch = cfg.encoder_channels

    h, w = full_h, full_w
    c_prev = INPUT_CHANNELS
    for s in range(1, ENCODER_STAGES + 1):
        c = ch[s - 1]
        for j, ci in ((1, c_prev), (2, c)):
            yield ConvSpec(f"encoder.stage{s}.conv{j}", ci, c, 3, 1, False, (h, w))
            yield NormSpec(f"encoder.stage{s}.bn{j}", c, (h, w))
            yield ActSpec(f"encoder.stage{s}.bn{j}", "relu", c * h * w)
        c_prev = c
        h, w = h // 2, w // 2

    cb = ch[-1]
    bh, bw = h, w  # 1/32 resolution
    cg = cb // GROUP_COUNT
    yield ConvSpec("dscrim.head.reduce", cb, OUTPUT_CHANNELS, 1, 0, True, (bh, bw))
    yield ConvSpec("dscrim.head.project", OUTPUT_CHANNELS, OUTPUT_CHANNELS, 1, 0,
                   True, (full_h, full_w))
    yield ActSpec("dscrim.head.project", "sigmoid", OUTPUT_CHANNELS * full_h * full_w)
    yield ConvSpec("dscrim.gate", OUTPUT_CHANNELS, cb, 1, 0, True, (1, 1))
    yield ActSpec("dscrim.gate", "sigmoid", cb)
    for i in range(1, GROUP_COUNT + 1):
        yield from _attention_specs(f"dscrim.group{i}", cg, (bh, bw))
        yield ConvSpec(f"dscrim.group{i}.fuse", cg, cg, 1, 0, True, (bh, bw))
    yield ConvSpec("dscrim.merge", cb, cb, 1, 0, True, (bh, bw))

    d_in = cb
    for k in range(ENCODER_STAGES, 0, -1):
        sc = ch[k - 1]
        h, w = full_h >> (k - 1), full_w >> (k - 1)
        base = f"decoder.level{k}"
        yield ConvSpec(f"{base}.upconv", d_in, sc, 1, 0, True, (h, w))
        gc = sc // GROUP_COUNT
        for i in range(1, GROUP_COUNT + 1):
            g = f"{base}.msffm.group{i}"
            yield ConvSpec(f"{g}.gate_conv", gc, gc, 3, 1, True, (1, h + w))
            yield ActSpec(f"{g}.gate_conv", "sigmoid", gc * (h + w))
            yield NormSpec(f"{g}.feature_bn", gc, (h, w))
            yield ConvSpec(f"{g}.conn_conv", gc, gc, 3, 1, False, (h, w))
            yield NormSpec(f"{g}.conn_bn", gc, (h, w))
            yield ActSpec(f"{g}.conn_bn", "sigmoid", h * w)  # cross gate
        for kk in MSRCM_KERNELS:
            yield ConvSpec(f"{base}.msrcm.branch{kk}.conv", sc, sc, kk,
                           (kk - 1) // 2, False, (h, w))
            yield NormSpec(f"{base}.msrcm.branch{kk}.bn", sc, (h, w))
        yield ActSpec(f"{base}.msrcm.branch1.bn", "relu", sc * h * w)  # branch sum
        yield ConvSpec(f"{base}.msrcm.project", sc, sc, 1, 0, False, (h, w))
        yield NormSpec(f"{base}.msrcm.project_bn", sc, (h, w))
        yield ActSpec(f"{base}.msrcm.project_bn", "relu", sc * h * w)
        d_in = sc

    head_c = ch[0]
    hg = head_c // GROUP_COUNT
    yield ConvSpec("head.shared", hg, hg, 3, 1, False, (full_h, full_w))
    yield NormSpec("head.bn", head_c, (full_h, full_w))
    yield ActSpec("head.bn", "relu", head_c * full_h * full_w)
    yield ConvSpec("head.project", head_c, OUTPUT_CHANNELS, 1, 0, True,
                   (full_h, full_w))
    yield ActSpec("head.project", "sigmoid", OUTPUT_CHANNELS * full_h * full_w)


def parameter_entries(cfg: NetworkConfig) -> list[tuple[str, Shape]]:
    """Every parameter the config demands, as (name, tensor dims) in plan order."""
    entries: list[tuple[str, Shape]] = []
    for spec in architecture_plan(cfg):
        if isinstance(spec, ConvSpec):
            entries.append((f"{spec.name}.weight",
                            (spec.c_out, spec.c_in, spec.kernel, spec.kernel)))
            if spec.bias:
                entries.append((f"{spec.name}.bias", (1, spec.c_out, 1, 1)))
        elif isinstance(spec, NormSpec):
            for leaf in ("scale", "shift", "mean", "var"):
                entries.append((f"{spec.name}.{leaf}", (1, spec.channels, 1, 1)))
    return entries


def seeded_weights(cfg: NetworkConfig, seed: int) -> WeightStore:
    return random_store(parameter_entries(cfg), seed)


# -- materialization -----------------------------------------------------------

def _vector(store: WeightStore, name: str, channels: int) -> np.ndarray:
    t = store.get(name)
    if t.dims != (1, channels, 1, 1):
        raise WeightMismatch(
            f"parameter {name!r}: expected dims (1, {channels}, 1, 1), "
            f"found {t.dims}")
    return t.array.reshape(-1)


def _materialize(cfg: NetworkConfig, store: WeightStore):
    expected = parameter_entries(cfg)
    names = set(store.names())
    for name, dims in expected:
        if name not in store:
            raise WeightMismatch(f"missing parameter {name!r}")
    extras = names.difference(n for n, _ in expected)
    if extras:
        raise WeightMismatch(f"unexpected parameter {sorted(extras)[0]!r}")

    layers: dict[str, ops.ConvParams | ops.BatchNormParams] = {}
    for spec in architecture_plan(cfg):
        if isinstance(spec, ConvSpec):
            weight = store.get(f"{spec.name}.weight")
            want = (spec.c_out, spec.c_in, spec.kernel, spec.kernel)
            if weight.dims != want:
                raise WeightMismatch(
                    f"parameter {spec.name}.weight: expected dims {want}, "
                    f"found {weight.dims}")
            bias = (_vector(store, f"{spec.name}.bias", spec.c_out)
                    if spec.bias else None)
            layers[spec.name] = ops.ConvParams(weight, bias, spec.stride,
                                               spec.padding)
        elif isinstance(spec, NormSpec):
            layers[spec.name] = ops.BatchNormParams(
                scale=_vector(store, f"{spec.name}.scale", spec.channels),
                shift=_vector(store, f"{spec.name}.shift", spec.channels),
                mean=_vector(store, f"{spec.name}.mean", spec.channels),
                var=_vector(store, f"{spec.name}.var", spec.channels),
                epsilon=cfg.bn_epsilon)
    return layers


def _block(layers: dict, prefix: str) -> BlockParams:
    cut = len(prefix) + 1
    return BlockParams({k[cut:]: v for k, v in layers.items()
                        if k.startswith(prefix + ".")})


@dataclass(frozen=True)
class _Stage:
    conv1: ops.ConvParams
    bn1: ops.BatchNormParams
    conv2: ops.ConvParams
    bn2: ops.BatchNormParams


@dataclass(frozen=True)
class _Level:
    index: int
    upconv: ops.ConvParams
    msffm: BlockParams
    msrcm: BlockParams


@dataclass(frozen=True)
class NetworkOutput:
    output1: Tensor  # supervision head, post-sigmoid, (n, 8, H, W)
    output2: Tensor  # prediction head, post-sigmoid, (n, 8, H, W)


class Network:
    """A validated, immutable forward-pass network."""

    def __init__(self, cfg: NetworkConfig, store: WeightStore):
        cfg.validate()
        layers = _materialize(cfg, store)
        self.cfg = cfg
        self._stages = [
            _Stage(conv1=layers[f"encoder.stage{s}.conv1"],
                   bn1=layers[f"encoder.stage{s}.bn1"],
                   conv2=layers[f"encoder.stage{s}.conv2"],
                   bn2=layers[f"encoder.stage{s}.bn2"])
            for s in range(1, ENCODER_STAGES + 1)]
        self._dscrim = _block(layers, "dscrim")
        self._levels = [
            _Level(index=k,
                   upconv=layers[f"decoder.level{k}.upconv"],
                   msffm=_block(layers, f"decoder.level{k}.msffm"),
                   msrcm=_block(layers, f"decoder.level{k}.msrcm"))
            for k in range(ENCODER_STAGES, 0, -1)]
        self._head = _block(layers, "head")

    def forward(self, image: Tensor) -> NetworkOutput:
        cfg = self.cfg
        h, w = cfg.input_size
        if image.c != INPUT_CHANNELS or (image.h, image.w) != (h, w):
            raise ShapeMismatch(
                f"network input: expected (n, {INPUT_CHANNELS}, {h}, {w}), "
                f"got {image.dims}")

        skips = []
        t = image
        for stage in self._stages:
            t = ops.relu(ops.batch_norm_infer(ops.conv2d(t, stage.conv1), stage.bn1))
            t = ops.relu(ops.batch_norm_infer(ops.conv2d(t, stage.conv2), stage.bn2))
            skips.append(t)
            t = ops.max_pool_2x2(t)

        bottleneck = dscrim_forward(
            t, self._dscrim, full_res=(h, w), shift_fill=cfg.shift_fill,
            upsample_mode=cfg.upsample_mode, injection_gate=cfg.injection_gate)
        output1 = ops.sigmoid(bottleneck.p_out)

        d = bottleneck.c5
        for level in self._levels:
            d = ops.upsample(d, 2, cfg.upsample_mode)
            d = ops.conv2d(d, level.upconv)
            skip = skips[level.index - 1]
            c_next, f_next = msffm_forward(skip, d, level.msffm)
            merged = (Tensor(c_next.array + f_next.array, copy=False)
                      if level.index == 1 else c_next)
            d = msrcm_forward(merged, level.msrcm)

        output2 = ops.sigmoid(pconv_forward(d, self._head,
                                            shift_fill=cfg.shift_fill))
        return NetworkOutput(output1=output1, output2=output2)


def build_network(cfg: NetworkConfig, store: WeightStore) -> Network:
    return Network(cfg, store)


def forward(net: Network, image: Tensor) -> NetworkOutput:
    return net.forward(image)
