"""Shared builders for randomized parameters and fixtures."""

import numpy as np

from dcffsnet.ops import BatchNormParams, ConvParams
from dcffsnet.tensor import Tensor


def rand_tensor(rng, dims, lo=-1.0, hi=1.0) -> Tensor:
    return Tensor((rng.random(dims) * (hi - lo) + lo).astype(np.float32))


def rand_conv(rng, c_in, c_out, k, bias=True, stride=1, padding=None) -> ConvParams:
    if padding is None:
        padding = (k - 1) // 2
    scale = 1.0 / np.sqrt(c_in * k * k)
    weight = Tensor(((rng.random((c_out, c_in, k, k)) * 2 - 1) * scale)
                    .astype(np.float32))
    b = ((rng.random(c_out) * 2 - 1) * scale).astype(np.float32) if bias else None
    return ConvParams(weight, b, stride=stride, padding=padding)


def zero_conv(c_in, c_out, k, bias=None, padding=None) -> ConvParams:
    if padding is None:
        padding = (k - 1) // 2
    b = None if bias is None else np.full(c_out, bias, dtype=np.float32)
    return ConvParams(Tensor.zeros((c_out, c_in, k, k)), b, padding=padding)


def identity_conv1x1(c) -> ConvParams:
    w = np.zeros((c, c, 1, 1), dtype=np.float32)
    w[np.arange(c), np.arange(c), 0, 0] = 1.0
    return ConvParams(Tensor(w))


def rand_bn(rng, c, eps=1e-5) -> BatchNormParams:
    return BatchNormParams(
        scale=(rng.random(c) + 0.5).astype(np.float32),
        shift=(rng.random(c) - 0.5).astype(np.float32),
        mean=(rng.random(c) - 0.5).astype(np.float32),
        var=(rng.random(c) + 0.5).astype(np.float32),
        epsilon=eps)


def identity_bn(c) -> BatchNormParams:
    return BatchNormParams.identity(c, epsilon=0.0)


# -- per-block parameter dictionaries (relative keys, shared with the oracle) --

def attention_params(rng, c, zero=False):
    mid = max(c // 4, 1)
    if zero:
        return {"squeeze": zero_conv(c, mid, 1), "excite": zero_conv(mid, c, 1)}
    return {"squeeze": rand_conv(rng, c, mid, 1), "excite": rand_conv(rng, mid, c, 1)}


def sam_params(rng, zero=False):
    return {"conv": zero_conv(2, 1, 7) if zero else rand_conv(rng, 2, 1, 7)}


def dscrim_params(rng, c, zero_attention=False, zero_fuse=False):
    cg = c // 8
    p = {
        "head.reduce": rand_conv(rng, c, 8, 1),
        "head.project": rand_conv(rng, 8, 8, 1),
        "gate": rand_conv(rng, 8, c, 1),
        "merge": rand_conv(rng, c, c, 1),
    }
    for i in range(1, 9):
        for key, v in sam_params(rng, zero=zero_attention).items():
            p[f"group{i}.sam.{key}"] = v
        for key, v in attention_params(rng, cg, zero=zero_attention).items():
            p[f"group{i}.cam.{key}"] = v
        p[f"group{i}.fuse"] = (zero_conv(cg, cg, 1, bias=0.0) if zero_fuse
                               else rand_conv(rng, cg, cg, 1))
    return p


def msffm_params(rng, c):
    cg = c // 8
    p = {}
    for i in range(1, 9):
        p[f"group{i}.gate_conv"] = rand_conv(rng, cg, cg, 3)
        p[f"group{i}.feature_bn"] = rand_bn(rng, cg)
        p[f"group{i}.conn_conv"] = rand_conv(rng, cg, cg, 3, bias=False)
        p[f"group{i}.conn_bn"] = rand_bn(rng, cg)
    return p


def msrcm_params(rng, c_in, c_out=None):
    c_out = c_in if c_out is None else c_out
    p = {}
    for k in (1, 3, 5, 7):
        p[f"branch{k}.conv"] = rand_conv(rng, c_in, c_in, k, bias=False)
        p[f"branch{k}.bn"] = rand_bn(rng, c_in)
    p["project"] = rand_conv(rng, c_in, c_out, 1, bias=False)
    p["project_bn"] = rand_bn(rng, c_out)
    return p


def pconv_params(rng, c, c_out=8):
    cg = c // 8
    return {
        "shared": rand_conv(rng, cg, cg, 3, bias=False),
        "bn": rand_bn(rng, c),
        "project": rand_conv(rng, c, c_out, 1),
    }
