"""Brute-force reference implementations, for the test suite only.

Everything here recomputes a production operation the slowest obvious way:
per-pixel loops, literal step-by-step block compositions, exhaustive mask
enumeration. The only things shared with the production path are data
containers (Tensor, ConvParams, BatchNormParams, NetworkConfig); no
computational code is reused, so agreement between the two paths is a real
cross-check.

The convolution loops are JIT-compiled with numba so the randomized
equivalence sweeps finish in seconds; the loop structure itself stays a
plain 7-deep nest with a float64 accumulator.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from numba import njit

from .connectivity import BoundaryConvention
from .ops import BatchNormParams, ConvParams
from .tensor import Tensor

# direction table, repeated here so the oracle does not lean on the
# production module: row-major 3x3 scan without the center
OFFSETS = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))


# -- naive primitives ----------------------------------------------------------

@njit(cache=True)
def _conv_loops(xp, w, out, stride):
    n, ci, _, _ = xp.shape
    co, _, k, _ = w.shape
    ho, wo = out.shape[2], out.shape[3]
    for b in range(n):
        for o in range(co):
            for i in range(ho):
                for j in range(wo):
                    acc = 0.0
                    for c in range(ci):
                        for dy in range(k):
                            for dx in range(k):
                                acc += (float(xp[b, c, i * stride + dy, j * stride + dx])
                                        * float(w[o, c, dy, dx]))
                    out[b, o, i, j] = np.float32(acc)


def naive_conv2d(x: Tensor, p: ConvParams) -> Tensor:
    """Same contract as the production conv2d, via explicit nested loops."""
    if x.c != p.c_in:
        raise ValueError(f"input has {x.c} channels, kernel expects {p.c_in}")
    k, s, pad = p.kernel, p.stride, p.padding
    n, _, h, w = x.dims
    if h + 2 * pad < k or w + 2 * pad < k:
        raise ValueError("kernel larger than padded input")
    xp = np.pad(x.array, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    ho = (h + 2 * pad - k) // s + 1
    wo = (w + 2 * pad - k) // s + 1
    out = np.zeros((n, p.c_out, ho, wo), dtype=np.float32)
    _conv_loops(np.ascontiguousarray(xp), p.weight.array, out, s)
    if p.bias is not None:
        out += p.bias.reshape(1, -1, 1, 1)
    return Tensor(out, copy=False)


def _conv_arrays(a: np.ndarray, weight: np.ndarray, bias) -> np.ndarray:
    """Stride-1 naive conv on raw arrays; padding from the kernel size."""
    k = weight.shape[2]
    pad = (k - 1) // 2
    xp = np.pad(a, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    out = np.zeros((a.shape[0], weight.shape[0], a.shape[2], a.shape[3]),
                   dtype=np.float32)
    _conv_loops(np.ascontiguousarray(xp), weight, out, 1)
    if bias is not None:
        out += np.asarray(bias, dtype=np.float32).reshape(1, -1, 1, 1)
    return out


def naive_batch_norm(a: np.ndarray, p: BatchNormParams) -> np.ndarray:
    x = a.astype(np.float64)
    s = p.scale.astype(np.float64).reshape(1, -1, 1, 1)
    b = p.shift.astype(np.float64).reshape(1, -1, 1, 1)
    m = p.mean.astype(np.float64).reshape(1, -1, 1, 1)
    v = p.var.astype(np.float64).reshape(1, -1, 1, 1)
    return (s * (x - m) / np.sqrt(v + p.epsilon) + b).astype(np.float32)


def naive_relu(a: np.ndarray) -> np.ndarray:
    return np.where(a > 0, a, np.float32(0)).astype(np.float32)


def naive_sigmoid(a: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        return (1.0 / (1.0 + np.exp(-a.astype(np.float64)))).astype(np.float32)


def naive_gap(a: np.ndarray) -> np.ndarray:
    n, c = a.shape[:2]
    out = np.zeros((n, c, 1, 1), dtype=np.float32)
    for b in range(n):
        for ch in range(c):
            out[b, ch, 0, 0] = np.float32(a[b, ch].astype(np.float64).sum()
                                          / a[b, ch].size)
    return out


def naive_axis_mean(a: np.ndarray, axis: str) -> np.ndarray:
    if axis == "height":
        return a.astype(np.float64).sum(axis=2, keepdims=True).astype(np.float32) \
            / np.float32(a.shape[2])
    return a.astype(np.float64).sum(axis=3, keepdims=True).astype(np.float32) \
        / np.float32(a.shape[3])


def naive_softmax_channels(a: np.ndarray) -> np.ndarray:
    n, c, h, w = a.shape
    out = np.zeros_like(a, dtype=np.float32)
    for b in range(n):
        for i in range(h):
            for j in range(w):
                col = a[b, :, i, j].astype(np.float64)
                e = np.array([math.exp(v - col.max()) for v in col])
                out[b, :, i, j] = (e / e.sum()).astype(np.float32)
    return out


def naive_max_pool_2x2(a: np.ndarray) -> np.ndarray:
    n, c, h, w = a.shape
    out = np.zeros((n, c, h // 2, w // 2), dtype=np.float32)
    for b in range(n):
        for ch in range(c):
            for i in range(h // 2):
                for j in range(w // 2):
                    out[b, ch, i, j] = a[b, ch, 2 * i:2 * i + 2,
                                         2 * j:2 * j + 2].max()
    return out


def naive_upsample(a: np.ndarray, factor: int, mode: str) -> np.ndarray:
    n, c, h, w = a.shape
    ho, wo = h * factor, w * factor
    out = np.zeros((n, c, ho, wo), dtype=np.float32)
    for i in range(ho):
        for j in range(wo):
            if mode == "nearest":
                out[:, :, i, j] = a[:, :, i // factor, j // factor]
                continue
            sy = min(max((i + 0.5) / factor - 0.5, 0.0), h - 1)
            sx = min(max((j + 0.5) / factor - 0.5, 0.0), w - 1)
            y0, x0 = int(math.floor(sy)), int(math.floor(sx))
            y1, x1 = min(y0 + 1, h - 1), min(x0 + 1, w - 1)
            fy, fx = sy - y0, sx - x0
            val = ((1 - fy) * (1 - fx) * a[:, :, y0, x0].astype(np.float64)
                   + (1 - fy) * fx * a[:, :, y0, x1]
                   + fy * (1 - fx) * a[:, :, y1, x0]
                   + fy * fx * a[:, :, y1, x1])
            out[:, :, i, j] = val.astype(np.float32)
    return out


def naive_shift(a: np.ndarray, dy: int, dx: int, fill: str = "zero",
                fill_value: float = 0.0) -> np.ndarray:
    n, c, h, w = a.shape
    out = np.zeros((n, c, h, w), dtype=np.float32)
    for i in range(h):
        for j in range(w):
            si, sj = i + dy, j + dx
            if 0 <= si < h and 0 <= sj < w:
                out[:, :, i, j] = a[:, :, si, sj]
            elif fill == "replicate":
                out[:, :, i, j] = a[:, :, min(max(si, 0), h - 1),
                                    min(max(sj, 0), w - 1)]
            else:
                out[:, :, i, j] = fill_value
    return out


# -- naive connectivity --------------------------------------------------------

def naive_encode(mask: np.ndarray, convention: BoundaryConvention) -> np.ndarray:
    h, w = mask.shape
    out = np.zeros((1, 8, h, w), dtype=np.float32)
    for idx, (dy, dx) in enumerate(OFFSETS):
        for i in range(h):
            for j in range(w):
                si, sj = i + dy, j + dx
                if 0 <= si < h and 0 <= sj < w:
                    nb = mask[si, sj]
                elif convention is BoundaryConvention.SAME_AS_SELF:
                    nb = mask[i, j]
                else:
                    nb = 0
                out[0, idx, i, j] = mask[i, j] * nb
    return out


def naive_bilateral_vote(xc: np.ndarray) -> np.ndarray:
    n, _, h, w = xc.shape
    out = np.zeros_like(xc, dtype=np.float32)
    for b in range(n):
        for idx, (dy, dx) in enumerate(OFFSETS):
            partner_idx = 7 - idx  # channel 9-i, zero-based
            for i in range(h):
                for j in range(w):
                    si, sj = i + dy, j + dx
                    partner = (xc[b, partner_idx, si, sj]
                               if 0 <= si < h and 0 <= sj < w else np.float32(1.0))
                    out[b, idx, i, j] = xc[b, idx, i, j] * partner
    return out


def naive_rca(xb: np.ndarray) -> np.ndarray:
    n, _, h, w = xb.shape
    out = np.zeros((n, 1, h, w), dtype=np.float32)
    for b in range(n):
        for i in range(h):
            for j in range(w):
                best = xb[b, 0, i, j]
                for ch in range(1, 8):
                    if xb[b, ch, i, j] > best:
                        best = xb[b, ch, i, j]
                out[b, 0, i, j] = best
    return out


def naive_decode(xc: np.ndarray, threshold: float) -> np.ndarray:
    prob = naive_rca(naive_bilateral_vote(xc))
    return (prob[0, 0] >= threshold).astype(np.uint8)


def roundtrip_condition(mask: np.ndarray,
                        convention: BoundaryConvention) -> bool:
    """True when every foreground pixel has a foreground 8-neighbor, or (under
    the same-as-self convention) touches the image border."""
    h, w = mask.shape
    for i in range(h):
        for j in range(w):
            if not mask[i, j]:
                continue
            on_border = i in (0, h - 1) or j in (0, w - 1)
            if on_border and convention is BoundaryConvention.SAME_AS_SELF:
                continue
            has_neighbor = False
            for dy, dx in OFFSETS:
                si, sj = i + dy, j + dx
                if 0 <= si < h and 0 <= sj < w and mask[si, sj]:
                    has_neighbor = True
                    break
            if not has_neighbor:
                return False
    return True


def enumerate_roundtrip(h: int, w: int,
                        convention: BoundaryConvention = BoundaryConvention.SAME_AS_SELF,
                        encode_fn=None, decode_fn=None,
                        threshold: float = 0.5) -> list[np.ndarray]:
    """Check decode(encode(Y)) == Y over every h x w binary mask that meets the
    round-trip condition; returns the violating masks (expected: none).

    ``encode_fn(mask, convention)`` and ``decode_fn(connectivity, threshold)``
    default to the naive implementations in this module; pass the production
    functions to put them under test.
    """
    if h * w > 9:
        raise ValueError(f"exhaustive enumeration capped at 9 pixels, got {h * w}")
    if encode_fn is None:
        encode_fn = naive_encode
    if decode_fn is None:
        decode_fn = naive_decode
    violations = []
    for bits in itertools.product((0, 1), repeat=h * w):
        mask = np.array(bits, dtype=np.uint8).reshape(h, w)
        if not roundtrip_condition(mask, convention):
            continue
        decoded = np.asarray(decode_fn(encode_fn(mask, convention), threshold))
        if not np.array_equal(decoded.astype(np.uint8), mask):
            violations.append(mask)
    return violations


# -- block compositions ----------------------------------------------------------

def _apply_conv(params: dict, key: str, a: np.ndarray) -> np.ndarray:
    p = params[key]
    return _conv_arrays(a, p.weight.array, p.bias)


def oracle_channel_attention(a: np.ndarray, params: dict) -> np.ndarray:
    w = naive_gap(a)
    w = naive_relu(_apply_conv(params, "squeeze", w))
    w = naive_sigmoid(_apply_conv(params, "excite", w))
    return (a * w).astype(np.float32)


def oracle_spatial_attention(a: np.ndarray, params: dict) -> np.ndarray:
    mean = a.astype(np.float64).mean(axis=1, keepdims=True).astype(np.float32)
    peak = a.max(axis=1, keepdims=True)
    m = naive_sigmoid(_apply_conv(params, "conv",
                                  np.concatenate([mean, peak], axis=1)))
    return (a * m).astype(np.float32)


def _sub(params: dict, prefix: str) -> dict:
    cut = len(prefix) + 1
    return {k[cut:]: v for k, v in params.items() if k.startswith(prefix + ".")}


def oracle_dscrim(f5: np.ndarray, params: dict, full_res, shift_fill="zero",
                  upsample_mode="bilinear", injection_gate="fused"):
    head = _apply_conv(params, "head.reduce", f5)
    head = naive_upsample(head, 32, upsample_mode)
    p_out = _apply_conv(params, "head.project", head)
    assert p_out.shape[2:] == tuple(full_res)

    gate = naive_sigmoid(_apply_conv(params, "gate", naive_gap(p_out)))
    step = f5.shape[1] // 8
    refined = []
    for idx, (dy, dx) in enumerate(OFFSETS):
        g = _sub(params, f"group{idx + 1}")
        x_i = naive_shift(f5[:, idx * step:(idx + 1) * step], dy, dx, shift_fill)
        sam = oracle_spatial_attention(x_i, _sub(g, "sam"))
        cam = oracle_channel_attention(x_i, _sub(g, "cam"))
        p_i = gate[:, idx * step:(idx + 1) * step]
        mixed = (sam + cam) * p_i if injection_gate == "fused" else sam + cam * p_i
        refined.append(x_i + _conv_arrays(mixed, g["fuse"].weight.array,
                                          g["fuse"].bias))
    c5 = _apply_conv(params, "merge", np.concatenate(refined, axis=1))
    return c5.astype(np.float32), p_out.astype(np.float32)


def oracle_msffm(f: np.ndarray, c: np.ndarray, params: dict):
    step = f.shape[1] // 8
    h, w = f.shape[2], f.shape[3]
    c_parts, f_parts = [], []
    for idx in range(8):
        g = _sub(params, f"group{idx + 1}")
        f_i = f[:, idx * step:(idx + 1) * step]
        c_i = c[:, idx * step:(idx + 1) * step]

        rows = naive_axis_mean(f_i, "width")               # (n, cg, h, 1)
        cols = naive_axis_mean(f_i, "height")              # (n, cg, 1, w)
        strip = np.concatenate([rows.transpose(0, 1, 3, 2), cols], axis=3)
        enc = _apply_conv(g, "gate_conv", strip)
        gate_h = naive_sigmoid(enc[:, :, :, :h]).transpose(0, 1, 3, 2)
        gate_w = naive_sigmoid(enc[:, :, :, h:])
        x_f = naive_batch_norm((f_i * gate_h * gate_w).astype(np.float32),
                               g["feature_bn"])
        x_c = naive_batch_norm(_apply_conv(g, "conn_conv", c_i), g["conn_bn"])

        w_f = naive_softmax_channels(naive_gap(x_f))
        w_c = naive_softmax_channels(naive_gap(x_c))
        w_fc = (w_f.astype(np.float64) * x_c).sum(axis=1, keepdims=True)
        w_cf = (w_c.astype(np.float64) * x_f).sum(axis=1, keepdims=True)
        gate = naive_sigmoid((w_cf + w_fc).astype(np.float32))

        c_parts.append((c_i * gate).astype(np.float32))
        f_parts.append((f_i * gate).astype(np.float32))
    return np.concatenate(c_parts, axis=1), np.concatenate(f_parts, axis=1)


def oracle_msrcm(x: np.ndarray, params: dict) -> np.ndarray:
    total = None
    for k in (1, 3, 5, 7):
        t = naive_batch_norm(_apply_conv(params, f"branch{k}.conv", x),
                             params[f"branch{k}.bn"])
        total = t if total is None else total + t
    residual = x + naive_relu(total)
    out = naive_batch_norm(_apply_conv(params, "project",
                                       residual.astype(np.float32)),
                           params["project_bn"])
    return naive_relu(out)


def oracle_pconv(x: np.ndarray, params: dict, shift_fill="zero") -> np.ndarray:
    step = x.shape[1] // 8
    shared = params["shared"]
    parts = [_conv_arrays(naive_shift(x[:, i * step:(i + 1) * step], dy, dx,
                                      shift_fill),
                          shared.weight.array, shared.bias)
             for i, (dy, dx) in enumerate(OFFSETS)]
    out = naive_relu(naive_batch_norm(np.concatenate(parts, axis=1),
                                      params["bn"]))
    return _apply_conv(params, "project", out)


def compose_block_oracle(block_id: str, params: dict, *inputs, **options):
    """Dispatch a literal step-by-step recomputation of one block."""
    arrays = [x.array if isinstance(x, Tensor) else np.asarray(x) for x in inputs]
    if block_id == "channel_attention":
        return oracle_channel_attention(arrays[0], params)
    if block_id == "spatial_attention":
        return oracle_spatial_attention(arrays[0], params)
    if block_id == "dscrim":
        return oracle_dscrim(arrays[0], params, **options)
    if block_id == "msffm":
        return oracle_msffm(arrays[0], arrays[1], params)
    if block_id == "msrcm":
        return oracle_msrcm(arrays[0], params)
    if block_id == "pconv":
        return oracle_pconv(arrays[0], params, **options)
    raise ValueError(f"unknown block id {block_id!r}")


# -- whole-network composition ---------------------------------------------------

def _conv_from(params: dict, name: str) -> tuple[np.ndarray, np.ndarray | None]:
    weight = params[f"{name}.weight"].array
    bias_t = params.get(f"{name}.bias")
    return weight, None if bias_t is None else bias_t.array.reshape(-1)


def _bn_from(params: dict, name: str, epsilon: float) -> BatchNormParams:
    return BatchNormParams(
        scale=params[f"{name}.scale"].array.reshape(-1),
        shift=params[f"{name}.shift"].array.reshape(-1),
        mean=params[f"{name}.mean"].array.reshape(-1),
        var=params[f"{name}.var"].array.reshape(-1),
        epsilon=epsilon)


def _block_params(params: dict, prefix: str, eps: float) -> dict:
    """Collect ConvParams/BatchNormParams data objects under ``prefix.``."""
    cut = len(prefix) + 1
    names = {k[cut:] for k in params if k.startswith(prefix + ".")}
    out: dict = {}
    for leafed in sorted(names):
        base, leaf = leafed.rsplit(".", 1)
        if base in out:
            continue
        if leaf in ("weight", "bias"):
            weight = params[f"{prefix}.{base}.weight"]
            bias_t = params.get(f"{prefix}.{base}.bias")
            bias = None if bias_t is None else bias_t.array.reshape(-1)
            out[base] = ConvParams(weight, bias, stride=1,
                                   padding=(weight.dims[2] - 1) // 2)
        else:
            out[base] = _bn_from(params, f"{prefix}.{base}", eps)
    return out


def naive_network_forward(cfg, params: dict, image: Tensor):
    """Recompute the full forward pass from naive primitives.

    ``params`` maps full parameter names to tensors (e.g. ``dict(store.items())``).
    Returns (output1, output2) as float32 arrays, both post-sigmoid.
    """
    eps = cfg.bn_epsilon
    a = image.array
    skips = []
    for s in range(1, 6):
        for j in (1, 2):
            w, b = _conv_from(params, f"encoder.stage{s}.conv{j}")
            a = _conv_arrays(a, w, b)
            a = naive_relu(naive_batch_norm(a, _bn_from(
                params, f"encoder.stage{s}.bn{j}", eps)))
        skips.append(a)
        a = naive_max_pool_2x2(a)

    c5, p_out = oracle_dscrim(
        a, _block_params(params, "dscrim", eps), full_res=cfg.input_size,
        shift_fill=cfg.shift_fill, upsample_mode=cfg.upsample_mode,
        injection_gate=cfg.injection_gate)
    output1 = naive_sigmoid(p_out)

    d = c5
    for k in range(5, 0, -1):
        base = f"decoder.level{k}"
        d = naive_upsample(d, 2, cfg.upsample_mode)
        w, b = _conv_from(params, f"{base}.upconv")
        d = _conv_arrays(d, w, b)
        c_next, f_next = oracle_msffm(skips[k - 1], d,
                                      _block_params(params, f"{base}.msffm", eps))
        merged = (c_next + f_next).astype(np.float32) if k == 1 else c_next
        d = oracle_msrcm(merged, _block_params(params, f"{base}.msrcm", eps))

    head = oracle_pconv(d, _block_params(params, "head", eps),
                        shift_fill=cfg.shift_fill)
    return output1, naive_sigmoid(head)
