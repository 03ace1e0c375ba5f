"""Parameter and FLOP accounting for a network configuration.

Counting rules (per input sample):

* conv: ``c_out*c_in*k*k`` parameters plus ``c_out`` for a bias;
  ``2*k*k*c_in*c_out*H_out*W_out`` FLOPs (multiply-accumulate = 2) plus
  ``c_out*H_out*W_out`` for a bias.
* batch norm: ``4*c`` parameters; 4 FLOPs per element (subtract, divide,
  scale, shift; the per-channel square root is folded in).
* activations: ReLU 1 FLOP per element, sigmoid 4 per element.
* not counted: pooling, upsampling, elementwise products/sums and softmax;
  together they are a sub-percent sliver of any configuration this package
  builds.

Totals always equal the sum of the per-module breakdown.
"""

from __future__ import annotations

from dataclasses import dataclass

from .network import ActSpec, ConvSpec, NetworkConfig, NormSpec, architecture_plan

ACT_FLOPS_PER_ELEMENT = {"relu": 1, "sigmoid": 4}


def conv_param_count(c_in: int, c_out: int, k: int, bias: bool) -> int:
    return c_out * c_in * k * k + (c_out if bias else 0)


def conv_flop_count(c_in: int, c_out: int, k: int, out_hw: tuple[int, int],
                    bias: bool) -> int:
    area = out_hw[0] * out_hw[1]
    return 2 * k * k * c_in * c_out * area + (c_out * area if bias else 0)


def norm_param_count(channels: int) -> int:
    return 4 * channels


def norm_flop_count(channels: int, out_hw: tuple[int, int]) -> int:
    return 4 * channels * out_hw[0] * out_hw[1]


@dataclass(frozen=True)
class ModuleCost:
    name: str
    params: int
    flops: int


@dataclass(frozen=True)
class CostReport:
    total_params: int
    total_flops: int
    modules: tuple[ModuleCost, ...]

    def lines(self) -> list[str]:
        out = [f"{m.name} params={m.params} flops={m.flops}" for m in self.modules]
        out.append(f"total_params={self.total_params} total_flops={self.total_flops}")
        return out


def _module_key(name: str) -> str:
    parts = name.split(".")
    if parts[0] in ("encoder", "decoder"):
        return ".".join(parts[:2])
    return parts[0]


def count_cost(cfg: NetworkConfig) -> CostReport:
    modules: dict[str, list[int]] = {}
    for spec in architecture_plan(cfg):
        key = _module_key(spec.name)
        acc = modules.setdefault(key, [0, 0])
        if isinstance(spec, ConvSpec):
            acc[0] += conv_param_count(spec.c_in, spec.c_out, spec.kernel, spec.bias)
            acc[1] += conv_flop_count(spec.c_in, spec.c_out, spec.kernel,
                                      spec.out_hw, spec.bias)
        elif isinstance(spec, NormSpec):
            acc[0] += norm_param_count(spec.channels)
            acc[1] += norm_flop_count(spec.channels, spec.out_hw)
        elif isinstance(spec, ActSpec):
            acc[1] += ACT_FLOPS_PER_ELEMENT[spec.kind] * spec.elements
    breakdown = tuple(ModuleCost(name, p, f) for name, (p, f) in modules.items())
    return CostReport(total_params=sum(m.params for m in breakdown),
                      total_flops=sum(m.flops for m in breakdown),
                      modules=breakdown)
