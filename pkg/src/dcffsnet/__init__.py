"""Connectivity-mask segmentation pipeline.

Core library for 8-neighborhood connectivity topology (encode, bilateral
voting, channel aggregation, decode), the DCFFSNet forward pass and its four
building blocks, the composite connectivity loss and Dice/IoU metrics. An
HTTP service lives in :mod:`dcffsnet.service`; :mod:`dcffsnet.cli` is a thin
client over it.
"""

__version__ = "0.1.0"

from .connectivity import (BoundaryConvention, DIRECTIONS, Direction,
                           bilateral_vote, decode_mask, encode_connectivity,
                           rca_aggregate, shift)
from .cost import CostReport, count_cost
from .errors import ConfigError, FormatError, ShapeMismatch, WeightMismatch
from .losses import LossReport, LossTerms, LossWeights, bce, composite_loss, total_loss
from .metrics import MetricsReport, dice_iou
from .network import (Network, NetworkConfig, NetworkOutput, build_network,
                      forward, seeded_weights)
from .ops import BatchNormParams, ConvParams
from .tensor import Tensor, concat_channels, split_channels
from .weights import WeightStore, load_weights, save_weights

__all__ = [
    "__version__",
    "BoundaryConvention", "DIRECTIONS", "Direction",
    "bilateral_vote", "decode_mask", "encode_connectivity", "rca_aggregate",
    "shift",
    "CostReport", "count_cost",
    "ConfigError", "FormatError", "ShapeMismatch", "WeightMismatch",
    "LossReport", "LossTerms", "LossWeights", "bce", "composite_loss",
    "total_loss",
    "MetricsReport", "dice_iou",
    "Network", "NetworkConfig", "NetworkOutput", "build_network", "forward",
    "seeded_weights",
    "BatchNormParams", "ConvParams",
    "Tensor", "concat_channels", "split_channels",
    "WeightStore", "load_weights", "save_weights",
]
