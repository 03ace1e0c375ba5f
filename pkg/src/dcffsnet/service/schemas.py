"""Pydantic request/response models for the HTTP service.

File-like payloads (PGM masks, NTF tensors, DCFW weight bundles) travel as
base64 strings; a forward run may instead name a weight file on the server's
filesystem or ask for seeded random weights.
"""

from __future__ import annotations

import base64
import binascii
from typing import Literal, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

BOUNDARY_VALUES = Literal["classic", "self"]


def decode_b64(payload: str, what: str) -> bytes:
    try:
        return base64.b64decode(payload, validate=True)
    except (binascii.Error, ValueError):
        raise ValueError(f"{what} is not valid base64") from None


def encode_b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


class LossWeightsModel(BaseModel):
    bbce: float = Field(default=0.2, ge=0)
    cbce: float = Field(default=0.8, ge=0)
    output1: float = Field(default=0.2, ge=0)


class NetworkConfigModel(BaseModel):
    input_size: Optional[tuple[int, int]] = None
    encoder_channels: tuple[int, int, int, int, int] = (32, 64, 128, 256, 512)
    upsample_mode: Literal["nearest", "bilinear"] = "bilinear"
    shift_fill: Literal["zero", "replicate"] = "zero"
    boundary: BOUNDARY_VALUES = "self"
    decode_threshold: float = Field(default=0.5, gt=0, lt=1)
    loss_weights: LossWeightsModel = Field(default_factory=LossWeightsModel)
    injection_gate: Literal["fused", "channel_only"] = "fused"
    bn_epsilon: float = Field(default=1e-5, gt=0)


class EncodeRequest(BaseModel):
    mask_pgm: str = Field(description="base64 PGM mask")
    boundary: BOUNDARY_VALUES = "self"


class TensorResponse(BaseModel):
    tensor_ntf: str
    dims: tuple[int, int, int, int]


class DecodeRequest(BaseModel):
    tensor_ntf: str = Field(description="base64 8-channel NTF tensor")
    threshold: float = Field(default=0.5, gt=0, lt=1)


class MaskResponse(BaseModel):
    mask_pgm: str
    foreground: int


class MetricsRequest(BaseModel):
    pred_pgm: str
    truth_pgm: str


class MetricsResponse(BaseModel):
    dice: float
    iou: float


class CostRequest(BaseModel):
    config: NetworkConfigModel

    @model_validator(mode="after")
    def _needs_size(self):
        if self.config.input_size is None:
            raise ValueError("cost accounting needs config.input_size")
        return self


class ModuleCostModel(BaseModel):
    name: str
    params: int
    flops: int


class CostResponse(BaseModel):
    total_params: int
    total_flops: int
    modules: list[ModuleCostModel]


class ForwardRequest(BaseModel):
    image_ntf: Optional[str] = None
    image_pgm: Optional[list[str]] = None   # exactly 3 grayscale planes
    weights_dcfw: Optional[str] = None
    weights_path: Optional[str] = None      # DCFW file on the server filesystem
    seed: Optional[int] = None
    config: NetworkConfigModel = Field(default_factory=NetworkConfigModel)
    truth_pgm: Optional[str] = None

    @field_validator("image_pgm")
    @classmethod
    def _triplet(cls, v):
        if v is not None and len(v) != 3:
            raise ValueError("image_pgm must hold exactly 3 grayscale planes")
        return v

    @model_validator(mode="after")
    def _one_of_each(self):
        if (self.image_ntf is None) == (self.image_pgm is None):
            raise ValueError("provide exactly one of image_ntf or image_pgm")
        sources = [s is not None
                   for s in (self.weights_dcfw, self.weights_path, self.seed)]
        if sum(sources) != 1:
            raise ValueError(
                "provide exactly one of weights_dcfw, weights_path or seed")
        return self


class ForwardResponse(BaseModel):
    output1_ntf: str
    output2_ntf: str
    mask_pgm: str
    metrics: Optional[MetricsResponse] = None


class LossRequest(BaseModel):
    output1_ntf: str
    output2_ntf: str
    truth_pgm: str
    weights: LossWeightsModel = Field(default_factory=LossWeightsModel)
    boundary: BOUNDARY_VALUES = "self"


class LossTermsModel(BaseModel):
    main_bce: float
    bbce: float
    cbce: float
    combined: float


class LossResponse(BaseModel):
    output1: LossTermsModel
    output2: LossTermsModel
    total: float
