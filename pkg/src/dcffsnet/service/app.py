"""FastAPI service wrapping the segmentation pipeline.

Errors carry an ``error_class`` so clients can map them onto exit codes:
``malformed_input`` (HTTP 400) for unreadable or ill-formed payloads and
``inconsistent`` (HTTP 409) for inputs that are individually fine but do not
fit together (weights vs. config, image vs. declared size).
"""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI, HTTPException

from .. import __version__
from ..connectivity import (BoundaryConvention, decode_mask,
                            encode_connectivity)
from ..cost import count_cost
from ..errors import ConfigError, FormatError, ShapeMismatch, WeightMismatch
from ..fileio import gray_from_pgm, mask_from_pgm, ntf_bytes, ntf_parse, pgm_bytes
from ..losses import LossWeights, total_loss
from ..metrics import dice_iou
from ..network import (Network, NetworkConfig, NetworkOutput, build_network,
                       seeded_weights)
from ..tensor import Tensor
from ..weights import load_weights, store_parse
from . import schemas

BOUNDARIES = {
    "classic": BoundaryConvention.CLASSIC_ZERO,
    "self": BoundaryConvention.SAME_AS_SELF,
}


def _malformed(msg: str) -> HTTPException:
    return HTTPException(status_code=400,
                         detail={"error_class": "malformed_input", "message": msg})


def _inconsistent(msg: str) -> HTTPException:
    return HTTPException(status_code=409,
                         detail={"error_class": "inconsistent", "message": msg})


def _network_config(model: schemas.NetworkConfigModel,
                    input_size: tuple[int, int]) -> NetworkConfig:
    lw = model.loss_weights
    cfg = NetworkConfig(
        input_size=input_size,
        encoder_channels=tuple(model.encoder_channels),
        upsample_mode=model.upsample_mode,
        shift_fill=model.shift_fill,
        boundary=BOUNDARIES[model.boundary],
        decode_threshold=model.decode_threshold,
        loss_weights=LossWeights(bbce=lw.bbce, cbce=lw.cbce, output1=lw.output1),
        injection_gate=model.injection_gate,
        bn_epsilon=model.bn_epsilon)
    try:
        return cfg.validate()
    except ConfigError as exc:
        raise _malformed(str(exc)) from None


def _parse_mask(payload: str, what: str) -> np.ndarray:
    try:
        return mask_from_pgm(schemas.decode_b64(payload, what))
    except (FormatError, ValueError) as exc:
        raise _malformed(f"{what}: {exc}") from None


def _parse_tensor(payload: str, what: str) -> Tensor:
    try:
        return ntf_parse(schemas.decode_b64(payload, what))
    except (FormatError, ValueError, ShapeMismatch) as exc:
        raise _malformed(f"{what}: {exc}") from None


def _forward_image(req: schemas.ForwardRequest) -> Tensor:
    if req.image_ntf is not None:
        image = _parse_tensor(req.image_ntf, "image_ntf")
        if image.c != 3:
            raise _malformed(f"image tensor must have 3 channels, got {image.c}")
        return image
    planes = []
    for idx, payload in enumerate(req.image_pgm or ()):
        try:
            planes.append(gray_from_pgm(schemas.decode_b64(payload, "image_pgm")))
        except (FormatError, ValueError) as exc:
            raise _malformed(f"image_pgm[{idx}]: {exc}") from None
    if len({p.shape for p in planes}) != 1:
        raise _inconsistent("image planes have differing sizes")
    return Tensor(np.stack(planes)[np.newaxis], copy=False)


def _forward_network(req: schemas.ForwardRequest,
                     cfg: NetworkConfig) -> Network:
    if req.seed is not None:
        store = seeded_weights(cfg, req.seed)
    elif req.weights_dcfw is not None:
        try:
            store = store_parse(schemas.decode_b64(req.weights_dcfw, "weights_dcfw"))
        except FormatError as exc:
            raise _malformed(f"weights_dcfw: {exc}") from None
    else:
        try:
            store = load_weights(req.weights_path)
        except OSError as exc:
            raise _malformed(f"weights_path: {exc}") from None
        except FormatError as exc:
            raise _malformed(f"weights_path: {exc}") from None
    try:
        return build_network(cfg, store)
    except WeightMismatch as exc:
        raise _inconsistent(str(exc)) from None


def create_app() -> FastAPI:
    app = FastAPI(title="dcffsnet", version=__version__)

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.post("/connectivity/encode", response_model=schemas.TensorResponse)
    def encode(req: schemas.EncodeRequest):
        mask = _parse_mask(req.mask_pgm, "mask_pgm")
        tensor = encode_connectivity(mask, BOUNDARIES[req.boundary])
        return schemas.TensorResponse(tensor_ntf=schemas.encode_b64(ntf_bytes(tensor)),
                                      dims=tensor.dims)

    @app.post("/connectivity/decode", response_model=schemas.MaskResponse)
    def decode(req: schemas.DecodeRequest):
        tensor = _parse_tensor(req.tensor_ntf, "tensor_ntf")
        try:
            mask = decode_mask(tensor, req.threshold)
        except (ShapeMismatch, ValueError) as exc:
            raise _malformed(str(exc)) from None
        return schemas.MaskResponse(mask_pgm=schemas.encode_b64(pgm_bytes(mask)),
                                    foreground=int(mask.sum()))

    @app.post("/metrics", response_model=schemas.MetricsResponse)
    def metrics(req: schemas.MetricsRequest):
        pred = _parse_mask(req.pred_pgm, "pred_pgm")
        truth = _parse_mask(req.truth_pgm, "truth_pgm")
        try:
            report = dice_iou(pred, truth)
        except ShapeMismatch as exc:
            raise _inconsistent(str(exc)) from None
        return schemas.MetricsResponse(dice=report.dice, iou=report.iou)

    @app.post("/cost", response_model=schemas.CostResponse)
    def cost(req: schemas.CostRequest):
        cfg = _network_config(req.config, tuple(req.config.input_size))
        report = count_cost(cfg)
        return schemas.CostResponse(
            total_params=report.total_params,
            total_flops=report.total_flops,
            modules=[schemas.ModuleCostModel(name=m.name, params=m.params,
                                             flops=m.flops)
                     for m in report.modules])

    @app.post("/forward", response_model=schemas.ForwardResponse)
    def forward(req: schemas.ForwardRequest):
        image = _forward_image(req)
        size = req.config.input_size or (image.h, image.w)
        cfg = _network_config(req.config, tuple(size))
        if (image.h, image.w) != cfg.input_size:
            raise _inconsistent(
                f"image size {(image.h, image.w)} != configured "
                f"{cfg.input_size}")
        net = _forward_network(req, cfg)
        out = net.forward(image)
        mask = decode_mask(out.output2, cfg.decode_threshold)
        metrics_model = None
        if req.truth_pgm is not None:
            truth = _parse_mask(req.truth_pgm, "truth_pgm")
            if truth.shape != mask.shape:
                raise _inconsistent(
                    f"truth mask {truth.shape} != prediction {mask.shape}")
            report = dice_iou(mask, truth)
            metrics_model = schemas.MetricsResponse(dice=report.dice,
                                                    iou=report.iou)
        return schemas.ForwardResponse(
            output1_ntf=schemas.encode_b64(ntf_bytes(out.output1)),
            output2_ntf=schemas.encode_b64(ntf_bytes(out.output2)),
            mask_pgm=schemas.encode_b64(pgm_bytes(mask)),
            metrics=metrics_model)

    @app.post("/loss", response_model=schemas.LossResponse)
    def loss(req: schemas.LossRequest):
        o1 = _parse_tensor(req.output1_ntf, "output1_ntf")
        o2 = _parse_tensor(req.output2_ntf, "output2_ntf")
        truth = _parse_mask(req.truth_pgm, "truth_pgm")
        w = LossWeights(bbce=req.weights.bbce, cbce=req.weights.cbce,
                        output1=req.weights.output1)
        try:
            report = total_loss(NetworkOutput(output1=o1, output2=o2), truth,
                                w, BOUNDARIES[req.boundary])
        except (ShapeMismatch, ValueError) as exc:
            raise _inconsistent(str(exc)) from None
        def terms(t):
            return schemas.LossTermsModel(main_bce=t.main_bce, bbce=t.bbce,
                                          cbce=t.cbce, combined=t.combined)
        return schemas.LossResponse(output1=terms(report.output1),
                                    output2=terms(report.output2),
                                    total=report.total)

    return app


app = create_app()
