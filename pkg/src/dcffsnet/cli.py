"""Command-line client for the segmentation service.

Subcommands mirror the HTTP endpoints; by default requests run against an
in-process app instance, so no server needs to be running. Point ``--server``
at a live instance to drive a remote one instead (binary payloads are then
uploaded inline).

Exit codes: 0 success, 2 malformed input, 3 consistency error, 64 usage error.
"""

from __future__ import annotations

import argparse
import asyncio
import base64
import json
import os
import sys

import httpx
from pydantic import ValidationError

from .service.schemas import NetworkConfigModel

EXIT_OK = 0
EXIT_MALFORMED = 2
EXIT_INCONSISTENT = 3
EXIT_USAGE = 64

_STATUS_EXIT = {400: EXIT_MALFORMED, 409: EXIT_INCONSISTENT, 422: EXIT_USAGE}


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _unit_interval(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1): {value}")
    return value


def _read_file(path) -> bytes:
    try:
        with open(path, "rb") as fh:
            return fh.read()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}", EXIT_MALFORMED) from None


def _write_file(path, data: bytes) -> None:
    try:
        with open(path, "wb") as fh:
            fh.write(data)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}", EXIT_INCONSISTENT) from None


def _b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def _load_config(path) -> NetworkConfigModel:
    raw = _read_file(path)
    try:
        return NetworkConfigModel.model_validate(json.loads(raw))
    except (json.JSONDecodeError, ValidationError) as exc:
        raise CliError(f"bad config {path}: {exc}", EXIT_MALFORMED) from None


class ServiceClient:
    """Thin async wrapper: either an in-process ASGI app or a remote server."""

    def __init__(self, server: str | None):
        if server:
            self._client = httpx.AsyncClient(base_url=server, timeout=300.0)
            self.remote = True
        else:
            from .service import create_app
            transport = httpx.ASGITransport(app=create_app())
            self._client = httpx.AsyncClient(transport=transport,
                                             base_url="http://dcffsnet")
            self.remote = False

    async def post(self, path: str, payload: dict) -> dict:
        try:
            resp = await self._client.post(path, json=payload)
        except httpx.HTTPError as exc:
            raise CliError(f"request to {path} failed: {exc}", 1) from None
        if resp.status_code != 200:
            raise CliError(_error_message(resp),
                           _STATUS_EXIT.get(resp.status_code, 1))
        return resp.json()

    async def aclose(self):
        await self._client.aclose()


def _error_message(resp: httpx.Response) -> str:
    try:
        detail = resp.json().get("detail")
    except ValueError:
        detail = None
    if isinstance(detail, dict) and "message" in detail:
        return str(detail["message"])
    return f"HTTP {resp.status_code}: {detail}"


async def _cmd_encode(client: ServiceClient, args) -> int:
    body = {"mask_pgm": _b64(_read_file(args.input)), "boundary": args.boundary}
    reply = await client.post("/connectivity/encode", body)
    _write_file(args.output, base64.b64decode(reply["tensor_ntf"]))
    return EXIT_OK


async def _cmd_decode(client: ServiceClient, args) -> int:
    body = {"tensor_ntf": _b64(_read_file(args.input)),
            "threshold": args.threshold}
    reply = await client.post("/connectivity/decode", body)
    _write_file(args.output, base64.b64decode(reply["mask_pgm"]))
    return EXIT_OK


async def _cmd_metrics(client: ServiceClient, args) -> int:
    body = {"pred_pgm": _b64(_read_file(args.pred)),
            "truth_pgm": _b64(_read_file(args.truth))}
    reply = await client.post("/metrics", body)
    print(f"dice={reply['dice']:.6f} iou={reply['iou']:.6f}")
    return EXIT_OK


async def _cmd_cost(client: ServiceClient, args) -> int:
    config = _load_config(args.config)
    if config.input_size is None:
        raise CliError(f"config {args.config} must set input_size",
                       EXIT_MALFORMED)
    reply = await client.post("/cost", {"config": config.model_dump()})
    for module in reply["modules"]:
        print(f"{module['name']} params={module['params']} flops={module['flops']}")
    print(f"total_params={reply['total_params']} total_flops={reply['total_flops']}")
    return EXIT_OK


async def _cmd_forward(client: ServiceClient, args) -> int:
    body: dict = {}
    if len(args.image) == 1 and args.image[0].endswith(".ntf"):
        body["image_ntf"] = _b64(_read_file(args.image[0]))
    elif len(args.image) == 3:
        body["image_pgm"] = [_b64(_read_file(p)) for p in args.image]
    else:
        raise CliError("pass one .ntf tensor or three grayscale PGM planes, "
                       f"got {len(args.image)} file(s)", EXIT_USAGE)

    if args.weights is not None:
        # read up front so local and remote modes fail alike on a bad file
        data = _read_file(args.weights)
        if client.remote:
            body["weights_dcfw"] = _b64(data)
        else:
            body["weights_path"] = os.path.abspath(args.weights)
    else:
        body["seed"] = args.seed

    if args.config is not None:
        body["config"] = _load_config(args.config).model_dump()
    if args.truth is not None:
        body["truth_pgm"] = _b64(_read_file(args.truth))

    reply = await client.post("/forward", body)
    prefix = args.out_prefix
    _write_file(prefix + "output1.ntf", base64.b64decode(reply["output1_ntf"]))
    _write_file(prefix + "output2.ntf", base64.b64decode(reply["output2_ntf"]))
    _write_file(prefix + "mask.pgm", base64.b64decode(reply["mask_pgm"]))
    if reply.get("metrics") is not None:
        m = reply["metrics"]
        print(f"dice={m['dice']:.6f} iou={m['iou']:.6f}")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="dcffsnet",
                     description="connectivity-mask segmentation pipeline client")
    parser.add_argument("--server", default=None,
                        help="base URL of a running service; default runs the "
                             "app in-process")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", help="binary PGM mask -> 8-channel NTF tensor")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--boundary", choices=("classic", "self"), default="self")
    p.set_defaults(run=_cmd_encode)

    p = sub.add_parser("decode", help="8-channel NTF tensor -> binary PGM mask")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--threshold", type=_unit_interval, default=0.5)
    p.set_defaults(run=_cmd_decode)

    p = sub.add_parser("forward", help="run the network on an image")
    p.add_argument("image", nargs="+",
                   help="one .ntf tensor or three grayscale PGM planes")
    p.add_argument("--out-prefix", required=True,
                   help="prefix for output1.ntf, output2.ntf and mask.pgm")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--weights", help="DCFW weight file")
    group.add_argument("--seed", type=int, help="generate seeded random weights")
    p.add_argument("--config", help="JSON network config")
    p.add_argument("--truth", help="ground-truth PGM; prints a metrics line")
    p.set_defaults(run=_cmd_forward)

    p = sub.add_parser("metrics", help="dice/iou between two PGM masks")
    p.add_argument("pred")
    p.add_argument("truth")
    p.set_defaults(run=_cmd_metrics)

    p = sub.add_parser("cost", help="parameter/FLOP report for a config")
    p.add_argument("--config", required=True)
    p.set_defaults(run=_cmd_cost)

    return parser


async def _run(args) -> int:
    client = ServiceClient(args.server)
    try:
        return await args.run(client, args)
    finally:
        await client.aclose()


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return asyncio.run(_run(args))
    except CliError as exc:
        print(f"dcffsnet: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
