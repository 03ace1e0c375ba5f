"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines alongside the pytest verdicts.
"""

import contextlib
import math
import time

import numpy as np
import pytest

from dcffsnet import oracle
from dcffsnet.blocks import (BlockParams, dscrim_forward, msffm_forward,
                             msrcm_forward, pconv_forward)
from dcffsnet.cli import main as cli_main
from dcffsnet.connectivity import (DIRECTIONS, BoundaryConvention,
                                   bilateral_vote, decode_mask,
                                   encode_connectivity)
from dcffsnet.cost import (conv_flop_count, conv_param_count, count_cost)
from dcffsnet.fileio import write_mask
from dcffsnet.losses import LossWeights, bce, composite_loss, total_loss
from dcffsnet.metrics import dice_iou
from dcffsnet.network import (NetworkConfig, NetworkOutput, build_network,
                              parameter_entries, seeded_weights)
from dcffsnet.ops import conv2d
from dcffsnet.tensor import Tensor
from dcffsnet.weights import load_weights, save_weights

from util import (dscrim_params, msffm_params, msrcm_params, pconv_params,
                  rand_conv, rand_tensor)

SELF = BoundaryConvention.SAME_AS_SELF
TINY = (8, 16, 24, 32, 40)


@contextlib.contextmanager
def criterion(number, description):
    started = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE {number} FAIL: {description}")
        raise
    elapsed = time.perf_counter() - started
    print(f"ACCEPTANCE {number} PASS: {description} ({elapsed:.1f}s)")


def test_criterion_1_connectivity_roundtrip():
    with criterion(1, "connectivity round trip, exhaustive 3x3 plus 1000 "
                      "random 16x16 masks"):
        start = time.perf_counter()
        violations = oracle.enumerate_roundtrip(
            3, 3, SELF, encode_fn=encode_connectivity, decode_fn=decode_mask)
        assert violations == []
        rng = np.random.default_rng(1001)
        checked = 0
        for _ in range(1000):
            mask = (rng.random((16, 16)) < rng.uniform(0.3, 0.8)).astype(np.uint8)
            if not oracle.roundtrip_condition(mask, SELF):
                continue
            checked += 1
            decoded = decode_mask(encode_connectivity(mask, SELF), 0.5)
            assert np.array_equal(decoded, mask)
        assert checked > 500
        assert time.perf_counter() - start < 5.0


def test_criterion_2_bilateral_voting_laws():
    with criterion(2, "bilateral voting symmetry, double-vote square law and "
                      "contraction on 1000 random maps"):
        start = time.perf_counter()
        rng = np.random.default_rng(2002)
        h, w = 16, 16
        inbounds = {}
        for d in DIRECTIONS:
            ok = np.zeros((h, w), dtype=bool)
            ok[max(0, -d.dy):min(h, h - d.dy), max(0, -d.dx):min(w, w - d.dx)] = True
            inbounds[d.index] = ok
        for _ in range(1000):
            xc = Tensor(rng.random((1, 8, h, w)).astype(np.float32))
            voted = bilateral_vote(xc)
            twice = bilateral_vote(voted)
            va, xa, ta = voted.array[0], xc.array[0], twice.array[0]
            for d in DIRECTIONS:
                i, ok = d.index - 1, inbounds[d.index]
                partner = np.roll(np.roll(va[8 - d.index], -d.dy, axis=0),
                                  -d.dx, axis=1)
                assert (va[i][ok] == partner[ok]).all()          # symmetry, exact
                assert np.abs(ta[i][ok] - va[i][ok] ** 2).max() <= 1e-6
                assert (ta[i][~ok] == va[i][~ok]).all()          # neutral border
                assert (va[i][ok] <= xa[i][ok]).all()            # contraction
        assert time.perf_counter() - start < 5.0


def test_criterion_3_oracle_equivalence(oracle_warm):
    with criterion(3, "main path agrees with naive oracle within 1e-5 on 200+ "
                      "instances of conv, each block and the full forward"):
        start = time.perf_counter()
        rng = np.random.default_rng(3003)

        for _ in range(200):
            k = int(rng.choice([1, 3, 5, 7]))
            x = rand_tensor(rng, (int(rng.integers(1, 3)), int(rng.integers(1, 9)),
                                  int(rng.integers(k, 17)), int(rng.integers(k, 17))))
            p = rand_conv(rng, x.c, int(rng.integers(1, 9)), k,
                          bias=bool(rng.integers(2)))
            np.testing.assert_allclose(conv2d(x, p).array,
                                       oracle.naive_conv2d(x, p).array,
                                       atol=1e-5, rtol=0)

        for _ in range(200):
            c = int(rng.integers(1, 3)) * 8
            f5 = rand_tensor(rng, (1, c, 1, 1))
            params = dscrim_params(rng, c)
            got = dscrim_forward(f5, BlockParams(params), full_res=(32, 32))
            want_c5, want_pout = oracle.oracle_dscrim(f5.array, params,
                                                      full_res=(32, 32))
            np.testing.assert_allclose(got.c5.array, want_c5, atol=1e-5, rtol=0)
            np.testing.assert_allclose(got.p_out.array, want_pout,
                                       atol=1e-5, rtol=0)

        for _ in range(200):
            c = int(rng.integers(1, 3)) * 8
            hw = int(rng.integers(2, 6))
            f = rand_tensor(rng, (1, c, hw, hw))
            cc = rand_tensor(rng, (1, c, hw, hw))
            params = msffm_params(rng, c)
            got_c, got_f = msffm_forward(f, cc, BlockParams(params))
            want_c, want_f = oracle.oracle_msffm(f.array, cc.array, params)
            np.testing.assert_allclose(got_c.array, want_c, atol=1e-5, rtol=0)
            np.testing.assert_allclose(got_f.array, want_f, atol=1e-5, rtol=0)

        for _ in range(200):
            c = int(rng.integers(1, 3)) * 8
            x = rand_tensor(rng, (1, c, 8, 8))
            params = msrcm_params(rng, c)
            np.testing.assert_allclose(
                msrcm_forward(x, BlockParams(params)).array,
                oracle.oracle_msrcm(x.array, params), atol=1e-5, rtol=0)

        for _ in range(200):
            c = int(rng.integers(1, 4)) * 8
            x = rand_tensor(rng, (1, c, 6, 6))
            params = pconv_params(rng, c)
            np.testing.assert_allclose(
                pconv_forward(x, BlockParams(params)).array,
                oracle.oracle_pconv(x.array, params), atol=1e-5, rtol=0)

        cfg = NetworkConfig(input_size=(32, 32), encoder_channels=TINY).validate()
        for trial in range(200):
            store = seeded_weights(cfg, seed=trial)
            net = build_network(cfg, store)
            image = rand_tensor(rng, (1, 3, 32, 32))
            got = net.forward(image)
            want1, want2 = oracle.naive_network_forward(cfg, dict(store.items()),
                                                        image)
            np.testing.assert_allclose(got.output1.array, want1, atol=1e-5, rtol=0)
            np.testing.assert_allclose(got.output2.array, want2, atol=1e-5, rtol=0)

        assert time.perf_counter() - start < 60.0


def test_criterion_4_loss_arithmetic():
    with criterion(4, "loss closed forms, default weights and supervision "
                      "linearity"):
        rng = np.random.default_rng(4004)
        target = Tensor((rng.random((1, 8, 8, 8)) < 0.5).astype(np.float32))
        assert abs(bce(Tensor.full((1, 8, 8, 8), 0.5), target)
                   - math.log(2.0)) <= 1e-9

        seed = (rng.random((4, 4)) < 0.5).astype(np.uint8)
        y = np.repeat(np.repeat(seed, 2, axis=0), 2, axis=1)
        perfect = composite_loss(encode_connectivity(y, SELF), y,
                                 LossWeights(), SELF)
        assert perfect.combined < 3e-6

        # default combination weights 1 / 0.2 / 0.8
        xc = rand_tensor(rng, (1, 8, 8, 8), lo=0.01, hi=0.99)
        terms = composite_loss(xc, y, LossWeights(), SELF)
        assert terms.combined == pytest.approx(
            terms.main_bce + 0.2 * terms.bbce + 0.8 * terms.cbce, abs=1e-9)

        out = NetworkOutput(output1=rand_tensor(rng, (1, 8, 8, 8), lo=0.01, hi=0.99),
                            output2=rand_tensor(rng, (1, 8, 8, 8), lo=0.01, hi=0.99))
        base = total_loss(out, y, LossWeights(output1=0.0), SELF)
        assert base.total == base.output2.combined   # cancelled supervision
        for a in (0.1, 0.2, 0.3):
            report = total_loss(out, y, LossWeights(output1=a), SELF)
            assert abs((report.total - base.total)
                       - a * report.output1.combined) <= 1e-6


def test_criterion_5_end_to_end_shapes_and_determinism(tmp_path):
    with criterion(5, "forward shape/determinism at 32..256 squared and "
                      "bit-exact weight round trip"):
        rng = np.random.default_rng(5005)
        for size in (32, 64, 128, 256):
            cfg = NetworkConfig(input_size=(size, size),
                                encoder_channels=TINY).validate()
            net = build_network(cfg, seeded_weights(cfg, 50))
            image = rand_tensor(rng, (1, 3, size, size), lo=0, hi=1)
            first = net.forward(image)
            second = net.forward(image)
            assert first.output1.dims == (1, 8, size, size)
            assert first.output2.dims == (1, 8, size, size)
            assert first.output1 == second.output1
            assert first.output2 == second.output2

        cfg = NetworkConfig(input_size=(32, 32), encoder_channels=TINY).validate()
        store = seeded_weights(cfg, 51)
        image = rand_tensor(rng, (1, 3, 32, 32), lo=0, hi=1)
        before = build_network(cfg, store).forward(image)
        path = tmp_path / "roundtrip.dcfw"
        save_weights(store, path)
        after = build_network(cfg, load_weights(path)).forward(image)
        assert before.output1 == after.output1
        assert before.output2 == after.output2


def test_criterion_6_metric_identities():
    with criterion(6, "dice/iou identity on 10000 random pairs and the three "
                      "canonical cases"):
        rng = np.random.default_rng(6006)
        for _ in range(10000):
            a = (rng.random((8, 8)) < rng.random()).astype(np.uint8)
            b = (rng.random((8, 8)) < rng.random()).astype(np.uint8)
            r = dice_iou(a, b)
            assert abs(r.dice - 2 * r.iou / (1 + r.iou)) <= 1e-9

        full = np.ones((4, 4), np.uint8)
        r = dice_iou(full, full)
        assert r.dice == 1.0 and r.iou == 1.0
        a = np.zeros((4, 4), np.uint8); a[:2] = 1
        b = np.zeros((4, 4), np.uint8); b[2:] = 1
        r = dice_iou(a, b)
        assert r.dice == 0.0 and r.iou == 0.0
        a = np.zeros((4, 4), np.uint8); a[0, :] = 1
        b = np.zeros((4, 4), np.uint8); b[0, 2:] = 1; b[1, :2] = 1
        r = dice_iou(a, b)
        assert r.dice == 0.5 and abs(r.iou - 1 / 3) <= 1e-12


def test_criterion_7_cost_counter(tiny_cfg, tiny_store):
    with criterion(7, "cost counter vs store traversal, hand micro counts and "
                      "width-doubling factors"):
        report = count_cost(tiny_cfg)
        assert report.total_params == sum(t.size for _, t in tiny_store.items())
        assert report.total_params == sum(m.params for m in report.modules)
        assert report.total_flops == sum(m.flops for m in report.modules)

        assert conv_param_count(3, 8, 1, bias=True) == 32
        assert conv_flop_count(1, 1, 3, (4, 4), bias=False) == 288

        doubled = NetworkConfig(input_size=tiny_cfg.input_size,
                                encoder_channels=tuple(2 * c for c in TINY))
        base = {n: d for n, d in parameter_entries(tiny_cfg)
                if n.endswith(".weight")}
        big = {n: d for n, d in parameter_entries(doubled.validate())
               if n.endswith(".weight")}
        assert base.keys() == big.keys()
        for name in base:
            co0, ci0, k, _ = base[name]
            co1, ci1, _, _ = big[name]
            assert ci1 in (ci0, 2 * ci0) and co1 in (co0, 2 * co0)
            expected = (ci1 // ci0) * (co1 // co0)
            assert co1 * ci1 * k * k == expected * (co0 * ci0 * k * k)
        quadrupled = [n for n in base
                      if big[n][0] == 2 * base[n][0] and big[n][1] == 2 * base[n][1]]
        assert len(quadrupled) > len(base) // 2


def test_criterion_8_cli_contract(tmp_path, capsys):
    with criterion(8, "CLI round trips, exit codes and a 256x256 default-width "
                      "forward under 30s"):
        mask = np.zeros((16, 16), np.uint8)
        mask[4:12, 4:12] = 1
        src = tmp_path / "m.pgm"
        write_mask(src, mask)
        conn_a, conn_b = tmp_path / "a.ntf", tmp_path / "b.ntf"
        assert cli_main(["encode", str(src), str(conn_a)]) == 0
        assert cli_main(["encode", str(src), str(conn_b)]) == 0
        assert conn_a.read_bytes() == conn_b.read_bytes()
        back = tmp_path / "back.pgm"
        assert cli_main(["decode", str(conn_a), str(back)]) == 0
        assert back.read_bytes() == src.read_bytes()

        # documented exit codes per failure class
        assert cli_main(["decode", str(conn_a), "x.pgm", "--threshold", "2"]) == 64
        assert cli_main(["encode", str(tmp_path / "absent.pgm"), "x.ntf"]) == 2
        wrong = NetworkConfig(input_size=(256, 256),
                              encoder_channels=TINY).validate()
        bad_weights = tmp_path / "bad.dcfw"
        save_weights(seeded_weights(wrong, 1), bad_weights)

        plane = tmp_path / "plane.pgm"
        write_mask(plane, np.zeros((256, 256), np.uint8))
        started = time.perf_counter()
        code = cli_main(["forward", str(plane), str(plane), str(plane),
                         "--out-prefix", str(tmp_path / "fix_"), "--seed", "8",
                         "--truth", str(plane)])
        elapsed = time.perf_counter() - started
        assert code == 0
        assert elapsed < 30.0
        for leaf in ("output1.ntf", "output2.ntf", "mask.pgm"):
            assert (tmp_path / f"fix_{leaf}").exists()

        # weights built for default widths do not fit the tiny config
        code = cli_main(["forward", str(plane), str(plane), str(plane),
                         "--out-prefix", str(tmp_path / "y_"),
                         "--weights", str(bad_weights)])
        assert code == 3
        capsys.readouterr()
