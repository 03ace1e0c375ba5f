"""Connectivity encoding, bilateral voting, aggregation and decoding."""

import numpy as np
import pytest

from dcffsnet import oracle
from dcffsnet.connectivity import (DIRECTIONS, BoundaryConvention,
                                   bilateral_vote, decode_mask,
                                   encode_connectivity, opposite,
                                   rca_aggregate, shift)
from dcffsnet.errors import ShapeMismatch
from dcffsnet.tensor import Tensor

from util import rand_tensor

SELF = BoundaryConvention.SAME_AS_SELF
CLASSIC = BoundaryConvention.CLASSIC_ZERO


def rand_connectivity(rng, h=16, w=16, n=1):
    return rand_tensor(rng, (n, 8, h, w), lo=0.0, hi=1.0)


def test_direction_table():
    offsets = [d.offset for d in DIRECTIONS]
    assert offsets == [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1),
                       (1, -1), (1, 0), (1, 1)]
    for d in DIRECTIONS:
        opp = opposite(d)
        assert opp.index == 9 - d.index
        assert (opp.dy, opp.dx) == (-d.dy, -d.dx)


def test_encode_single_pixel_conventions():
    xc = encode_connectivity(np.array([[1]], dtype=np.uint8), SELF)
    np.testing.assert_array_equal(xc.array, np.ones((1, 8, 1, 1), np.float32))
    xc = encode_connectivity(np.array([[1]], dtype=np.uint8), CLASSIC)
    np.testing.assert_array_equal(xc.array, np.zeros((1, 8, 1, 1), np.float32))


def test_encode_2x2_corner_channels_classic():
    xc = encode_connectivity(np.ones((2, 2), dtype=np.uint8), CLASSIC).array
    at_origin = xc[0, :, 0, 0]
    for channel in (5, 7, 8):          # right, down, down-right stay in bounds
        assert at_origin[channel - 1] == 1.0
    for channel in (1, 2, 3, 4, 6):
        assert at_origin[channel - 1] == 0.0


def test_encode_rejects_nonbinary():
    with pytest.raises(ValueError):
        encode_connectivity(np.array([[0, 2]], dtype=np.uint8), SELF)
    with pytest.raises(ShapeMismatch):
        encode_connectivity(np.zeros((2, 2, 2), dtype=np.uint8), SELF)


def test_encode_matches_naive(rng, oracle_warm):
    for conv in (SELF, CLASSIC):
        for _ in range(20):
            mask = (rng.random((6, 7)) < 0.5).astype(np.uint8)
            got = encode_connectivity(mask, conv).array
            np.testing.assert_array_equal(got, oracle.naive_encode(mask, conv))
            assert set(np.unique(got)).issubset({0.0, 1.0})


def test_encode_self_dominates_classic(rng):
    for _ in range(20):
        mask = (rng.random((8, 8)) < 0.5).astype(np.uint8)
        a = encode_connectivity(mask, SELF).array
        b = encode_connectivity(mask, CLASSIC).array
        assert (a >= b).all()


def test_shift_row_by_right_neighbor():
    x = Tensor.from_flat((1, 1, 1, 2), [3.0, 7.0])
    out = shift(x, DIRECTIONS[4], "zero")  # direction 5 = (0, +1)
    np.testing.assert_array_equal(out.array.reshape(-1), [7.0, 0.0])


def test_shift_constant_replicate():
    x = Tensor.full((1, 2, 3, 3), 2.5)
    for d in DIRECTIONS:
        assert shift(x, d, "replicate") == x


def test_shift_roundtrip_interior(rng):
    x = rand_tensor(rng, (1, 2, 5, 5))
    for d in DIRECTIONS:
        back = shift(shift(x, d, "zero"), opposite(d), "zero")
        # interior pixels whose round trip stays in bounds are untouched
        np.testing.assert_array_equal(back.array[:, :, 1:-1, 1:-1],
                                      x.array[:, :, 1:-1, 1:-1])


def test_shift_matches_naive(rng, oracle_warm):
    x = rand_tensor(rng, (2, 3, 5, 6))
    for d in DIRECTIONS:
        for fill in ("zero", "replicate"):
            np.testing.assert_array_equal(
                shift(x, d, fill).array,
                oracle.naive_shift(x.array, d.dy, d.dx, fill))
    with pytest.raises(ValueError):
        shift(x, DIRECTIONS[0], "wrap")


def test_bilateral_vote_zeros():
    z = Tensor.zeros((1, 8, 4, 4))
    assert bilateral_vote(z) == z


def test_bilateral_vote_fixed_point_on_full_mask():
    xc = encode_connectivity(np.ones((3, 3), dtype=np.uint8), SELF)
    assert bilateral_vote(xc) == xc


def test_bilateral_vote_pair_product():
    a, b = 0.7, 0.4
    x = np.zeros((1, 8, 3, 3), dtype=np.float32)
    x[0, 4, 1, 1] = a          # channel 5 at (1,1), offset (0,+1)
    x[0, 3, 1, 2] = b          # channel 4 at (1,2), its partner
    out = bilateral_vote(Tensor(x)).array
    expect = np.float32(a) * np.float32(b)
    assert out[0, 4, 1, 1] == expect
    assert out[0, 3, 1, 2] == expect


def test_bilateral_vote_neutral_border():
    x = np.zeros((1, 8, 2, 2), dtype=np.float32)
    x[0, 0, 0, 0] = 0.6        # channel 1 points out of bounds at the corner
    out = bilateral_vote(Tensor(x)).array
    assert out[0, 0, 0, 0] == np.float32(0.6)


def test_bilateral_vote_matches_naive(rng, oracle_warm):
    for _ in range(10):
        xc = rand_connectivity(rng, 6, 5)
        np.testing.assert_array_equal(bilateral_vote(xc).array,
                                      oracle.naive_bilateral_vote(xc.array))


def in_bounds_partner(h, w, d):
    """Boolean (h, w) map of positions whose d-neighbor is inside the image."""
    ok = np.zeros((h, w), dtype=bool)
    ys = slice(max(0, -d.dy), min(h, h - d.dy))
    xs = slice(max(0, -d.dx), min(w, w - d.dx))
    ok[ys, xs] = True
    return ok


def test_bilateral_vote_laws(rng):
    for _ in range(50):
        xc = rand_connectivity(rng, 12, 9)
        voted = bilateral_vote(xc)
        twice = bilateral_vote(voted)
        va, xa = voted.array, xc.array
        for d in DIRECTIONS:
            ok = in_bounds_partner(12, 9, d)
            i = d.index - 1
            # symmetry: each in-bounds pair carries the same product
            partner = np.roll(np.roll(va[0, 8 - d.index], -d.dy, axis=0),
                              -d.dx, axis=1)
            np.testing.assert_array_equal(va[0, i][ok], partner[ok])
            # contraction, with equality at neutral-partner positions
            assert (va[0, i] <= xa[0, i]).all()
            np.testing.assert_array_equal(va[0, i][~ok], xa[0, i][~ok])
            # voting twice squares in-bounds values and fixes border values
            np.testing.assert_allclose(twice.array[0, i][ok],
                                       (va[0, i] ** 2)[ok], atol=1e-6)
            np.testing.assert_array_equal(twice.array[0, i][~ok], va[0, i][~ok])


def test_bilateral_vote_idempotent_on_binary(rng):
    mask = (rng.random((7, 7)) < 0.5).astype(np.uint8)
    xc = encode_connectivity(mask, SELF)
    assert bilateral_vote(bilateral_vote(xc)) == bilateral_vote(xc)


def test_rca_trivials():
    assert rca_aggregate(Tensor.full((1, 8, 3, 3), 0.5)) \
        == Tensor.full((1, 1, 3, 3), 0.5)
    ramp = Tensor.from_flat((1, 8, 1, 1), [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8])
    assert rca_aggregate(ramp).array[0, 0, 0, 0] == np.float32(0.8)


def test_rca_matches_naive_bitexact(rng, oracle_warm):
    for _ in range(10):
        xb = rand_connectivity(rng, 5, 6)
        np.testing.assert_array_equal(rca_aggregate(xb).array,
                                      oracle.naive_rca(xb.array))


def test_decode_validation(rng):
    xc = rand_connectivity(rng, 3, 3)
    for bad in (0.0, 1.0, -0.2, 1.5):
        with pytest.raises(ValueError):
            decode_mask(xc, bad)
    with pytest.raises(ShapeMismatch):
        decode_mask(rand_tensor(rng, (1, 4, 3, 3), lo=0, hi=1), 0.5)
    with pytest.raises(ShapeMismatch):
        decode_mask(rand_tensor(rng, (2, 8, 3, 3), lo=0, hi=1), 0.5)


def test_decode_all_zero():
    assert decode_mask(Tensor.zeros((1, 8, 4, 4)), 0.5).sum() == 0


def test_decode_uniform_0p6_keeps_only_border():
    """Interior channels vote 0.36 < 0.5; border channels keep their neutral
    0.6 and survive, so exactly the border ring decodes as foreground."""
    out = decode_mask(Tensor.full((1, 8, 3, 3), 0.6), 0.5)
    expect = np.ones((3, 3), dtype=np.uint8)
    expect[1, 1] = 0
    np.testing.assert_array_equal(out, expect)
    np.testing.assert_array_equal(
        out, oracle.naive_decode(np.full((1, 8, 3, 3), 0.6, np.float32), 0.5))


def test_exhaustive_roundtrip_3x3_main_path():
    for conv in (SELF, CLASSIC):
        violations = oracle.enumerate_roundtrip(
            3, 3, conv, encode_fn=encode_connectivity, decode_fn=decode_mask)
        assert violations == []


def test_enumerate_roundtrip_guard():
    with pytest.raises(ValueError):
        oracle.enumerate_roundtrip(4, 3)


def test_known_non_roundtrip_case():
    lone = np.array([[1]], dtype=np.uint8)
    assert not oracle.roundtrip_condition(lone, CLASSIC)
    assert oracle.roundtrip_condition(lone, SELF)
    decoded = decode_mask(encode_connectivity(lone, CLASSIC), 0.5)
    assert decoded[0, 0] == 0  # the isolated pixel is lost under classic_zero


def test_2x2_full_mask_roundtrips_both_conventions():
    mask = np.ones((2, 2), dtype=np.uint8)
    for conv in (SELF, CLASSIC):
        assert oracle.roundtrip_condition(mask, conv)
        np.testing.assert_array_equal(
            decode_mask(encode_connectivity(mask, conv), 0.5), mask)


def test_random_16x16_roundtrips(rng):
    hits = 0
    for _ in range(100):
        mask = (rng.random((16, 16)) < 0.55).astype(np.uint8)
        if not oracle.roundtrip_condition(mask, SELF):
            continue
        hits += 1
        np.testing.assert_array_equal(
            decode_mask(encode_connectivity(mask, SELF), 0.5), mask)
    assert hits > 50
