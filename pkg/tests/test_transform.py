import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dkf.transform import (
    OpCounter,
    apply_lapping,
    fdct,
    fdct64_lowband,
    haar_dc_forward,
    haar_dc_inverse,
    idct,
    postfilter_edge,
    prefilter_edge,
)


def naive_dct2(block):
    """Quadruple-loop orthonormal type-II DCT, the brute-force oracle."""
    n = block.shape[0]
    out = np.zeros((n, n))
    for u in range(n):
        for v in range(n):
            acc = 0.0
            for y in range(n):
                for x in range(n):
                    acc += (
                        block[y, x]
                        * np.cos(np.pi * u * (2 * y + 1) / (2 * n))
                        * np.cos(np.pi * v * (2 * x + 1) / (2 * n))
                    )
            cu = np.sqrt(1 / n) if u == 0 else np.sqrt(2 / n)
            cv = np.sqrt(1 / n) if v == 0 else np.sqrt(2 / n)
            out[u, v] = acc * cu * cv
    return out


def random_leaf_tiling(rng, size, top=64):
    """Random quadtree tiling of a size x size plane, leaves 4..top."""

    def split(x, y, n):
        if n > top or (n > 4 and rng.random() < 0.5):
            half = n // 2
            return (
                split(x, y, half)
                + split(x + half, y, half)
                + split(x, y + half, half)
                + split(x + half, y + half, half)
            )
        return [(x, y, n)]

    leaves = []
    for by in range(0, size, 64):
        for bx in range(0, size, 64):
            leaves.extend(split(bx, by, 64))
    return leaves


# -- DCT -------------------------------------------------------------------


def test_constant_block_is_pure_dc():
    c = fdct(np.ones((4, 4)))
    assert c[0, 0] == pytest.approx(4.0, abs=1e-12)
    ac = c.copy()
    ac[0, 0] = 0
    assert np.max(np.abs(ac)) < 1e-12


def test_dct_matches_naive_reference():
    rng = np.random.default_rng(0)
    block = rng.integers(0, 256, size=(8, 8)).astype(np.float64)
    assert np.max(np.abs(fdct(block) - naive_dct2(block))) <= 1e-3


@pytest.mark.parametrize("n", [4, 8, 16, 32, 64])
def test_dct_round_trip_and_parseval(n):
    rng = np.random.default_rng(n)
    block = rng.integers(0, 256, size=(n, n)).astype(np.float64)
    coeffs = fdct(block)
    assert np.max(np.abs(idct(coeffs) - block)) <= 0.5
    energy_in = float(np.sum(block * block))
    energy_out = float(np.sum(coeffs * coeffs))
    assert abs(energy_out - energy_in) <= 1e-6 * energy_in


def test_dct_rejects_bad_sizes():
    with pytest.raises(ValueError):
        fdct(np.zeros((5, 5)))
    with pytest.raises(ValueError):
        idct(np.zeros((3, 7)))


# -- reduced 64-point transform ---------------------------------------------


def test_lowband64_constant_matches_full():
    block = np.full((64, 64), 9.0)
    full = fdct(block)
    low = fdct64_lowband(block)
    assert low[0, 0] == pytest.approx(full[0, 0], abs=1e-9)
    assert np.max(np.abs(low - full)) < 1e-9  # constant has no AC anywhere


def test_lowband64_matches_truncated_full():
    rng = np.random.default_rng(1)
    block = rng.integers(0, 256, size=(64, 64)).astype(np.float64)
    full = fdct(block)
    full[32:, :] = 0.0
    full[:, 32:] = 0.0
    assert np.max(np.abs(fdct64_lowband(block) - full)) <= 1e-3


def test_lowband64_uses_fewer_ops():
    block = np.zeros((64, 64))
    c_full, c_low = OpCounter(), OpCounter()
    fdct(block, counter=c_full)
    fdct64_lowband(block, counter=c_low)
    assert c_low.total < c_full.total
    assert c_low.mults < c_full.mults


# -- lapping ----------------------------------------------------------------


def test_prefilter_constant_is_identity():
    assert list(prefilter_edge([7, 7, 7, 7])) == [7, 7, 7, 7]
    assert list(postfilter_edge([7, 7, 7, 7])) == [7, 7, 7, 7]


def test_prefilter_round_trip_exhaustive_one_axis():
    others = (31, 200, 117)
    vecs = np.array([[k, *others] for k in range(256)])
    assert np.array_equal(postfilter_edge(prefilter_edge(vecs)), vecs)


@given(st.lists(st.integers(min_value=-1024, max_value=1024), min_size=4, max_size=4))
@settings(max_examples=500, deadline=None)
def test_prefilter_round_trip_random(v):
    assert list(postfilter_edge(prefilter_edge(v))) == v


def test_prefilter_compacts_ramp_energy():
    # the boundary filter moves ramp energy into the blocks' DC basis
    for slope in (1, 3, 16, 64):
        signal = (np.arange(16) * slope).astype(np.int64)
        filtered = signal.copy()
        filtered[6:10] = prefilter_edge(filtered[6:10])
        for blk in (slice(0, 8), slice(8, 16)):
            before = fdct(np.tile(signal[blk], (8, 1)).astype(float))
            after = fdct(np.tile(filtered[blk], (8, 1)).astype(float))
            ac_before = np.sum(before**2) - before[0, 0] ** 2
            ac_after = np.sum(after**2) - after[0, 0] ** 2
            assert ac_after <= ac_before


def test_apply_lapping_round_trip_random_tiling():
    rng = np.random.default_rng(42)
    plane = rng.integers(0, 256, size=(128, 128)).astype(np.int64)
    leaves = random_leaf_tiling(rng, 128)
    lapped = apply_lapping(plane, leaves)
    assert not np.array_equal(lapped, plane)
    back = apply_lapping(lapped, leaves, inverse=True)
    assert np.array_equal(back, plane)


def test_apply_lapping_constant_plane_unchanged():
    plane = np.full((64, 64), 128, dtype=np.int64)
    leaves = [(x, y, 16) for y in range(0, 64, 16) for x in range(0, 64, 16)]
    assert np.array_equal(apply_lapping(plane, leaves), plane)


def test_apply_lapping_single_block_identity():
    plane = np.arange(16).reshape(4, 4).astype(np.int64)
    assert np.array_equal(apply_lapping(plane, [(0, 0, 4)]), plane)


def test_apply_lapping_rejects_bad_geometry():
    with pytest.raises(ValueError):
        apply_lapping(np.zeros((6, 6)), [(0, 0, 4)])
    with pytest.raises(ValueError):
        apply_lapping(np.zeros((8, 8)), [(0, 0, 16)])


def test_full_chain_reconstructs_within_one_lsb():
    rng = np.random.default_rng(7)
    plane = rng.integers(0, 256, size=(128, 64)).astype(np.int64)
    leaves = random_leaf_tiling(rng, 64)
    leaves = [(x, y, s) for (x, y, s) in leaves if x < 64 and y < 128]
    # tile both superblock rows
    leaves = random_leaf_tiling(rng, 64) + [
        (x, y + 64, s) for (x, y, s) in random_leaf_tiling(rng, 64)
    ]
    lapped = apply_lapping(plane, leaves)
    recon = np.empty_like(lapped)
    for x, y, size in leaves:
        block = lapped[y : y + size, x : x + size].astype(np.float64)
        recon[y : y + size, x : x + size] = np.round(idct(fdct(block))).astype(np.int64)
    out = apply_lapping(recon, leaves, inverse=True)
    assert np.max(np.abs(out - plane)) <= 1


# -- Haar DC -----------------------------------------------------------------


@pytest.mark.parametrize(
    "quad,want",
    [
        ((1, 1, 1, 1), (2, 0, 0, 0)),
        ((4, 0, 0, 0), (2, 2, 2, 2)),
    ],
)
def test_haar_hand_values(quad, want):
    assert haar_dc_forward(*quad) == want


def test_haar_exhaustive_small_range():
    for a in range(-4, 5):
        for b in range(-4, 5):
            for c in range(-4, 5):
                for d in range(-4, 5):
                    assert haar_dc_inverse(*haar_dc_forward(a, b, c, d)) == (a, b, c, d)


@given(st.tuples(*[st.integers(min_value=-(2**20), max_value=2**20)] * 4))
@settings(max_examples=500, deadline=None)
def test_haar_round_trip_random(quad):
    assert haar_dc_inverse(*haar_dc_forward(*quad)) == quad


def test_haar_close_to_orthonormal():
    rng = np.random.default_rng(3)
    for _ in range(200):
        a, b, c, d = rng.integers(-1000, 1000, size=4).tolist()
        got = haar_dc_forward(a, b, c, d)
        want = (
            (a + b + c + d) / 2,
            (a - b + c - d) / 2,
            (a + b - c - d) / 2,
            (a - b - c + d) / 2,
        )
        assert max(abs(g - w) for g, w in zip(got, want)) <= 1.0


def test_haar_recursion_three_levels_invertible():
    # 8x8 grid of leaf DCs combined up to one 64x64 superblock root
    rng = np.random.default_rng(11)
    grid = rng.integers(-(2**16), 2**16, size=(8, 8)).tolist()

    def forward(vals):
        n = len(vals)
        if n == 1:
            return vals[0][0], []
        half = n // 2
        details = []
        parents = [[0] * half for _ in range(half)]
        for j in range(half):
            for i in range(half):
                a, b = vals[2 * j][2 * i], vals[2 * j][2 * i + 1]
                c, d = vals[2 * j + 1][2 * i], vals[2 * j + 1][2 * i + 1]
                dc, h, v, dg = haar_dc_forward(a, b, c, d)
                parents[j][i] = dc
                details.append((h, v, dg))
        root, upper = forward(parents)
        return root, upper + details

    def inverse(root, details, n):
        if n == 1:
            return [[root]]
        half = n // 2
        own = details[len(details) - half * half :]
        parents = inverse(root, details[: len(details) - half * half], half)
        vals = [[0] * n for _ in range(n)]
        k = 0
        for j in range(half):
            for i in range(half):
                a, b, c, d = haar_dc_inverse(parents[j][i], *own[k])
                k += 1
                vals[2 * j][2 * i], vals[2 * j][2 * i + 1] = a, b
                vals[2 * j + 1][2 * i], vals[2 * j + 1][2 * i + 1] = c, d
        return vals

    root, details = forward(grid)
    assert inverse(root, details, 8) == grid
