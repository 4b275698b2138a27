import numpy as np
import pytest

from dkf.dering import (
    DIRECTION_LINES,
    DIRECTION_TAPS,
    NORM,
    STAGE1_WEIGHTS,
    STAGE2_WEIGHTS,
    crf_line,
    dering_frame,
    dering_plane,
    direction_field,
    find_direction,
    replace,
    threshold_for_quantizer,
)


def ringing_fixture(amplitude=4, seed=0):
    """Vertical step edge with oscillatory error along it, plus clean copy."""
    clean = np.zeros((64, 64), dtype=np.int64)
    clean[:, 32:] = 120
    clean += 60
    rng = np.random.default_rng(seed)
    noisy = clean.copy()
    xs = np.arange(64)
    ripple = (amplitude * np.cos(np.pi * (xs - 32) / 2)).astype(np.int64)
    decay = np.clip(8 - np.abs(xs - 32), 0, 8) / 8.0
    noisy += (ripple * decay).astype(np.int64)[None, :]
    return clean, noisy


# -- replace and crf_line -----------------------------------------------------


def test_replace_threshold_strict():
    assert replace(4, 5) == 4
    assert replace(-7, 5) == 0
    assert replace(5, 5) == 0  # strict inequality
    assert replace(-5, 5) == 0
    assert replace(0, 1) == 0


def test_crf_line_constant_unchanged():
    assert crf_line([9] * 7, 4) == 9


def test_crf_line_all_neighbours_excluded():
    assert crf_line([100, 100, 100, 10, 100, 100, 100], 10) == 10


def test_crf_line_hand_example():
    assert crf_line([18, 16, 10, 10, 10, 10, 10], 10) == 12


def test_crf_line_matches_linear_fir_with_huge_threshold():
    rng = np.random.default_rng(0)
    for _ in range(200):
        taps = rng.integers(0, 256, size=7).tolist()
        centre = taps[3]
        acc = sum(
            w * (taps[3 + s * d] - centre)
            for d, w in enumerate(STAGE1_WEIGHTS, start=1)
            for s in (1, -1)
        )
        linear = centre + ((acc + NORM // 2) >> 4)
        assert crf_line(taps, 10**9) == linear


def test_crf_line_bounded_by_threshold():
    rng = np.random.default_rng(1)
    for _ in range(300):
        taps = rng.integers(0, 256, size=7).tolist()
        t = int(rng.integers(1, 64))
        y = crf_line(taps, t)
        assert abs(y - taps[3]) <= t


def test_weights_have_unit_dc_response():
    assert 2 * sum(STAGE1_WEIGHTS) == NORM
    assert 2 * sum(STAGE2_WEIGHTS) == NORM


# -- direction search ---------------------------------------------------------


def test_direction_tables_cover_block():
    for d in range(8):
        ids = np.asarray(DIRECTION_LINES[d])
        assert ids.shape == (8, 8)
        assert ids.min() == 0
        # every line hit by at least one pixel
        assert set(np.unique(ids)) == set(range(ids.max() + 1))


def test_direction_taps_are_along_direction():
    # distance-1 tap should step roughly one pixel; distance-3 roughly three
    for d in range(8):
        for i, (dx, dy) in enumerate(DIRECTION_TAPS[d], start=1):
            assert max(abs(dx), abs(dy)) == i


def test_constant_block_ties_to_zero():
    d, score = find_direction(np.full((8, 8), 7))
    assert d == 0
    assert score == 0.0


def test_horizontal_stripes():
    block = np.repeat(np.arange(8)[:, None] * 10, 8, axis=1)
    d, score = find_direction(block)
    assert d == 0
    assert score > 0


def test_vertical_stripes():
    block = np.repeat(np.arange(8)[None, :] * 10, 8, axis=0)
    assert find_direction(block)[0] == 4


def test_diagonal_stripes():
    # constant along (1, 1): value depends only on y - x
    y, x = np.mgrid[0:8, 0:8]
    block = ((y - x) % 4) * 20
    assert find_direction(block)[0] == 2
    block_anti = ((y + x) % 4) * 20
    assert find_direction(block_anti)[0] == 6


def test_direction_by_brute_force_variance():
    rng = np.random.default_rng(2)
    for _ in range(50):
        block = rng.integers(0, 256, size=(8, 8))
        d, _ = find_direction(block)
        variances = []
        for k in range(8):
            ids = np.asarray(DIRECTION_LINES[k])
            var = 0.0
            for line in range(ids.max() + 1):
                vals = block[ids == line].astype(float)
                if len(vals):
                    var += float(np.sum((vals - vals.mean()) ** 2))
            variances.append(var)
        assert variances[d] == pytest.approx(min(variances), abs=1e-6)


def test_direction_field_shape():
    plane = np.zeros((16, 24))
    assert direction_field(plane).shape == (2, 3)
    with pytest.raises(ValueError):
        direction_field(np.zeros((10, 16)))


# -- plane and frame filtering ---------------------------------------------


def test_zero_threshold_is_identity():
    rng = np.random.default_rng(3)
    plane = rng.integers(0, 256, size=(64, 64))
    dirs = direction_field(plane)
    assert np.array_equal(dering_plane(plane, dirs, 0), plane)


def test_constant_plane_unchanged_any_threshold():
    plane = np.full((64, 64), 77, dtype=np.int64)
    dirs = direction_field(plane)
    for t in (1, 4, 16, 64):
        assert np.array_equal(dering_plane(plane, dirs, t), plane)


def test_dering_reduces_step_edge_ringing_mse():
    clean, noisy = ringing_fixture(amplitude=4)
    dirs = direction_field(noisy)
    filtered = dering_plane(noisy, dirs, 8)
    mse_before = float(np.mean((noisy - clean) ** 2))
    mse_after = float(np.mean((filtered - clean) ** 2))
    assert mse_after <= 0.9 * mse_before
    # the clean edge itself must survive
    assert abs(int(filtered[40, 40]) - int(clean[40, 40])) <= 8


def test_stage1_output_bounded_by_threshold():
    rng = np.random.default_rng(5)
    plane = rng.integers(0, 256, size=(32, 32))
    dirs = direction_field(plane)
    t = 12
    out = dering_plane(plane, dirs, t)
    # two stages, each bounded by its threshold (t, then ceil(t/2))
    assert np.max(np.abs(out - plane)) <= t + (t + 1) // 2


def test_dering_frame_flags_off_identity():
    rng = np.random.default_rng(6)
    planes = (
        rng.integers(0, 256, size=(128, 128)),
        rng.integers(0, 256, size=(64, 64)),
        rng.integers(0, 256, size=(64, 64)),
    )
    flags = np.zeros((2, 2), dtype=bool)
    out = dering_frame(planes, "420", 10, flags)
    for a, b in zip(out, planes):
        assert np.array_equal(a, b)


def test_dering_frame_partial_flags():
    rng = np.random.default_rng(7)
    y = rng.integers(0, 256, size=(128, 128))
    cb = rng.integers(0, 256, size=(64, 64))
    cr = rng.integers(0, 256, size=(64, 64))
    flags = np.array([[True, False], [False, False]])
    out_y, out_cb, out_cr = dering_frame((y, cb, cr), "420", 12, flags)
    assert np.array_equal(out_y[64:, :], y[64:, :])
    assert np.array_equal(out_y[:64, 64:], y[:64, 64:])
    assert not np.array_equal(out_y[:64, :64], y[:64, :64])
    assert np.array_equal(out_cb[32:, :], cb[32:, :])
    assert np.array_equal(out_cr[:32, 32:], cr[:32, 32:])


def test_dering_frame_deterministic():
    rng = np.random.default_rng(8)
    planes = (
        rng.integers(0, 256, size=(65, 70)),
        rng.integers(0, 256, size=(33, 35)),
        rng.integers(0, 256, size=(33, 35)),
    )
    a = dering_frame(planes, "420", 9)
    b = dering_frame(planes, "420", 9)
    for pa, pb in zip(a, b):
        assert np.array_equal(pa, pb)


def test_dering_frame_444():
    rng = np.random.default_rng(9)
    planes = tuple(rng.integers(0, 256, size=(64, 64)) for _ in range(3))
    out = dering_frame(planes, "444", 8)
    assert all(p.shape == (64, 64) for p in out)


def test_threshold_for_quantizer():
    assert threshold_for_quantizer(0.25) == 0
    assert threshold_for_quantizer(8.0) == 5  # round(5.36)
    assert threshold_for_quantizer(56.0) == 38
