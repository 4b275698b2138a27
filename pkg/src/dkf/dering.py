"""Directional deringing post-filter.

Each 8x8 block gets one of eight quantized directions (``d * 22.5`` degrees
from horizontal, array coordinates with y down), picked by minimising the
pixel variance along lines following the direction.  A 7-tap conditional
replacement filter then runs along that direction, and a gentler 5-tap
second stage runs across it (vertically for near-horizontal directions,
horizontally for near-vertical ones).  The conditional replacement filter
is the linear FIR

    y(n) = x(n) + round(sum_k w_k * R(x(n + k) - x(n), T) / W)

where ``R(x, T)`` keeps a difference only when ``|x| < T``, so taps across
an edge are replaced by the centre pixel and the edge never blurs.  Both
stages have exact unit DC response (``2 * sum(w) == W``).

Filtering is a pure post-process: given the same input, flags and
threshold, encoder and decoder produce identical output.
"""

from __future__ import annotations

import math

import numpy as np

# Committed output of tools/gen_dering_tables.py: per-direction line
# membership of each pixel in an 8x8 block, and tap offsets (dx, dy) at
# distances 1..3 along the direction.
DIRECTION_LINES = (
    ((0, 0, 0, 0, 0, 0, 0, 0), (1, 1, 1, 1, 1, 1, 1, 1), (2, 2, 2, 2, 2, 2, 2, 2), (3, 3, 3, 3, 3, 3, 3, 3), (4, 4, 4, 4, 4, 4, 4, 4), (5, 5, 5, 5, 5, 5, 5, 5), (6, 6, 6, 6, 6, 6, 6, 6), (7, 7, 7, 7, 7, 7, 7, 7)),
    ((3, 3, 2, 2, 1, 1, 1, 0), (4, 4, 3, 3, 2, 2, 2, 1), (5, 5, 4, 4, 3, 3, 3, 2), (6, 6, 5, 5, 4, 4, 4, 3), (7, 7, 6, 6, 5, 5, 5, 4), (8, 8, 7, 7, 6, 6, 6, 5), (9, 9, 8, 8, 7, 7, 7, 6), (10, 10, 9, 9, 8, 8, 8, 7)),
    ((7, 6, 5, 4, 3, 2, 1, 0), (8, 7, 6, 5, 4, 3, 2, 1), (9, 8, 7, 6, 5, 4, 3, 2), (10, 9, 8, 7, 6, 5, 4, 3), (11, 10, 9, 8, 7, 6, 5, 4), (12, 11, 10, 9, 8, 7, 6, 5), (13, 12, 11, 10, 9, 8, 7, 6), (14, 13, 12, 11, 10, 9, 8, 7)),
    ((3, 4, 5, 6, 7, 8, 9, 10), (3, 4, 5, 6, 7, 8, 9, 10), (2, 3, 4, 5, 6, 7, 8, 9), (2, 3, 4, 5, 6, 7, 8, 9), (1, 2, 3, 4, 5, 6, 7, 8), (1, 2, 3, 4, 5, 6, 7, 8), (1, 2, 3, 4, 5, 6, 7, 8), (0, 1, 2, 3, 4, 5, 6, 7)),
    ((0, 1, 2, 3, 4, 5, 6, 7), (0, 1, 2, 3, 4, 5, 6, 7), (0, 1, 2, 3, 4, 5, 6, 7), (0, 1, 2, 3, 4, 5, 6, 7), (0, 1, 2, 3, 4, 5, 6, 7), (0, 1, 2, 3, 4, 5, 6, 7), (0, 1, 2, 3, 4, 5, 6, 7), (0, 1, 2, 3, 4, 5, 6, 7)),
    ((0, 1, 2, 3, 4, 5, 6, 7), (0, 1, 2, 3, 4, 5, 6, 7), (1, 2, 3, 4, 5, 6, 7, 8), (1, 2, 3, 4, 5, 6, 7, 8), (2, 3, 4, 5, 6, 7, 8, 9), (2, 3, 4, 5, 6, 7, 8, 9), (2, 3, 4, 5, 6, 7, 8, 9), (3, 4, 5, 6, 7, 8, 9, 10)),
    ((0, 1, 2, 3, 4, 5, 6, 7), (1, 2, 3, 4, 5, 6, 7, 8), (2, 3, 4, 5, 6, 7, 8, 9), (3, 4, 5, 6, 7, 8, 9, 10), (4, 5, 6, 7, 8, 9, 10, 11), (5, 6, 7, 8, 9, 10, 11, 12), (6, 7, 8, 9, 10, 11, 12, 13), (7, 8, 9, 10, 11, 12, 13, 14)),
    ((0, 0, 1, 1, 2, 2, 2, 3), (1, 1, 2, 2, 3, 3, 3, 4), (2, 2, 3, 3, 4, 4, 4, 5), (3, 3, 4, 4, 5, 5, 5, 6), (4, 4, 5, 5, 6, 6, 6, 7), (5, 5, 6, 6, 7, 7, 7, 8), (6, 6, 7, 7, 8, 8, 8, 9), (7, 7, 8, 8, 9, 9, 9, 10)),
)

DIRECTION_TAPS = (
    ((1, 0), (2, 0), (3, 0)),
    ((1, 0), (2, 1), (3, 1)),
    ((1, 1), (2, 2), (3, 3)),
    ((0, 1), (1, 2), (1, 3)),
    ((0, 1), (0, 2), (0, 3)),
    ((0, 1), (-1, 2), (-1, 3)),
    ((-1, 1), (-2, 2), (-3, 3)),
    ((1, 0), (2, -1), (3, -1)),
)

# First stage: weights for distances 1..3 along the direction; second
# stage: distances 1..2 across it.  2 * sum == NORM for exact DC gain.
STAGE1_WEIGHTS = (4, 3, 1)
STAGE2_WEIGHTS = (5, 3)
NORM = 16
_SHIFT = 4  # log2(NORM)

# Directions whose second stage runs vertically (within 45 degrees of
# horizontal, ties included); the rest run horizontally.
_STAGE2_VERTICAL = (0, 1, 2, 6, 7)

_LINES = np.asarray(DIRECTION_LINES, dtype=np.intp)
_LINE_COUNTS = [np.bincount(_LINES[d].ravel()) for d in range(8)]


def replace(x: int, t: int) -> int:
    """Conditional replacement: keep a difference only when ``|x| < t``."""
    return x if abs(x) < t else 0


def crf_line(taps, t: int) -> int:
    """7-tap conditional replacement filter on one line of samples.

    ``taps`` holds the samples at distances -3..+3; the centre is taps[3].
    """
    taps = [int(v) for v in taps]
    if len(taps) != 7:
        raise ValueError("need exactly 7 taps")
    centre = taps[3]
    acc = 0
    for dist, w in enumerate(STAGE1_WEIGHTS, start=1):
        acc += w * replace(taps[3 - dist] - centre, t)
        acc += w * replace(taps[3 + dist] - centre, t)
    return centre + ((acc + NORM // 2) >> _SHIFT)


def find_direction(block) -> tuple[int, float]:
    """Best of 8 quantized directions for an 8x8 block.

    Returns ``(d, score)`` where ``d`` minimises the variance of pixels
    around their per-line means and ``score`` is the gap between the worst
    and best direction (a directional-contrast measure).
    """
    block = np.asarray(block, dtype=np.float64)
    if block.shape != (8, 8):
        raise ValueError(f"expected an 8x8 block, got {block.shape}")
    flat = block.ravel()
    total_sq = float(flat @ flat)
    variances = []
    for d in range(8):
        ids = _LINES[d].ravel()
        sums = np.bincount(ids, weights=flat)
        variances.append(total_sq - float(np.sum(sums * sums / _LINE_COUNTS[d])))
    best = int(np.argmin(variances))
    return best, float(max(variances) - variances[best])


def direction_field(plane) -> np.ndarray:
    """Per-8x8-block direction indices for a plane (dims multiples of 8)."""
    plane = np.asarray(plane)
    h, w = plane.shape
    if h % 8 or w % 8:
        raise ValueError("plane dimensions must be multiples of 8")
    field = np.zeros((h // 8, w // 8), dtype=np.int8)
    for by in range(0, h, 8):
        for bx in range(0, w, 8):
            field[by // 8, bx // 8] = find_direction(plane[by : by + 8, bx : bx + 8])[0]
    return field


def _crf_stage(plane, dir_field, t: int, stage2: bool) -> np.ndarray:
    """One filtering stage over a whole plane, vectorised per direction.

    Every output pixel is computed from this stage's input plane only, so
    blocks are order-independent within the stage.
    """
    plane = np.asarray(plane, dtype=np.int64)
    h, w = plane.shape
    if t <= 0:
        return plane.copy()
    pad = 3
    padded = np.pad(plane, pad, mode="edge")
    dirs_up = np.repeat(np.repeat(dir_field, 8, axis=0), 8, axis=1)[:h, :w]
    out = plane.copy()
    weights = STAGE2_WEIGHTS if stage2 else STAGE1_WEIGHTS
    for d in range(8):
        mask = dirs_up == d
        if not mask.any():
            continue
        if stage2:
            offs = [(0, 1), (0, 2)] if d in _STAGE2_VERTICAL else [(1, 0), (2, 0)]
        else:
            offs = DIRECTION_TAPS[d]
        acc = np.zeros_like(plane)
        for (dx, dy), wgt in zip(offs, weights):
            for sx, sy in ((dx, dy), (-dx, -dy)):
                shifted = padded[pad + sy : pad + sy + h, pad + sx : pad + sx + w]
                diff = shifted - plane
                acc += wgt * np.where(np.abs(diff) < t, diff, 0)
        filtered = plane + ((acc + NORM // 2) >> _SHIFT)
        out[mask] = filtered[mask]
    return out


def _pad_to_multiple(plane, mult: int) -> np.ndarray:
    h, w = plane.shape
    ph = (-h) % mult
    pw = (-w) % mult
    if ph or pw:
        plane = np.pad(plane, ((0, ph), (0, pw)), mode="edge")
    return plane


def dering_plane(plane, dir_field, t: int) -> np.ndarray:
    """Both filter stages on one plane using a precomputed direction field.

    Stage 1 runs the 7-tap filter along each block's direction with
    threshold ``t``; stage 2 runs the 5-tap filter across it with threshold
    ``ceil(t / 2)`` on the stage-1 output (35-tap combined support).
    """
    plane = np.asarray(plane, dtype=np.int64)
    h, w = plane.shape
    work = _pad_to_multiple(plane, 8)
    if t <= 0:
        return plane.copy()
    stage1 = _crf_stage(work, dir_field, t, stage2=False)
    t2 = (t + 1) // 2
    stage2 = _crf_stage(stage1, dir_field, t2, stage2=True)
    return stage2[:h, :w]


def dering_block(plane, x: int, y: int, dir_field, t: int) -> np.ndarray:
    """Filtered 8x8 block at ``(x, y)``; convenience view of the two stages."""
    return dering_plane(plane, dir_field, t)[y : y + 8, x : x + 8]


def dering_frame(planes, subsampling: str, t_base: int, flags=None):
    """Filter a decoded frame, honouring per-64x64-superblock flags.

    The luma plane supplies the direction field; chroma planes reuse the
    co-located luma directions at half threshold.  ``flags`` is a boolean
    array over the luma superblock grid (all on when None).  Frame borders
    are handled by pixel replication.
    """
    y, cb, cr = (np.asarray(p, dtype=np.int64) for p in planes)
    h, w = y.shape
    sb_rows = -(-h // 64)
    sb_cols = -(-w // 64)
    if flags is None:
        flags = np.ones((sb_rows, sb_cols), dtype=bool)
    flags = np.asarray(flags, dtype=bool)
    if flags.shape != (sb_rows, sb_cols):
        raise ValueError(f"flag grid {flags.shape} does not match {(sb_rows, sb_cols)}")
    if t_base <= 0 or not flags.any():
        return y.copy(), cb.copy(), cr.copy()

    dirs = direction_field(_pad_to_multiple(y, 8))
    out_y = _composite(y, dering_plane(y, dirs, t_base), flags, 64)

    t_chroma = t_base // 2
    if subsampling == "420":
        step = 2
        sb_chroma = 32
    elif subsampling == "444":
        step = 1
        sb_chroma = 64
    else:
        raise ValueError(f"unknown subsampling {subsampling!r}")
    out_c = []
    for plane in (cb, cr):
        ch, cw = plane.shape
        nby = -(-ch // 8)
        nbx = -(-cw // 8)
        cdirs = np.zeros((nby, nbx), dtype=np.int8)
        for j in range(nby):
            for i in range(nbx):
                lj = min(j * step, dirs.shape[0] - 1)
                li = min(i * step, dirs.shape[1] - 1)
                cdirs[j, i] = dirs[lj, li]
        filtered = dering_plane(plane, cdirs, t_chroma)
        out_c.append(_composite(plane, filtered, flags, sb_chroma))
    return out_y, out_c[0], out_c[1]


def _composite(original, filtered, flags, sb_size: int) -> np.ndarray:
    out = original.copy()
    h, w = original.shape
    for j in range(flags.shape[0]):
        for i in range(flags.shape[1]):
            if not flags[j, i]:
                continue
            y0, x0 = j * sb_size, i * sb_size
            if y0 >= h or x0 >= w:
                continue
            y1, x1 = min(y0 + sb_size, h), min(x0 + sb_size, w)
            out[y0:y1, x0:x1] = filtered[y0:y1, x0:x1]
    return out


def threshold_for_quantizer(q_step: float) -> int:
    """Deringing strength from the AC quantizer step, in sample units."""
    return max(0, math.floor(0.67 * q_step + 0.5))
