"""Keyframe encoder/decoder and the .dkf bitstream.

Pipeline per plane: pad to superblock multiples, forward-lap every
transform boundary, per-leaf DCT (64x64 leaves code only their low 32x32
quadrant), recursive Haar combination of leaf DCs up to the superblock
root, gain-shape quantization of the AC bands (luma bands may use an H/V
frequency-domain intra reference, chroma bands a chroma-from-luma
reference), one shared range-coder stream, then inverse lapping and an
optional directional deringing post-filter with per-superblock flags.

The exact symbol order is normative and documented field by field in
FORMAT.md.  Encoder-side reconstruction and the decoder share every
dequantization code path, so a round trip is bit-exact by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import dering as dering_mod
from .entropy import CdfTable, Partition, RangeDecoder, RangeEncoder, RateEstimator
from .errors import DecodeError, FormatError, UnsupportedFormatError
from .image import PlanarImage, chroma_dims
from .predict import IntraMode, cfl_reference, dc_predict, intra_predict
from .pvq import (
    BandContexts,
    band_layout,
    decode_band,
    decode_uint,
    encode_band,
    encode_uint,
    pvq_dequantize_band,
    pvq_quantize_band,
)
from .transform import apply_lapping, fdct, fdct64_lowband, haar_dc_forward, haar_dc_inverse, idct

MAGIC = b"DKF1"
VERSION = 1
HEADER_LEN = 12
SB_SIZE = 64
MAX_DIMENSION = 65535

FP_SCALE = 16  # coefficient fixed point: 4 fractional bits
ALPHA_LUMA = 1.0 / 3.0
ALPHA_CHROMA = 0.0
DC_STEP_SCALE = 0.8  # DC/Haar-detail step = 0.8 * q, in coefficient units
AC_STEP_DIVISOR = 4.0  # AC band step = q / 4

_DC_INDEX_CAP = 1 << 24


def _round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


@dataclass
class EncoderConfig:
    base_q: int = 32
    partition: Partition = Partition.REDUCED
    dering_enabled: bool = True
    lambda_scale: float = 0.2  # keeps block-size choices stable across q

    def __post_init__(self):
        if not 1 <= self.base_q <= 255:
            raise ValueError(f"base_q {self.base_q} outside [1, 255]")


def chroma_q_map(luma_q: int) -> int:
    """Chroma quantizer from the luma one.

    The factor is above 1 below the crossover at q=48 (coarser chroma at
    high bitrate) and below 1 past it (finer chroma at low bitrate).
    """
    if luma_q < 1:
        raise ValueError("quantizer index must be >= 1")
    factor = 1.3 - 0.5 * luma_q / (luma_q + 32.0)
    return max(1, _round_half_up(luma_q * factor))


def ac_step(q: int) -> float:
    return q / AC_STEP_DIVISOR


def dc_step_fp(q: int) -> float:
    return DC_STEP_SCALE * q * FP_SCALE


# -- header -------------------------------------------------------------------


def pack_header(width, height, subsampling, partition, base_q, dering) -> bytes:
    flags = (1 if partition == Partition.REDUCED else 0) | (2 if dering else 0)
    return (
        MAGIC
        + bytes([VERSION])
        + int(width).to_bytes(2, "big")
        + int(height).to_bytes(2, "big")
        + bytes([0 if subsampling == "420" else 1, base_q, flags])
    )


def unpack_header(data: bytes) -> dict:
    if len(data) < HEADER_LEN:
        raise FormatError(f"header needs {HEADER_LEN} bytes, got {len(data)}")
    if data[:4] != MAGIC:
        raise FormatError(f"bad magic {data[:4]!r}")
    if data[4] != VERSION:
        raise FormatError(f"unsupported version {data[4]}")
    width = int.from_bytes(data[5:7], "big")
    height = int.from_bytes(data[7:9], "big")
    if width == 0 or height == 0:
        raise FormatError("zero image dimension")
    if data[9] not in (0, 1):
        raise FormatError(f"bad subsampling byte {data[9]}")
    base_q = data[10]
    if base_q < 1:
        raise FormatError("quantizer index 0")
    flags = data[11]
    if flags & ~3:
        raise FormatError(f"reserved flag bits set: {flags:#x}")
    return {
        "width": width,
        "height": height,
        "subsampling": "420" if data[9] == 0 else "444",
        "partition": Partition.REDUCED if flags & 1 else Partition.LEGACY,
        "base_q": base_q,
        "dering": bool(flags & 2),
    }


def bitstream_info(data: bytes) -> dict:
    info = unpack_header(data)
    info["payload_bytes"] = len(data) - HEADER_LEN
    return info


# -- block tree -----------------------------------------------------------------


@dataclass
class BlockTree:
    """Quadtree of transform sizes under one superblock."""

    size: int
    children: tuple | None = None

    def leaves(self, x: int = 0, y: int = 0) -> list[tuple[int, int, int]]:
        if self.children is None:
            return [(x, y, self.size)]
        half = self.size // 2
        out = []
        for (dx, dy), child in zip(((0, 0), (half, 0), (0, half), (half, half)), self.children):
            out.extend(child.leaves(x + dx, y + dy))
        return out

    @classmethod
    def single(cls, size: int = SB_SIZE) -> "BlockTree":
        return cls(size)


def derive_chroma_tree(luma: BlockTree) -> BlockTree:
    """Half-size tree for 4:2:0 chroma; leaves never go below 4x4."""
    if luma.children is not None and luma.size >= 16:
        return BlockTree(
            luma.size // 2, tuple(derive_chroma_tree(c) for c in luma.children)
        )
    return BlockTree(max(4, luma.size // 2))


def _encode_tree(enc, split_cdfs, tree: BlockTree, depth: int = 0) -> None:
    if tree.size <= 4:
        return
    split = tree.children is not None
    enc.encode(split_cdfs[depth], 1 if split else 0)
    if split:
        for child in tree.children:
            _encode_tree(enc, split_cdfs, child, depth + 1)


def _decode_tree(dec, split_cdfs, size: int = SB_SIZE, depth: int = 0) -> BlockTree:
    if size <= 4:
        return BlockTree(4)
    if dec.decode(split_cdfs[depth]):
        children = tuple(_decode_tree(dec, split_cdfs, size // 2, depth + 1) for _ in range(4))
        return BlockTree(size, children)
    return BlockTree(size)


# -- adaptive contexts -----------------------------------------------------------


@dataclass
class UintContexts:
    first: CdfTable
    rest: CdfTable
    more: CdfTable
    sign: CdfTable

    @classmethod
    def fresh(cls) -> "UintContexts":
        return cls(CdfTable(16), CdfTable(16), CdfTable(2), CdfTable(2))


class CdfBundle:
    """Every adaptive probability table of one stream, freshly initialised."""

    def __init__(self):
        self.split = [CdfTable(2) for _ in range(4)]
        self.mode = CdfTable(3)
        self.dc = (UintContexts.fresh(), UintContexts.fresh())  # luma, chroma
        self.bands = (BandContexts.fresh(), BandContexts.fresh())
        self.dering = CdfTable(2)


def _encode_signed(coder, ctx: UintContexts, v: int) -> None:
    encode_uint(coder, ctx.first, ctx.rest, ctx.more, abs(v))
    if v:
        coder.encode(ctx.sign, 1 if v < 0 else 0)


def _decode_signed(coder, ctx: UintContexts) -> int:
    mag = decode_uint(coder, ctx.first, ctx.rest, ctx.more)
    if mag > _DC_INDEX_CAP:
        raise DecodeError(f"DC magnitude {mag} out of range")
    if mag and coder.decode(ctx.sign):
        return -mag
    return mag


# -- DC path -----------------------------------------------------------------------


def _leaf_transform(block: np.ndarray, size: int) -> np.ndarray:
    coeffs = fdct64_lowband(block) if size == 64 else fdct(block)
    return np.floor(coeffs * FP_SCALE + 0.5) / FP_SCALE


def _haar_build(tree: BlockTree, x, y, leaf_dc) -> tuple[int, dict]:
    """Bottom-up Haar over the quadtree; returns (root, per-node details)."""
    if tree.children is None:
        return leaf_dc[(x, y)], {}
    half = tree.size // 2
    roots = []
    details: dict = {}
    for (dx, dy), child in zip(((0, 0), (half, 0), (0, half), (half, half)), tree.children):
        r, d = _haar_build(child, x + dx, y + dy, leaf_dc)
        roots.append(r)
        details.update(d)
    dc, h, v, dg = haar_dc_forward(*roots)
    details[(x, y, tree.size)] = (h, v, dg)
    return dc, details


def _haar_scatter(tree: BlockTree, x, y, root: int, details: dict, out: dict) -> None:
    """Top-down inverse Haar, writing reconstructed leaf DCs into ``out``."""
    if tree.children is None:
        out[(x, y)] = root
        return
    h, v, dg = details[(x, y, tree.size)]
    kids = haar_dc_inverse(root, h, v, dg)
    half = tree.size // 2
    for (dx, dy), child, kid_dc in zip(
        ((0, 0), (half, 0), (0, half), (half, half)), tree.children, kids
    ):
        _haar_scatter(child, x + dx, y + dy, kid_dc, details, out)


def _node_order(tree: BlockTree, x, y) -> list[tuple[int, int, int]]:
    """Internal nodes in the top-down z-order used for detail symbols."""
    if tree.children is None:
        return []
    out = [(x, y, tree.size)]
    half = tree.size // 2
    for (dx, dy), child in zip(((0, 0), (half, 0), (0, half), (half, half)), tree.children):
        out.extend(_node_order(child, x + dx, y + dy))
    return out


def _quant_signed(value: float, step: float) -> int:
    return _round_half_up(value / step)


def _dequant_int(index: int, step: float) -> int:
    return _round_half_up(index * step)


def _neutral_dc(sb_size: int) -> int:
    # constant mid-gray: orthonormal leaf DC is 128 * size, doubled per Haar
    # level, so the superblock root lands at 128 * sb_size (times FP_SCALE)
    return 128 * sb_size * FP_SCALE


class _PlaneState:
    """Decoded-so-far data of one plane, shared by encoder and decoder."""

    def __init__(self, shape, sb_grid):
        self.recon_lapped = np.zeros(shape, dtype=np.float64)
        self.coeff_map: dict = {}
        self.sb_dc = np.zeros(sb_grid, dtype=np.int64)
        self.sb_done = np.zeros(sb_grid, dtype=bool)

    def neighbour_dc(self, sbj, sbi):
        left = self.sb_dc[sbj, sbi - 1] if sbi > 0 and self.sb_done[sbj, sbi - 1] else None
        above = self.sb_dc[sbj - 1, sbi] if sbj > 0 and self.sb_done[sbj - 1, sbi] else None
        return (int(left) if left is not None else None, int(above) if above is not None else None)

    def neighbour_coeffs(self, x, y, size):
        left = self.coeff_map.get((x - size, y))
        above = self.coeff_map.get((x, y - size))
        left = left[1] if left is not None and left[0] == size else None
        above = above[1] if above is not None and above[0] == size else None
        return left, above


# -- per-superblock coding ---------------------------------------------------------


def _sb_code_dc(coder, ctx, tree, sbx, sby, state, step, sb_size, leaf_dc=None):
    """Code (or decode, when ``leaf_dc`` is None) one superblock's DC tree.

    Returns the reconstructed leaf DC map for the superblock.
    """
    sbj, sbi = sby // sb_size, sbx // sb_size
    pred = dc_predict(*state.neighbour_dc(sbj, sbi), neutral=_neutral_dc(sb_size))
    encoding = leaf_dc is not None
    if encoding:
        root, details = _haar_build(tree, sbx, sby, leaf_dc)
        res_idx = _quant_signed(root - pred, step)
        _encode_signed(coder, ctx, res_idx)
    else:
        res_idx = _decode_signed(coder, ctx)
    recon_root = pred + _dequant_int(res_idx, step)
    recon_details = {}
    for node in _node_order(tree, sbx, sby):
        if encoding:
            idxs = [_quant_signed(d, step) for d in details[node]]
            for idx in idxs:
                _encode_signed(coder, ctx, idx)
        else:
            idxs = [_decode_signed(coder, ctx) for _ in range(3)]
        recon_details[node] = tuple(_dequant_int(i, step) for i in idxs)
    recon_leaf_dc: dict = {}
    _haar_scatter(tree, sbx, sby, recon_root, recon_details, recon_leaf_dc)
    state.sb_dc[sbj, sbi] = recon_root
    state.sb_done[sbj, sbi] = True
    return recon_leaf_dc


def _prediction_block(plane_class, mode, state, x, y, size, luma_state, subsampling):
    """Reference coefficients for one leaf: intra for luma, CfL for chroma."""
    if plane_class == 0:
        if mode == IntraMode.NONE:
            return None
        left, above = state.neighbour_coeffs(x, y, size)
        return intra_predict(mode, left, above, size)
    scale = 2 if subsampling == "420" else 1
    entry = luma_state.coeff_map.get((x * scale, y * scale))
    luma_block = entry[1] if entry is not None and entry[0] == size * scale else None
    return cfl_reference(luma_block, size)


def _band_refs(pred, size):
    if pred is None:
        return [None] * len(band_layout(size))
    flat = pred.ravel()
    refs = []
    for idx in band_layout(size):
        ref = flat[idx]
        refs.append(ref if float(ref @ ref) != 0.0 else None)
    return refs


def _reconstruct_leaf(size, recon_dc_int, bands, refs, q_step, alpha):
    flat = np.zeros(size * size)
    for idx, band, ref in zip(band_layout(size), bands, refs):
        flat[idx] = pvq_dequantize_band(band, ref, q_step, alpha)
    coeffs = flat.reshape(size, size)
    coeffs[0, 0] = recon_dc_int / FP_SCALE
    if size == 64 and (coeffs[32:, :].any() or coeffs[:, 32:].any()):
        raise AssertionError("64x64 leaf carries coefficients outside its low quadrant")
    return coeffs


def _code_plane_sb(enc_or_dec, cdfs, plane_class, tree, sbx, sby, state, luma_state,
                   q, subsampling, sb_size, lapped_plane=None):
    """Encode (``lapped_plane`` given) or decode one plane's superblock."""
    encoding = lapped_plane is not None
    alpha = ALPHA_LUMA if plane_class == 0 else ALPHA_CHROMA
    q_step = ac_step(q)
    step_dc = dc_step_fp(q)
    leaves = tree.leaves(sbx, sby)
    ctx_dc = cdfs.dc[plane_class]
    ctx_band = cdfs.bands[plane_class]

    modes: list[IntraMode] = []
    leaf_coeffs = {}
    if encoding:
        for x, y, size in leaves:
            block = lapped_plane[y : y + size, x : x + size].astype(np.float64)
            leaf_coeffs[(x, y)] = _leaf_transform(block, size)
        if plane_class == 0:
            for x, y, size in leaves:
                modes.append(_choose_mode(leaf_coeffs[(x, y)], state, x, y, size))
            for mode in modes:
                enc_or_dec.encode(cdfs.mode, int(mode))
        leaf_dc = {
            (x, y): _round_half_up(leaf_coeffs[(x, y)][0, 0] * FP_SCALE)
            for x, y, size in leaves
        }
        recon_dc = _sb_code_dc(enc_or_dec, ctx_dc, tree, sbx, sby, state, step_dc, sb_size, leaf_dc)
    else:
        if plane_class == 0:
            for x, y, size in leaves:
                modes.append(IntraMode(enc_or_dec.decode(cdfs.mode)))
        recon_dc = _sb_code_dc(enc_or_dec, ctx_dc, tree, sbx, sby, state, step_dc, sb_size)

    if plane_class != 0:
        modes = [IntraMode.NONE] * len(leaves)

    for (x, y, size), mode in zip(leaves, modes):
        if not encoding and plane_class == 0 and mode != IntraMode.NONE:
            left, above = state.neighbour_coeffs(x, y, size)
            needed = above if mode == IntraMode.VERTICAL else left
            if needed is None:
                raise DecodeError(f"intra mode {mode.name} without a neighbour")
        pred = _prediction_block(plane_class, mode, state, x, y, size, luma_state, subsampling)
        refs = _band_refs(pred, size)
        layout = band_layout(size)
        if encoding:
            flat = leaf_coeffs[(x, y)].ravel()
            bands = [
                pvq_quantize_band(flat[idx], ref, q_step, alpha)
                for idx, ref in zip(layout, refs)
            ]
            for band in bands:
                encode_band(enc_or_dec, ctx_band, band, q_step, alpha)
        else:
            bands = [
                decode_band(enc_or_dec, ctx_band, len(idx), ref is not None, q_step, alpha)
                for idx, ref in zip(layout, refs)
            ]
        coeffs = _reconstruct_leaf(size, recon_dc[(x, y)], bands, refs, q_step, alpha)
        state.coeff_map[(x, y)] = (size, coeffs)
        state.recon_lapped[y : y + size, x : x + size] = idct(coeffs)


def _choose_mode(coeffs, state, x, y, size) -> IntraMode:
    left, above = state.neighbour_coeffs(x, y, size)
    best_mode, best_sse = IntraMode.NONE, None
    for mode in (IntraMode.NONE, IntraMode.HORIZONTAL, IntraMode.VERTICAL):
        if mode == IntraMode.HORIZONTAL and left is None:
            continue
        if mode == IntraMode.VERTICAL and above is None:
            continue
        pred = intra_predict(mode, left, above, size)
        diff = coeffs - pred
        diff.flat[0] = 0.0  # DC rides the Haar path
        sse = float(np.sum(diff * diff))
        if best_sse is None or sse < best_sse:
            best_mode, best_sse = mode, sse
    return best_mode


# -- rate-distortion block-size search -------------------------------------------


def rdo_split(sb_pixels: np.ndarray, q: int, lambda_scale: float) -> BlockTree:
    """Bottom-up quadtree decision minimising D + lambda * R for one superblock.

    Distortion is the coefficient-domain SSE of a leaf-local trial
    reconstruction (no lapping, no prediction); rate is measured by running
    the band serialisation against a trial entropy coder with fresh tables.
    """
    if sb_pixels.shape != (SB_SIZE, SB_SIZE):
        raise ValueError("RDO operates on one 64x64 superblock")
    lam = lambda_scale * q * q
    q_step = ac_step(q)
    step_dc = dc_step_fp(q)
    block = sb_pixels.astype(np.float64)

    def leaf_cost(x, y, size):
        coeffs = _leaf_transform(block[y : y + size, x : x + size], size)
        flat = coeffs.ravel()
        est = RateEstimator()
        ctx = BandContexts.fresh()
        recon = np.zeros_like(flat)
        for idx in band_layout(size):
            band = pvq_quantize_band(flat[idx], None, q_step, ALPHA_LUMA)
            encode_band(est, ctx, band, q_step, ALPHA_LUMA)
            recon[idx] = pvq_dequantize_band(band, None, q_step, ALPHA_LUMA)
        dc_fp = _round_half_up(flat[0] * FP_SCALE)
        dc_idx = _quant_signed(dc_fp, step_dc)
        est.bits += 6.0  # crude standalone cost of the leaf's DC content
        recon[0] = _dequant_int(dc_idx, step_dc) / FP_SCALE
        # coefficient-domain SSE equals pixel-domain SSE (orthonormal basis)
        dist = float(np.sum((recon - flat) ** 2))
        return dist + lam * est.bits

    def cost(x, y, size):
        leaf = leaf_cost(x, y, size)
        if size > 4:
            leaf += lam * 1.0  # no-split flag
        if size == 4:
            return leaf, BlockTree(4)
        half = size // 2
        split_total = lam * 1.0  # split flag
        children = []
        for dy in (0, half):
            for dx in (0, half):
                c, t = cost(x + dx, y + dy, half)
                split_total += c
                children.append(t)
        if split_total < leaf:
            return split_total, BlockTree(size, (children[0], children[1], children[2], children[3]))
        return leaf, BlockTree(size)

    return cost(0, 0, SB_SIZE)[1]


# -- frame-level encode/decode ------------------------------------------------------


def _pad_plane(plane: np.ndarray, mult: int) -> np.ndarray:
    h, w = plane.shape
    return np.pad(plane, ((0, (-h) % mult), (0, (-w) % mult)), mode="edge")


def _round_plane(plane: np.ndarray) -> np.ndarray:
    return np.floor(plane + 0.5).astype(np.int64)


def _plane_geometry(img: PlanarImage):
    """Padded shapes and per-plane superblock sizes."""
    wp = -(-img.width // SB_SIZE) * SB_SIZE
    hp = -(-img.height // SB_SIZE) * SB_SIZE
    if img.subsampling == "420":
        sb_chroma = SB_SIZE // 2
        cshape = (hp // 2, wp // 2)
    else:
        sb_chroma = SB_SIZE
        cshape = (hp, wp)
    return (hp, wp), cshape, sb_chroma


def encode_keyframe(img: PlanarImage, cfg: EncoderConfig, with_recon: bool = False):
    """Encode a still image; returns the bitstream (and the reconstruction).

    The returned reconstruction is bit-identical to what
    :func:`decode_keyframe` produces for the stream.
    """
    if img.width > MAX_DIMENSION or img.height > MAX_DIMENSION:
        raise UnsupportedFormatError(
            f"image {img.width}x{img.height} exceeds {MAX_DIMENSION}"
        )
    qy = cfg.base_q
    qc = chroma_q_map(qy)
    (hp, wp), cshape, sb_chroma = _plane_geometry(img)
    y_pad = _pad_plane(img.planes[0].astype(np.int64), SB_SIZE)
    cb_pad = _pad_plane(img.planes[1].astype(np.int64), sb_chroma)
    cr_pad = _pad_plane(img.planes[2].astype(np.int64), sb_chroma)
    sb_rows, sb_cols = hp // SB_SIZE, wp // SB_SIZE

    trees = [
        [
            rdo_split(
                y_pad[j * SB_SIZE : (j + 1) * SB_SIZE, i * SB_SIZE : (i + 1) * SB_SIZE],
                qy,
                cfg.lambda_scale,
            )
            for i in range(sb_cols)
        ]
        for j in range(sb_rows)
    ]
    if img.subsampling == "420":
        chroma_trees = [[derive_chroma_tree(t) for t in row] for row in trees]
    else:
        chroma_trees = trees

    luma_leaves = [
        leaf for j in range(sb_rows) for i in range(sb_cols)
        for leaf in trees[j][i].leaves(i * SB_SIZE, j * SB_SIZE)
    ]
    chroma_leaves = [
        leaf for j in range(sb_rows) for i in range(sb_cols)
        for leaf in chroma_trees[j][i].leaves(i * sb_chroma, j * sb_chroma)
    ]

    lap_y = apply_lapping(y_pad, luma_leaves)
    lap_cb = apply_lapping(cb_pad, chroma_leaves)
    lap_cr = apply_lapping(cr_pad, chroma_leaves)

    enc = RangeEncoder(cfg.partition)
    cdfs = CdfBundle()
    grid = (sb_rows, sb_cols)
    st_y = _PlaneState((hp, wp), grid)
    st_cb = _PlaneState(cshape, grid)
    st_cr = _PlaneState(cshape, grid)

    for j in range(sb_rows):
        for i in range(sb_cols):
            _encode_tree(enc, cdfs.split, trees[j][i])
            _code_plane_sb(
                enc, cdfs, 0, trees[j][i], i * SB_SIZE, j * SB_SIZE, st_y, st_y,
                qy, img.subsampling, SB_SIZE, lapped_plane=lap_y,
            )
            ct = chroma_trees[j][i]
            for st, lap in ((st_cb, lap_cb), (st_cr, lap_cr)):
                _code_plane_sb(
                    enc, cdfs, 1, ct, i * sb_chroma, j * sb_chroma, st, st_y,
                    qc, img.subsampling, sb_chroma, lapped_plane=lap,
                )

    recon = _assemble_frame(img, (st_y, st_cb, st_cr), (luma_leaves, chroma_leaves))
    threshold = dering_mod.threshold_for_quantizer(ac_step(qy)) if cfg.dering_enabled else 0
    if threshold > 0:
        filtered = dering_mod.dering_frame(recon, img.subsampling, threshold)
        flags = np.zeros(grid, dtype=bool)
        orig_y = img.planes[0].astype(np.int64)
        for j in range(sb_rows):
            for i in range(sb_cols):
                ys = slice(j * SB_SIZE, min((j + 1) * SB_SIZE, img.height))
                xs = slice(i * SB_SIZE, min((i + 1) * SB_SIZE, img.width))
                if ys.start >= img.height or xs.start >= img.width:
                    continue
                before = np.sum((recon[0][ys, xs] - orig_y[ys, xs]) ** 2)
                after = np.sum((filtered[0][ys, xs] - orig_y[ys, xs]) ** 2)
                flags[j, i] = after < before
        for j in range(sb_rows):
            for i in range(sb_cols):
                enc.encode(cdfs.dering, int(flags[j, i]))
        recon = dering_mod.dering_frame(recon, img.subsampling, threshold, flags)

    payload = enc.finish()
    data = pack_header(
        img.width, img.height, img.subsampling, cfg.partition, qy, cfg.dering_enabled
    ) + payload
    if not with_recon:
        return data
    planes = tuple(np.clip(p, 0, 255).astype(np.uint8) for p in recon)
    return data, PlanarImage(img.width, img.height, img.subsampling, planes)


def _assemble_frame(img, states, leaves_pair):
    """Inverse lapping, rounding and cropping of the three plane states."""
    st_y, st_cb, st_cr = states
    luma_leaves, chroma_leaves = leaves_pair
    cw, ch = chroma_dims(img.width, img.height, img.subsampling)
    out = []
    for st, leaves, (w, h) in (
        (st_y, luma_leaves, (img.width, img.height)),
        (st_cb, chroma_leaves, (cw, ch)),
        (st_cr, chroma_leaves, (cw, ch)),
    ):
        plane = apply_lapping(_round_plane(st.recon_lapped), leaves, inverse=True)
        out.append(plane[:h, :w])
    return tuple(out)


def decode_keyframe(data: bytes, max_pixels: int | None = None) -> PlanarImage:
    """Decode a .dkf bitstream back to a planar image.

    ``max_pixels`` optionally bounds the allocation implied by the header,
    for callers feeding untrusted input.
    """
    header = unpack_header(data)
    width, height = header["width"], header["height"]
    if max_pixels is not None and width * height > max_pixels:
        raise DecodeError(f"{width}x{height} exceeds the {max_pixels}-pixel limit")
    subsampling = header["subsampling"]
    qy = header["base_q"]
    qc = chroma_q_map(qy)
    shell = PlanarImage.blank(width, height, subsampling)
    (hp, wp), cshape, sb_chroma = _plane_geometry(shell)
    sb_rows, sb_cols = hp // SB_SIZE, wp // SB_SIZE

    dec = RangeDecoder(data[HEADER_LEN:], header["partition"])
    cdfs = CdfBundle()
    grid = (sb_rows, sb_cols)
    st_y = _PlaneState((hp, wp), grid)
    st_cb = _PlaneState(cshape, grid)
    st_cr = _PlaneState(cshape, grid)

    luma_leaves = []
    chroma_leaves = []
    for j in range(sb_rows):
        for i in range(sb_cols):
            tree = _decode_tree(dec, cdfs.split)
            luma_leaves.extend(tree.leaves(i * SB_SIZE, j * SB_SIZE))
            _code_plane_sb(
                dec, cdfs, 0, tree, i * SB_SIZE, j * SB_SIZE, st_y, st_y,
                qy, subsampling, SB_SIZE,
            )
            ct = derive_chroma_tree(tree) if subsampling == "420" else tree
            chroma_leaves.extend(ct.leaves(i * sb_chroma, j * sb_chroma))
            for st in (st_cb, st_cr):
                _code_plane_sb(
                    dec, cdfs, 1, ct, i * sb_chroma, j * sb_chroma, st, st_y,
                    qc, subsampling, sb_chroma,
                )

    recon = _assemble_frame(shell, (st_y, st_cb, st_cr), (luma_leaves, chroma_leaves))
    threshold = dering_mod.threshold_for_quantizer(ac_step(qy)) if header["dering"] else 0
    if threshold > 0:
        flags = np.zeros(grid, dtype=bool)
        for j in range(sb_rows):
            for i in range(sb_cols):
                flags[j, i] = bool(dec.decode(cdfs.dering))
        recon = dering_mod.dering_frame(recon, subsampling, threshold, flags)
    planes = tuple(np.clip(p, 0, 255).astype(np.uint8) for p in recon)
    return PlanarImage(width, height, subsampling, planes)
