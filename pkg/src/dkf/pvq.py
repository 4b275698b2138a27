"""Gain-shape quantization of coefficient bands.

A band is coded as a companded gain (vector length), and a shape drawn from
the pulse codebook ``{y : sum(|y_i|) = K}``.  The pulse budget is tied to the
coded gain (``K = gain_index``), so shape resolution scales with contrast at
no signalling cost.  When a prediction is available the band is coded
relative to it: a Householder reflection maps the reference onto a signed
axis, the angle to the reference is quantized uniformly, and only the
remaining ``n - 1`` dimensions are shape-coded.

Activity masking enters through the gain companding exponent ``alpha``:
``gain_index = round(g**(1 - alpha) / q)``, so quantization noise grows with
local contrast.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .entropy import CdfTable
from .errors import DecodeError

THETA_STEP_MIN = math.pi / 64
THETA_STEP_MAX = math.pi / 4

_MAX_UINT_DIGITS = 8  # decoded escape values are capped below 2**32


def _round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


# -- band layout -----------------------------------------------------------


def zigzag_positions(n: int) -> list[tuple[int, int]]:
    """Classic zig-zag scan order of an n x n block."""
    out = []
    for d in range(2 * n - 1):
        r_lo = max(0, d - n + 1)
        r_hi = min(d, n - 1)
        rows = range(r_hi, r_lo - 1, -1) if d % 2 == 0 else range(r_lo, r_hi + 1)
        out.extend((r, d - r) for r in rows)
    return out


_LAYOUT_CACHE: dict[int, list[np.ndarray]] = {}


def band_layout(size: int) -> list[np.ndarray]:
    """AC band partition for a transform size, as flat coefficient indices.

    Bands are dyadic rings over the zig-zag scan: ``[1, N*N/16)``,
    ``[N*N/16, N*N/4)`` and ``[N*N/4, N*N)``, with a minimum band size of 3;
    4x4 blocks keep a single 15-coefficient band.  64x64 blocks only code
    their low 32x32 quadrant, so the rings are laid out over that quadrant.
    """
    cached = _LAYOUT_CACHE.get(size)
    if cached is not None:
        return cached
    if size not in (4, 8, 16, 32, 64):
        raise ValueError(f"unsupported transform size {size}")
    n_eff = 32 if size == 64 else size
    flat = [r * size + c for r, c in zigzag_positions(n_eff)]
    if size == 4:
        bands = [np.array(flat[1:], dtype=np.intp)]
    else:
        n2 = n_eff * n_eff
        cuts = [1, max(4, n2 // 16), n2 // 4, n2]
        bands = []
        for lo, hi in zip(cuts, cuts[1:]):
            if hi - lo < 3:
                raise AssertionError("band below minimum size")
            bands.append(np.array(flat[lo:hi], dtype=np.intp))
    _LAYOUT_CACHE[size] = bands
    return bands


# -- gain companding ---------------------------------------------------------


def gain_compand(g: float, q: float, alpha: float) -> int:
    """Quantize a band gain with activity-masking companding."""
    if g < 0 or q <= 0 or not 0 <= alpha < 1:
        raise ValueError("invalid companding arguments")
    return _round_half_up(g ** (1.0 - alpha) / q)


def gain_expand(gain_index: int, q: float, alpha: float) -> float:
    """Reconstruct a band gain from its companded index."""
    if gain_index < 0 or q <= 0 or not 0 <= alpha < 1:
        raise ValueError("invalid companding arguments")
    if gain_index == 0:
        return 0.0
    return (gain_index * q) ** (1.0 / (1.0 - alpha))


# -- shape search -------------------------------------------------------------


_ENUM_LIMIT = 4096  # max codebook slice searched exhaustively
_ENUM_CACHE: dict[tuple[int, int], np.ndarray] = {}
_ENUM_NORMS: dict[tuple[int, int], np.ndarray] = {}


def _composition_count(n: int, k: int) -> int:
    return math.comb(n + k - 1, n - 1)


def _compositions(n: int, k: int) -> np.ndarray:
    """All non-negative n-vectors summing to k, lexicographically descending.

    Cached per (n, k); the enumeration limit keeps every entry small, and
    the bands a codec actually produces touch a few dozen shapes at most.
    """
    key = (n, k)
    cached = _ENUM_CACHE.get(key)
    if cached is None:
        if n == 1:
            cached = np.array([[k]], dtype=np.int64)
        else:
            rows = []
            for first in range(k, -1, -1):
                rest = _compositions(n - 1, k - first)
                block = np.empty((rest.shape[0], n), dtype=np.int64)
                block[:, 0] = first
                block[:, 1:] = rest
                rows.append(block)
            cached = np.concatenate(rows)
        _ENUM_CACHE[key] = cached
    return cached


def pvq_search(x, k: int) -> np.ndarray:
    """Best pulse vector: maximize ``x . y / |y|`` subject to ``sum|y| = k``.

    Small codebook slices (at most ``_ENUM_LIMIT`` magnitude patterns, which
    covers every band the oracle tests and the small bands real images
    produce at coarse quantizers) are searched exhaustively, ties going to
    the lexicographically greatest pattern so more pulses land on lower
    indices.  Larger problems use greedy placement on top of an L1
    projection plus a single pulse-move refinement pass.  Signs follow the
    input; a zero input with ``k > 0`` puts every pulse on index 0.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if k <= 0:
        return np.zeros(n, dtype=np.int64)
    ax = np.abs(x)
    l1 = float(ax.sum())
    if l1 <= 0.0:
        y = np.zeros(n, dtype=np.int64)
        y[0] = k
        return y
    signs = np.where(x < 0, -1, 1)

    # greedy is provably exact for k <= 2; enumerate other small codebooks
    if k > 2 and _composition_count(n, k) <= _ENUM_LIMIT:
        comps = _compositions(n, k)
        norms = _ENUM_NORMS.get((n, k))
        if norms is None:
            norms = np.sqrt(np.sum(comps * comps, axis=1))
            _ENUM_NORMS[(n, k)] = norms
        scores = (comps @ ax) / norms
        return comps[int(np.argmax(scores))] * signs

    y = np.floor(ax * (k / l1)).astype(np.int64)
    while int(y.sum()) > k:  # float-rounding overshoot only
        j = int(np.argmax(np.where(y > 0, ax / np.maximum(y, 1), -np.inf)))
        y[j] -= 1
    xy = float(ax @ y)
    yy = float(y @ y)
    for _ in range(k - int(y.sum())):
        scores = (xy + ax) ** 2 / (yy + 2.0 * y + 1.0)
        j = int(np.argmax(scores))
        xy += ax[j]
        yy += 2.0 * y[j] + 1.0
        y[j] += 1

    # single refinement pass: move each pulse to its best landing spot
    for i in range(n):
        if y[i] == 0:
            continue
        xy0 = xy - ax[i]
        yy0 = yy - 2.0 * y[i] + 1.0
        y[i] -= 1
        scores = (xy0 + ax) ** 2 / (yy0 + 2.0 * y + 1.0)
        j = int(np.argmax(scores))
        xy = xy0 + ax[j]
        yy = yy0 + 2.0 * y[j] + 1.0
        y[j] += 1

    return (y * signs).astype(np.int64)


# -- reference geometry -------------------------------------------------------


def _householder(ref: np.ndarray):
    m = int(np.argmax(np.abs(ref)))
    s = 1.0 if ref[m] >= 0 else -1.0
    u = ref.astype(np.float64).copy()
    u[m] += s * float(np.linalg.norm(ref))
    uu = float(u @ u)
    return u, uu, m, s


def _reflect(u: np.ndarray, uu: float, x: np.ndarray) -> np.ndarray:
    return x - (2.0 * float(u @ x) / uu) * u


def _theta_params(gain_index: int, q: float, alpha: float):
    g_hat = gain_expand(gain_index, q, alpha)
    step = min(max(q / g_hat, THETA_STEP_MIN), THETA_STEP_MAX)
    max_index = _round_half_up((math.pi / 2) / step)
    return g_hat, step, max_index


# -- band quantize / dequantize ----------------------------------------------


@dataclass
class PvqBand:
    """Coded form of one coefficient band."""

    n: int
    gain_index: int
    k: int
    pulses: np.ndarray  # signed, sum of magnitudes == k
    theta_index: int | None = None  # present in reference mode
    ref_flip: int = 0

    def validate(self) -> None:
        assert (self.k == 0) == (self.gain_index == 0) or self.theta_index is not None
        assert int(np.abs(self.pulses).sum()) == self.k


def pvq_quantize_band(x, ref, q: float, alpha: float) -> PvqBand:
    """Quantize one band, optionally against a reference vector."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    g = float(np.linalg.norm(x))
    gain_index = gain_compand(g, q, alpha)
    if gain_index == 0:
        return PvqBand(n, 0, 0, np.zeros(n, dtype=np.int64))
    has_ref = ref is not None and float(np.linalg.norm(ref)) > 0.0
    if not has_ref:
        k = gain_index
        return PvqBand(n, gain_index, k, pvq_search(x, k))

    ref = np.asarray(ref, dtype=np.float64)
    corr = float(x @ ref)
    flip = 1 if corr < 0 else 0
    _g_hat, step, max_index = _theta_params(gain_index, q, alpha)
    cos_t = abs(corr) / (g * float(np.linalg.norm(ref)))
    theta = math.acos(min(max(cos_t, 0.0), 1.0))
    ti = min(_round_half_up(theta / step), max_index)
    k = max(0, _round_half_up(gain_index * math.sin(ti * step)))
    u, uu, m, _s = _householder(ref)
    z_rest = np.delete(_reflect(u, uu, x), m)
    pulses = pvq_search(z_rest, k)
    return PvqBand(n, gain_index, k, pulses, theta_index=ti, ref_flip=flip)


def pvq_dequantize_band(band: PvqBand, ref, q: float, alpha: float) -> np.ndarray:
    """Reconstruct a band; the exact decoder-side inverse given the same ref."""
    n = band.n
    if band.gain_index == 0:
        return np.zeros(n)
    has_ref = band.theta_index is not None
    if not has_ref:
        g_hat = gain_expand(band.gain_index, q, alpha)
        norm = float(np.linalg.norm(band.pulses))
        if norm == 0.0:
            return np.zeros(n)
        return band.pulses * (g_hat / norm)

    if ref is None or float(np.linalg.norm(ref)) == 0.0:
        raise ValueError("reference-mode band without a reference")
    ref = np.asarray(ref, dtype=np.float64)
    g_hat, step, _max_index = _theta_params(band.gain_index, q, alpha)
    theta = band.theta_index * step
    u, uu, m, s = _householder(ref)
    reflected = np.zeros(n)
    norm = float(np.linalg.norm(band.pulses))
    if norm > 0.0:
        reflected[np.arange(n) != m] = band.pulses * (math.sin(theta) / norm)
    axis_sign = -s * (-1.0 if band.ref_flip else 1.0)
    reflected[m] = math.cos(theta) * axis_sign
    return g_hat * _reflect(u, uu, reflected)


# -- symbol binarization -------------------------------------------------------


@dataclass
class BandContexts:
    """Adaptive tables for one plane class (luma or chroma)."""

    gain_first: CdfTable
    gain_rest: CdfTable
    gain_more: CdfTable
    pulse_first: CdfTable
    pulse_rest: CdfTable
    pulse_more: CdfTable
    flip: CdfTable

    @classmethod
    def fresh(cls) -> "BandContexts":
        return cls(
            gain_first=CdfTable(16),
            gain_rest=CdfTable(16),
            gain_more=CdfTable(2),
            pulse_first=CdfTable(16),
            pulse_rest=CdfTable(16),
            pulse_more=CdfTable(2),
            flip=CdfTable(2),
        )


def encode_uint(coder, first: CdfTable, rest: CdfTable, more: CdfTable, v: int) -> None:
    """Escape-code a non-negative integer as 4-bit digits, low digit first."""
    coder.encode(first, v & 15)
    v >>= 4
    while v:
        coder.encode(more, 1)
        coder.encode(rest, v & 15)
        v >>= 4
    coder.encode(more, 0)


def decode_uint(coder, first: CdfTable, rest: CdfTable, more: CdfTable) -> int:
    v = coder.decode(first)
    shift = 4
    for _ in range(_MAX_UINT_DIGITS):
        if not coder.decode(more):
            return v
        v |= coder.decode(rest) << shift
        shift += 4
    raise DecodeError("escape-coded integer too long")


def _encode_pulses(coder, ctx: BandContexts, pulses: np.ndarray, k: int) -> None:
    mags = np.abs(pulses)

    def rec(lo: int, hi: int, budget: int) -> None:
        if budget == 0:
            return
        if hi - lo == 1:
            coder.encode_uniform(1 if pulses[lo] < 0 else 0, 2)
            return
        mid = (lo + hi) // 2
        kl = int(mags[lo:mid].sum())
        encode_uint(coder, ctx.pulse_first, ctx.pulse_rest, ctx.pulse_more, kl)
        rec(lo, mid, kl)
        rec(mid, hi, budget - kl)

    rec(0, len(pulses), k)


def _decode_pulses(coder, ctx: BandContexts, n: int, k: int) -> np.ndarray:
    pulses = np.zeros(n, dtype=np.int64)

    def rec(lo: int, hi: int, budget: int) -> None:
        if budget == 0:
            return
        if hi - lo == 1:
            sign = coder.decode_uniform(2)
            pulses[lo] = -budget if sign else budget
            return
        mid = (lo + hi) // 2
        kl = decode_uint(coder, ctx.pulse_first, ctx.pulse_rest, ctx.pulse_more)
        if kl > budget:
            raise DecodeError("pulse split exceeds its budget")
        rec(lo, mid, kl)
        rec(mid, hi, budget - kl)

    rec(0, n, k)
    return pulses


_GAIN_INDEX_CAP = 1 << 24  # far above any gain a legal stream can produce


def encode_band(coder, ctx: BandContexts, band: PvqBand, q: float, alpha: float) -> None:
    """Serialize a quantized band; the exact inverse of :func:`decode_band`."""
    encode_uint(coder, ctx.gain_first, ctx.gain_rest, ctx.gain_more, band.gain_index)
    if band.gain_index == 0:
        return
    if band.theta_index is not None:
        coder.encode(ctx.flip, band.ref_flip)
        _g, _step, max_index = _theta_params(band.gain_index, q, alpha)
        coder.encode_uniform(band.theta_index, max_index + 1)
    _encode_pulses(coder, ctx, band.pulses, band.k)


def decode_band(coder, ctx: BandContexts, n: int, has_ref: bool, q: float, alpha: float) -> PvqBand:
    gain_index = decode_uint(coder, ctx.gain_first, ctx.gain_rest, ctx.gain_more)
    if gain_index == 0:
        return PvqBand(n, 0, 0, np.zeros(n, dtype=np.int64))
    if gain_index > _GAIN_INDEX_CAP:
        raise DecodeError(f"gain index {gain_index} out of range")
    if has_ref:
        flip = coder.decode(ctx.flip)
        _g, step, max_index = _theta_params(gain_index, q, alpha)
        ti = coder.decode_uniform(max_index + 1)
        k = max(0, _round_half_up(gain_index * math.sin(ti * step)))
        pulses = _decode_pulses(coder, ctx, n - 1, k)
        return PvqBand(n, gain_index, k, pulses, theta_index=ti, ref_flip=flip)
    k = gain_index
    pulses = _decode_pulses(coder, ctx, n, k)
    return PvqBand(n, gain_index, k, pulses)
