"""Multi-symbol adaptive range coder.

Symbols are coded against cumulative frequency tables (:class:`CdfTable`)
whose total is fixed at ``2**15``.  The coder keeps its range ``R`` in
``[2**15, 2**16)`` after every step, so ``t <= R < 2t`` always holds and the
cumulative frequencies can be mapped onto the range with a multiply-free
partition function.  Two interchangeable partition functions are provided:

``partition_legacy``
    ``f(x) = x + max(x - (2t - R), 0)`` -- the classic piecewise-linear
    split into unit-width then double-width cells.

``partition_reduced``
    ``e = max(2R - 3t, 0)``;
    ``f(x) = x + min(x, e) + min(floor(max(x - e, 0) / 2), R - t)`` --
    a three-segment map with smaller deviation from the ideal ``x * R / t``.

Both satisfy ``f(0) = 0``, ``f(t) = R`` and are strictly increasing on
distinct cumulative values, which is all the coder needs.

Carry propagation is handled with a pending-byte scheme: at most one
unsettled byte plus a run of 0xFF bytes is buffered, so memory stays bounded
no matter how long a carry chain gets.  ``finish()`` flushes the 16 bits of
the final interval base, which is exactly what the decoder pre-loads, so a
well-formed stream is never over-read.
"""

from __future__ import annotations

import enum
import math

from .errors import DecodeError, TruncatedStreamError

TOTAL_BITS = 15
CDF_TOTAL = 1 << TOTAL_BITS
_WINDOW = 16
_RANGE_TOP = 1 << _WINDOW
_RANGE_MIN = 1 << (_WINDOW - 1)

DEFAULT_ADAPT_RATE = 5


class Partition(enum.IntEnum):
    """Which multiply-free partition function a stream uses."""

    LEGACY = 0
    REDUCED = 1


def _check_partition_args(x: int, t: int, r: int) -> None:
    if not 0 <= x <= t:
        raise ValueError(f"cumulative frequency {x} outside [0, {t}]")
    if not t <= r <= 2 * t:
        raise ValueError(f"range {r} outside [{t}, {2 * t}] for total {t}")


def partition_reduced(x: int, t: int, r: int) -> int:
    """Map cumulative frequency ``x`` of total ``t`` onto range ``r``."""
    _check_partition_args(x, t, r)
    e = 2 * r - 3 * t
    if e < 0:
        e = 0
    return x + min(x, e) + min(max(x - e, 0) >> 1, r - t)


def partition_legacy(x: int, t: int, r: int) -> int:
    """Piecewise-linear predecessor of :func:`partition_reduced`."""
    _check_partition_args(x, t, r)
    return x + max(x - (2 * t - r), 0)


class CdfTable:
    """Cumulative frequency table over ``n`` symbols, total ``2**15``.

    ``cum`` holds ``n + 1`` integers with ``cum[0] == 0`` and
    ``cum[n] == CDF_TOTAL``.  Adaptive tables (``rate`` not None) keep every
    symbol frequency at least 1 and move toward the observed symbol by a
    shift-based exponential decay.  Static tables (``rate`` None) may carry
    zero-frequency symbols; encoding one raises.
    """

    __slots__ = ("cum", "n", "rate")

    def __init__(self, n_symbols, counts=None, rate=DEFAULT_ADAPT_RATE):
        if not 2 <= n_symbols <= 16:
            raise ValueError(f"symbol count {n_symbols} outside [2, 16]")
        self.n = n_symbols
        self.rate = rate
        if counts is None:
            self.cum = [i * CDF_TOTAL // n_symbols for i in range(n_symbols + 1)]
        else:
            if len(counts) != n_symbols:
                raise ValueError("counts length does not match symbol count")
            if sum(counts) != CDF_TOTAL:
                raise ValueError(f"counts must sum to {CDF_TOTAL}")
            cum = [0]
            for c in counts:
                if c < 0 or (rate is not None and c < 1):
                    raise ValueError("invalid symbol frequency")
                cum.append(cum[-1] + c)
            self.cum = cum

    def copy(self) -> "CdfTable":
        dup = CdfTable.__new__(CdfTable)
        dup.cum = list(self.cum)
        dup.n = self.n
        dup.rate = self.rate
        return dup

    def prob(self, s: int) -> float:
        return (self.cum[s + 1] - self.cum[s]) / CDF_TOTAL

    def update(self, s: int) -> None:
        """Move the table toward symbol ``s``; no-op for static tables."""
        r = self.rate
        if r is None:
            return
        cum = self.cum
        n = self.n
        t = CDF_TOTAL
        for i in range(1, n):
            c = cum[i]
            if i <= s:
                cum[i] = c - (c >> r)
            else:
                cum[i] = c + ((t - c) >> r)
        # keep every frequency >= 1
        prev = 0
        for i in range(1, n):
            c = cum[i]
            lo = prev + 1
            hi = t - (n - i)
            if c < lo:
                c = lo
            elif c > hi:
                c = hi
            cum[i] = c
            prev = c

    def validate(self) -> None:
        cum = self.cum
        assert cum[0] == 0 and cum[-1] == CDF_TOTAL
        for i in range(self.n):
            gap = cum[i + 1] - cum[i]
            assert gap >= (1 if self.rate is not None else 0)


_UNIFORM_CUMS: dict[int, list[int]] = {}


def _uniform_cum(n: int) -> list[int]:
    cum = _UNIFORM_CUMS.get(n)
    if cum is None:
        cum = [i * CDF_TOTAL // n for i in range(n + 1)]
        _UNIFORM_CUMS[n] = cum
    return cum


class RangeEncoder:
    """Range encoder writing one byte-oriented stream."""

    def __init__(self, partition: Partition = Partition.REDUCED):
        self.partition = Partition(partition)
        self._reduced = partition == Partition.REDUCED
        self.low = 0
        self.rng = _RANGE_TOP - 1
        self._bytes = bytearray()
        self._cache = -1  # oldest byte that may still absorb a carry
        self._ff_run = 0
        self._bitbuf = 0
        self._nbits = 0

    # -- bit plumbing ------------------------------------------------

    def _put_bits(self, value: int, count: int) -> None:
        bitbuf = (self._bitbuf << count) | value
        nbits = self._nbits + count
        while nbits >= 8:
            nbits -= 8
            byte = (bitbuf >> nbits) & 0xFF
            bitbuf &= (1 << nbits) - 1
            if byte == 0xFF:
                self._ff_run += 1
            else:
                if self._cache >= 0:
                    self._bytes.append(self._cache)
                if self._ff_run:
                    self._bytes.extend(b"\xff" * self._ff_run)
                    self._ff_run = 0
                self._cache = byte
        self._bitbuf = bitbuf
        self._nbits = nbits

    def _carry(self) -> None:
        n = self._nbits
        if n and self._bitbuf != (1 << n) - 1:
            self._bitbuf += 1
            return
        self._bitbuf = 0  # all-one tail rolls over
        if self._cache < 0:
            raise AssertionError("range coder carry escaped the stream head")
        # Once a carry lands, no later carry can reach this far back: the
        # next overflow needs a renormalisation that emits a zero bit first.
        self._bytes.append(self._cache + 1)
        if self._ff_run:
            self._bytes.extend(b"\x00" * self._ff_run)
            self._ff_run = 0
        self._cache = -1

    # -- symbol coding -----------------------------------------------

    def _interval(self, cum_lo: int, cum_hi: int) -> None:
        rng = self.rng
        if self._reduced:
            e = 2 * rng - 3 * CDF_TOTAL
            if e < 0:
                e = 0
            cap = rng - CDF_TOTAL
            u = cum_lo + min(cum_lo, e) + min(max(cum_lo - e, 0) >> 1, cap)
            v = cum_hi + min(cum_hi, e) + min(max(cum_hi - e, 0) >> 1, cap)
        else:
            thr = 2 * CDF_TOTAL - rng
            u = cum_lo + max(cum_lo - thr, 0)
            v = cum_hi + max(cum_hi - thr, 0)
        if v <= u:
            raise ValueError("cannot encode a zero-frequency symbol")
        low = self.low + u
        if low >= _RANGE_TOP:
            low -= _RANGE_TOP
            self._carry()
        rng = v - u
        d = _WINDOW - rng.bit_length()
        if d:
            self._put_bits((low << d) >> _WINDOW, d)
            low = (low << d) & 0xFFFF
            rng <<= d
        self.low = low
        self.rng = rng

    def encode(self, cdf: CdfTable, s: int) -> None:
        """Encode symbol ``s`` against ``cdf`` and adapt the table."""
        cum = cdf.cum
        self._interval(cum[s], cum[s + 1])
        cdf.update(s)

    def encode_uniform(self, value: int, n: int) -> None:
        """Encode ``value`` drawn uniformly from ``[0, n)``."""
        if n <= 1:
            return
        if n <= 16:
            cum = _uniform_cum(n)
            self._interval(cum[value], cum[value + 1])
            return
        hi, lo = divmod(value, 16)
        n_hi, rem = divmod(n, 16)
        self.encode_uniform(hi, n_hi + (1 if rem else 0))
        self.encode_uniform(lo, 16 if hi < n_hi else rem)

    def finish(self) -> bytes:
        """Flush the interval base and return the finished stream."""
        self._put_bits(self.low, _WINDOW)
        if self._nbits:
            self._put_bits(0, 8 - self._nbits)
        out = self._bytes
        if self._cache >= 0:
            out.append(self._cache)
        if self._ff_run:
            out.extend(b"\xff" * self._ff_run)
        self._cache = -1
        self._ff_run = 0
        return bytes(out)

    def tell_bits(self) -> int:
        """Bits committed so far, excluding the final flush."""
        return 8 * len(self._bytes) + 8 * (self._cache >= 0) + 8 * self._ff_run + self._nbits


class RangeDecoder:
    """Exact mirror of :class:`RangeEncoder` over a byte string."""

    def __init__(self, data: bytes, partition: Partition = Partition.REDUCED):
        self.partition = Partition(partition)
        self._reduced = partition == Partition.REDUCED
        self._data = data
        self._pos = 0
        self._bitbuf = 0
        self._nbits = 0
        self.rng = _RANGE_TOP - 1
        self.val = self._read_bits(_WINDOW)

    def _read_bits(self, count: int) -> int:
        nbits = self._nbits
        bitbuf = self._bitbuf
        while nbits < count:
            if self._pos >= len(self._data):
                raise TruncatedStreamError("range-coded payload ended early")
            bitbuf = (bitbuf << 8) | self._data[self._pos]
            self._pos += 1
            nbits += 8
        nbits -= count
        value = (bitbuf >> nbits) & ((1 << count) - 1)
        self._bitbuf = bitbuf & ((1 << nbits) - 1)
        self._nbits = nbits
        return value

    def _scan(self, cum: list[int], n: int) -> tuple[int, int, int]:
        rng = self.rng
        val = self.val
        if self._reduced:
            e = 2 * rng - 3 * CDF_TOTAL
            if e < 0:
                e = 0
            cap = rng - CDF_TOTAL
            lo = 0
            for i in range(1, n + 1):
                x = cum[i]
                hi = x + min(x, e) + min(max(x - e, 0) >> 1, cap)
                if val < hi:
                    return i - 1, lo, hi
                lo = hi
        else:
            thr = 2 * CDF_TOTAL - rng
            lo = 0
            for i in range(1, n + 1):
                x = cum[i]
                hi = x + max(x - thr, 0)
                if val < hi:
                    return i - 1, lo, hi
                lo = hi
        raise DecodeError("range decoder desynchronised")

    def _advance(self, lo: int, hi: int) -> None:
        self.val -= lo
        rng = hi - lo
        d = _WINDOW - rng.bit_length()
        if d:
            self.val = (self.val << d) | self._read_bits(d)
            rng <<= d
        self.rng = rng

    def decode(self, cdf: CdfTable) -> int:
        """Decode one symbol against ``cdf`` and adapt the table."""
        s, lo, hi = self._scan(cdf.cum, cdf.n)
        self._advance(lo, hi)
        cdf.update(s)
        return s

    def decode_uniform(self, n: int) -> int:
        if n <= 1:
            return 0
        if n <= 16:
            s, lo, hi = self._scan(_uniform_cum(n), n)
            self._advance(lo, hi)
            return s
        n_hi, rem = divmod(n, 16)
        hi = self.decode_uniform(n_hi + (1 if rem else 0))
        lo = self.decode_uniform(16 if hi < n_hi else rem)
        return hi * 16 + lo


class RateEstimator:
    """Trial coder: accumulates symbol costs in bits without emitting bytes.

    Implements the encoder's symbol interface so the same serialization code
    paths can be run for rate measurement during mode decisions.
    """

    __slots__ = ("bits", "adapt")

    def __init__(self, adapt: bool = False):
        self.bits = 0.0
        self.adapt = adapt

    def encode(self, cdf: CdfTable, s: int) -> None:
        span = cdf.cum[s + 1] - cdf.cum[s]
        if span <= 0:
            raise ValueError("cannot encode a zero-frequency symbol")
        self.bits += TOTAL_BITS - math.log2(span)
        if self.adapt:
            cdf.update(s)

    def encode_uniform(self, value: int, n: int) -> None:
        if n > 1:
            self.bits += math.log2(n)


def quantize_distribution(probs) -> list[int]:
    """Turn a probability vector into integer counts summing to ``CDF_TOTAL``.

    Every probability that is exactly zero stays zero; everything else gets
    at least one count.  The largest entry absorbs the rounding remainder.
    """
    counts = []
    for p in probs:
        if p < 0:
            raise ValueError("negative probability")
        c = int(round(p * CDF_TOTAL))
        if p > 0 and c == 0:
            c = 1
        counts.append(c)
    excess = sum(counts) - CDF_TOTAL
    top = max(range(len(counts)), key=lambda i: counts[i])
    counts[top] -= excess
    if counts[top] < 1:
        raise ValueError("distribution too skewed to quantize")
    return counts


def stream_bits(symbol_pairs, kind: Partition) -> int:
    """Exact bit count for coding ``(cum_lo, cum_hi)`` interval pairs.

    Renormalisation emits exactly ``16 - bit_length(width)`` bits per symbol
    and the flush adds 16, so the count follows from the range orbit alone;
    carries change byte values, never the length.  Used by
    :func:`measure_overhead` to avoid building streams it would throw away.
    """
    reduced = kind == Partition.REDUCED
    t = CDF_TOTAL
    rng = _RANGE_TOP - 1
    bits = 0
    for cum_lo, cum_hi in symbol_pairs:
        if reduced:
            e = 2 * rng - 3 * t
            if e < 0:
                e = 0
            cap = rng - t
            u = cum_lo + min(cum_lo, e) + min(max(cum_lo - e, 0) >> 1, cap)
            v = cum_hi + min(cum_hi, e) + min(max(cum_hi - e, 0) >> 1, cap)
        else:
            thr = 2 * t - rng
            u = cum_lo + max(cum_lo - thr, 0)
            v = cum_hi + max(cum_hi - thr, 0)
        w = v - u
        d = _WINDOW - w.bit_length()
        bits += d
        rng = w << d
    return bits + _WINDOW


def measure_overhead(probs, n: int, kind: Partition, seed: int = 0) -> float:
    """Relative rate overhead of coding ``n`` i.i.d. symbols from ``probs``.

    The distribution is quantized onto the coder's fixed total and symbols
    are drawn from the quantized probabilities, so the returned
    ``(actual_bits - shannon_bits) / shannon_bits`` isolates the coder's own
    overhead.  When the sequence carries no information (``shannon_bits`` is
    zero) the absolute bit count is returned instead.
    """
    import numpy as np

    if n < 10**5:
        raise ValueError("need at least 1e5 symbols for a stable estimate")
    counts = quantize_distribution(probs)
    k = len(counts)
    if k < 2:
        raise ValueError("need at least 2 symbols")
    rng = np.random.default_rng(seed)
    q = np.asarray(counts, dtype=np.float64) / CDF_TOTAL
    symbols = rng.choice(k, size=n, p=q)
    hist = np.bincount(symbols, minlength=k)

    cum = [0]
    for c in counts:
        cum.append(cum[-1] + c)
    actual_bits = stream_bits(((cum[s], cum[s + 1]) for s in symbols.tolist()), kind)

    shannon = 0.0
    for i in range(k):
        if hist[i]:
            shannon += float(hist[i]) * -math.log2(counts[i] / CDF_TOTAL)
    if shannon == 0.0:
        return float(actual_bits)
    return (actual_bits - shannon) / shannon
