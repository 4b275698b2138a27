"""Objective quality metrics, BD-rate, and corpus RD sweeps.

PSNR-HVS weights per-coefficient DCT error of 8x8 blocks with the contrast
sensitivity table from the metric's public reference implementation.  SSIM
uses the plain 8x8 box window; FAST-SSIM is the same measurement on 2x
box-downsampled planes with integer moment accumulation.

BD-rate follows the classic definition: cubic fit of log(rate) against the
metric, integrated over the curves' common metric range; a PCHIP variant is
flag-selectable.  Negative means the test curve is cheaper than the
reference at equal quality.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import NoOverlapError, ParseError
from .image import PlanarImage
from .transform import dct_basis

PSNR_CAP_DB = 99.0

METRIC_NAMES = ("psnr", "psnr_hvs", "ssim", "fast_ssim")

# Rate bands (bits per pixel) used for banded BD-rate reporting.
RATE_BANDS = {"low": (0.05, 0.2), "medium": (0.2, 0.5), "high": (0.5, 1.0)}

# 8x8 contrast sensitivity weights from the public PSNR-HVS reference tables.
CSF_8X8 = np.array(
    [
        [1.608443, 2.339554, 2.573509, 1.608443, 1.072295, 0.643377, 0.504610, 0.421887],
        [2.144591, 2.144591, 1.838221, 1.354478, 0.989811, 0.443708, 0.428918, 0.467911],
        [1.838221, 1.979622, 1.608443, 1.072295, 0.643377, 0.451493, 0.372972, 0.459555],
        [1.838221, 1.513829, 1.169777, 0.887417, 0.504610, 0.295806, 0.321689, 0.415082],
        [1.429727, 1.169777, 0.695543, 0.459555, 0.378457, 0.236102, 0.249855, 0.334222],
        [1.072295, 0.735288, 0.467911, 0.402111, 0.317717, 0.247453, 0.227744, 0.279729],
        [0.525206, 0.402111, 0.329937, 0.295806, 0.249855, 0.212687, 0.214459, 0.254803],
        [0.357432, 0.279729, 0.270896, 0.262603, 0.229778, 0.257351, 0.249855, 0.259950],
    ]
)


def _check_geometry(a: PlanarImage, b: PlanarImage) -> None:
    if (a.width, a.height, a.subsampling) != (b.width, b.height, b.subsampling):
        raise ValueError(
            f"geometry mismatch: {a.width}x{a.height}/{a.subsampling} vs "
            f"{b.width}x{b.height}/{b.subsampling}"
        )


def _mse_to_db(mse: float) -> float:
    if mse <= 0.0:
        return PSNR_CAP_DB
    return min(10.0 * math.log10(255.0**2 / mse), PSNR_CAP_DB)


def psnr(a: PlanarImage, b: PlanarImage, plane: str = "luma") -> float:
    """Peak signal-to-noise ratio in dB, capped at 99."""
    _check_geometry(a, b)
    if plane == "luma":
        pairs = [(a.planes[0], b.planes[0])]
    elif plane == "all":
        pairs = list(zip(a.planes, b.planes))
    else:
        raise ValueError(f"unknown plane selector {plane!r}")
    sse = 0.0
    count = 0
    for pa, pb in pairs:
        diff = pa.astype(np.float64) - pb.astype(np.float64)
        sse += float(np.sum(diff * diff))
        count += diff.size
    return _mse_to_db(sse / count)


def psnr_hvs(a: PlanarImage, b: PlanarImage) -> float:
    """PSNR with DCT-domain contrast-sensitivity weighting, luma only."""
    _check_geometry(a, b)
    ya = a.planes[0].astype(np.float64)
    yb = b.planes[0].astype(np.float64)
    h, w = ya.shape
    hh, ww = (h // 8) * 8, (w // 8) * 8
    if hh == 0 or ww == 0:
        raise ValueError("image smaller than one 8x8 block")
    diff = ya[:hh, :ww] - yb[:hh, :ww]
    blocks = diff.reshape(hh // 8, 8, ww // 8, 8).transpose(0, 2, 1, 3)
    m = dct_basis(8)
    coeffs = np.einsum("ij,abjk,lk->abil", m, blocks, m)
    weighted = (coeffs * CSF_8X8) ** 2
    mse = float(weighted.sum()) / (blocks.shape[0] * blocks.shape[1] * 64)
    return _mse_to_db(mse)


def _window_moments(x: np.ndarray, y: np.ndarray, size: int):
    """Box-window sums via integral images; exact for integer input."""

    def box(arr):
        c = np.zeros((arr.shape[0] + 1, arr.shape[1] + 1), dtype=np.float64)
        np.cumsum(np.cumsum(arr, axis=0, dtype=np.float64), axis=1, out=c[1:, 1:])
        return (
            c[size:, size:] - c[:-size, size:] - c[size:, :-size] + c[:-size, :-size]
        )

    return box(x), box(y), box(x * x), box(y * y), box(x * y)


def _ssim_from_planes(x: np.ndarray, y: np.ndarray, size: int = 8) -> float:
    if x.shape[0] < size or x.shape[1] < size:
        raise ValueError("image smaller than the SSIM window")
    c1 = (0.01 * 255) ** 2
    c2 = (0.03 * 255) ** 2
    n = size * size
    sx, sy, sxx, syy, sxy = _window_moments(x, y, size)
    mx = sx / n
    my = sy / n
    vx = sxx / n - mx * mx
    vy = syy / n - my * my
    cov = sxy / n - mx * my
    num = (2 * mx * my + c1) * (2 * cov + c2)
    den = (mx * mx + my * my + c1) * (vx + vy + c2)
    return float(np.mean(num / den))


def ssim(a: PlanarImage, b: PlanarImage) -> float:
    """Mean structural similarity over 8x8 box windows, luma only."""
    _check_geometry(a, b)
    return _ssim_from_planes(
        a.planes[0].astype(np.float64), b.planes[0].astype(np.float64)
    )


def _down2_int(plane: np.ndarray) -> np.ndarray:
    h, w = plane.shape
    if h % 2 or w % 2:
        plane = np.pad(plane, ((0, h % 2), (0, w % 2)), mode="edge")
    p = plane.astype(np.int64)
    return (p[0::2, 0::2] + p[0::2, 1::2] + p[1::2, 0::2] + p[1::2, 1::2] + 2) >> 2


def fast_ssim(a: PlanarImage, b: PlanarImage) -> float:
    """SSIM on 2x box-downsampled planes; the cheap approximation."""
    _check_geometry(a, b)
    return _ssim_from_planes(
        _down2_int(a.planes[0]).astype(np.float64),
        _down2_int(b.planes[0]).astype(np.float64),
    )


def compute_all_metrics(a: PlanarImage, b: PlanarImage) -> dict[str, float]:
    return {
        "psnr": psnr(a, b),
        "psnr_hvs": psnr_hvs(a, b),
        "ssim": ssim(a, b),
        "fast_ssim": fast_ssim(a, b),
    }


# -- RD curves -----------------------------------------------------------------


@dataclass
class RdPoint:
    bpp: float
    metrics: dict[str, float] = field(default_factory=dict)


class RdCurve:
    """Points of one codec configuration, sorted by ascending bpp."""

    def __init__(self, points: list[RdPoint]):
        for p in points:
            if p.bpp <= 0:
                raise ValueError(f"non-positive bpp {p.bpp}")
        self.points = sorted(points, key=lambda p: p.bpp)

    def __len__(self) -> int:
        return len(self.points)

    def bpp(self) -> np.ndarray:
        return np.array([p.bpp for p in self.points])

    def metric(self, name: str) -> np.ndarray:
        try:
            return np.array([p.metrics[name] for p in self.points])
        except KeyError:
            raise KeyError(f"curve has no metric {name!r}") from None

    def metric_names(self) -> list[str]:
        return sorted(self.points[0].metrics)


def _fit_log_rate(metric: np.ndarray, log_rate: np.ndarray, method: str):
    if method == "cubic":
        deg = min(3, len(metric) - 1)
        poly = np.polynomial.Polynomial.fit(metric, log_rate, deg)
        return poly.integ()
    if method == "pchip":
        from scipy.interpolate import PchipInterpolator

        order = np.argsort(metric)
        m, r = metric[order], log_rate[order]
        keep = np.concatenate([[True], np.diff(m) > 0])
        return PchipInterpolator(m[keep], r[keep]).antiderivative()
    raise ValueError(f"unknown BD-rate method {method!r}")


def bd_rate(ref: RdCurve, test: RdCurve, metric: str, method: str = "cubic", band=None) -> float:
    """Average rate difference (percent) of ``test`` against ``ref``.

    ``band`` optionally restricts the integration to qualities reachable
    within a bpp interval (see :data:`RATE_BANDS`).  Negative output means
    the test curve needs fewer bits at equal quality.
    """
    curves = []
    for curve in (ref, test):
        if len(curve) < 4:
            raise ValueError("BD-rate needs at least 4 points per curve")
        m = curve.metric(metric)
        if np.any(np.diff(m) < 0):
            warnings.warn(
                f"metric {metric} not monotone along the {len(m)}-point curve",
                stacklevel=2,
            )
        curves.append((m, np.log(curve.bpp())))

    lo = max(m.min() for m, _ in curves)
    hi = min(m.max() for m, _ in curves)
    if band is not None:
        bpp_lo, bpp_hi = band
        for (m, logr), curve in zip(curves, (ref, test)):
            bpp = curve.bpp()
            order = np.argsort(bpp)
            lo = max(lo, float(np.interp(bpp_lo, bpp[order], m[order])))
            hi = min(hi, float(np.interp(bpp_hi, bpp[order], m[order])))
    if not hi > lo:
        raise NoOverlapError(f"no common {metric} range to integrate over")

    ints = []
    for m, logr in curves:
        antiderivative = _fit_log_rate(m, logr, method)
        ints.append(antiderivative(hi) - antiderivative(lo))
    avg_diff = (ints[1] - ints[0]) / (hi - lo)
    avg_diff = min(avg_diff, 200.0)
    return (math.exp(avg_diff) - 1.0) * 100.0


# -- sweeps ---------------------------------------------------------------------


def _sweep_one(job):
    """Worker for one (image, q) cell; module level so pools can pickle it."""
    from . import codec
    from .image import read_y4m

    name, source, q, cfg_kwargs = job
    img = source if isinstance(source, PlanarImage) else read_y4m(source)
    cfg = codec.EncoderConfig(base_q=q, **cfg_kwargs)
    data = codec.encode_keyframe(img, cfg)
    recon = codec.decode_keyframe(data)
    row = {"image": name, "q": q, "bpp": 8.0 * len(data) / img.n_pixels}
    row.update(compute_all_metrics(img, recon))
    row["bytes"] = len(data)
    return row


def rd_sweep(corpus, q_list, jobs: int = 1, on_error: str = "record", **cfg_kwargs):
    """Encode/decode every corpus image at every quantizer and measure.

    ``corpus`` is a list of ``(name, PlanarImage-or-path)`` pairs.  Returns
    ``(curve, rows, errors)``: the per-q aggregated curve (mean bpp, mean
    metrics over images), the per-cell rows, and any per-file errors.
    """
    corpus = list(corpus)
    if not corpus:
        raise ValueError("empty corpus")
    jobs_list = [(name, src, q, cfg_kwargs) for name, src in corpus for q in q_list]
    rows = []
    errors = []
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_sweep_one, job) for job in jobs_list]
            for job, future in zip(jobs_list, futures):
                try:
                    rows.append(future.result())
                except Exception as exc:  # noqa: BLE001 - per-file errors are recorded
                    if on_error == "raise":
                        raise
                    errors.append((job[0], job[2], repr(exc)))
    else:
        for job in jobs_list:
            try:
                rows.append(_sweep_one(job))
            except Exception as exc:  # noqa: BLE001 - per-file errors are recorded
                if on_error == "raise":
                    raise
                errors.append((job[0], job[2], repr(exc)))
    curve = aggregate_rows(rows) if rows else None
    return curve, rows, errors


def aggregate_rows(rows) -> RdCurve:
    """Per-q mean of bpp and every metric across images."""
    by_q: dict[float, list[dict]] = {}
    for row in rows:
        by_q.setdefault(row["q"], []).append(row)
    points = []
    for q, group in sorted(by_q.items()):
        bpp = float(np.mean([r["bpp"] for r in group]))
        metrics = {
            name: float(np.mean([r[name] for r in group])) for name in METRIC_NAMES
        }
        points.append(RdPoint(bpp, metrics))
    return RdCurve(points)


RESULT_HEADER = ["image", "q", "bpp", "psnr", "psnr_hvs", "ssim", "fast_ssim", "bytes"]


def save_results(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULT_HEADER)
        for row in rows:
            writer.writerow([row[k] for k in RESULT_HEADER])


def import_external_curve(path) -> RdCurve:
    """Load an RD curve from a CSV of ``bpp,metric...`` rows.

    Accepts either a bare curve (``bpp`` plus metric columns) or this
    package's per-image sweep output, which is aggregated per q on load.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: line 1: empty results file") from None
        header = [h.strip() for h in header]
        if "bpp" not in header:
            raise ParseError(f"{path}: line 1: no 'bpp' column in header")
        rows = []
        for lineno, raw in enumerate(reader, start=2):
            if not raw or all(not cell.strip() for cell in raw):
                continue
            if len(raw) != len(header):
                raise ParseError(f"{path}: line {lineno}: expected {len(header)} columns")
            row = {}
            for key, cell in zip(header, raw):
                if key == "image":
                    row[key] = cell
                    continue
                try:
                    row[key] = float(cell)
                except ValueError:
                    raise ParseError(
                        f"{path}: line {lineno}: bad number {cell!r} in column {key}"
                    ) from None
            if row["bpp"] <= 0:
                raise ParseError(f"{path}: line {lineno}: non-positive bpp")
            rows.append(row)
    if not rows:
        raise ParseError(f"{path}: no data rows")
    if "image" in header or "q" in header:
        for row in rows:
            row.setdefault("q", 0.0)
        return aggregate_rows(rows)
    metric_cols = [h for h in header if h != "bpp"]
    points = [RdPoint(r["bpp"], {m: r[m] for m in metric_cols}) for r in rows]
    return RdCurve(points)


# -- SVG plotting -----------------------------------------------------------------


def write_rd_svg(curves: dict[str, RdCurve], metric: str, path, size=(640, 480)) -> None:
    """Plot RD curves (bpp on a log x-axis vs metric) as a standalone SVG."""
    w, h = size
    margin = 60
    palette = ("#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
    xs = np.concatenate([np.log(c.bpp()) for c in curves.values()])
    ys = np.concatenate([c.metric(metric) for c in curves.values()])
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    x1 = x1 if x1 > x0 else x0 + 1.0
    y1 = y1 if y1 > y0 else y0 + 1.0

    def sx(v):
        return margin + (v - x0) / (x1 - x0) * (w - 2 * margin)

    def sy(v):
        return h - margin - (v - y0) / (y1 - y0) * (h - 2 * margin)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}">',
        f'<rect width="{w}" height="{h}" fill="white"/>',
        f'<line x1="{margin}" y1="{h - margin}" x2="{w - margin}" y2="{h - margin}" stroke="black"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{h - margin}" stroke="black"/>',
        f'<text x="{w / 2:.0f}" y="{h - 15}" text-anchor="middle" font-size="14">bits per pixel (log scale)</text>',
        f'<text x="18" y="{h / 2:.0f}" text-anchor="middle" font-size="14" transform="rotate(-90 18 {h / 2:.0f})">{metric}</text>',
    ]
    for i, (name, curve) in enumerate(sorted(curves.items())):
        colour = palette[i % len(palette)]
        pts = " ".join(
            f"{sx(lx):.2f},{sy(m):.2f}"
            for lx, m in zip(np.log(curve.bpp()), curve.metric(metric))
        )
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{colour}" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{w - margin + 5}" y="{margin + 18 * i}" font-size="12" fill="{colour}">{name}</text>'
        )
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts))
