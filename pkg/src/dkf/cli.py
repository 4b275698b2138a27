"""Command-line front end.

Verbs: ``encode``, ``decode``, ``dering``, ``metrics``, ``rd-sweep``,
``bdrate``, ``info``.  Exit codes: 0 success, 1 usage error, 2 data error.
All verbs are deterministic; identical invocations produce byte-identical
outputs (the ``DKF_SEED`` environment variable is reserved for harness
verbs that generate randomized data, none of which currently do).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import codec, dering, image, metrics
from .entropy import Partition
from .errors import DkfError


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dkf", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("encode", help="encode a y4m image to a .dkf bitstream")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("-q", "--quantizer", type=int, required=True, metavar="N")
    p.add_argument("--legacy-ec", action="store_true", help="use the legacy partition function")
    p.add_argument("--no-dering", action="store_true", help="disable the deringing post-filter")

    p = sub.add_parser("decode", help="decode a .dkf bitstream to y4m")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("dering", help="run the deringing filter on a y4m frame")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("-T", "--threshold", type=int, required=True)

    p = sub.add_parser("metrics", help="print quality metrics between two y4m images")
    p.add_argument("-a", required=True)
    p.add_argument("-b", required=True)

    p = sub.add_parser("rd-sweep", help="encode a corpus over a quantizer list")
    p.add_argument("--corpus", required=True, help="directory of y4m/png images")
    p.add_argument("--q", required=True, help="comma-separated quantizer list")
    p.add_argument("--out", required=True, help="CSV results path")
    p.add_argument("--no-dering", action="store_true")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--svg", help="also plot the aggregated curve as SVG")

    p = sub.add_parser("bdrate", help="BD-rate between two result files")
    p.add_argument("--ref", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--metric", default="psnr", choices=metrics.METRIC_NAMES)
    p.add_argument("--band", choices=sorted(metrics.RATE_BANDS))
    p.add_argument("--method", default="cubic", choices=("cubic", "pchip"))

    p = sub.add_parser("info", help="print .dkf header fields")
    p.add_argument("bitstream")
    return parser


def _cmd_encode(args) -> int:
    img = image.read_y4m(args.input)
    cfg = codec.EncoderConfig(
        base_q=args.quantizer,
        partition=Partition.LEGACY if args.legacy_ec else Partition.REDUCED,
        dering_enabled=not args.no_dering,
    )
    Path(args.output).write_bytes(codec.encode_keyframe(img, cfg))
    return 0


def _cmd_decode(args) -> int:
    img = codec.decode_keyframe(Path(args.input).read_bytes())
    image.write_y4m(img, args.output)
    return 0


def _cmd_dering(args) -> int:
    img = image.read_y4m(args.input)
    planes = dering.dering_frame(
        tuple(p.astype(np.int64) for p in img.planes), img.subsampling, args.threshold
    )
    out = image.PlanarImage(
        img.width,
        img.height,
        img.subsampling,
        tuple(np.clip(p, 0, 255).astype(np.uint8) for p in planes),
    )
    image.write_y4m(out, args.output)
    return 0


def _cmd_metrics(args) -> int:
    a = image.read_y4m(args.a)
    b = image.read_y4m(args.b)
    for name, value in metrics.compute_all_metrics(a, b).items():
        unit = " dB" if name.startswith("psnr") else ""
        print(f"{name}: {value:.4f}{unit}")
    return 0


def _corpus_entries(directory: str):
    root = Path(directory)
    if not root.is_dir():
        raise DkfError(f"corpus directory {directory!r} does not exist")
    entries = []
    for path in sorted(root.iterdir()):
        if path.suffix.lower() == ".y4m":
            entries.append((path.name, path))
        elif path.suffix.lower() == ".png":
            entries.append((path.name, image.read_png(path)))
    if not entries:
        raise DkfError(f"no y4m/png images in {directory!r}")
    return entries


def _cmd_rd_sweep(args) -> int:
    try:
        q_list = [int(tok) for tok in args.q.split(",") if tok]
    except ValueError:
        raise _UsageError(f"bad quantizer list {args.q!r}") from None
    if not q_list:
        raise _UsageError("empty quantizer list")
    curve, rows, errors = metrics.rd_sweep(
        _corpus_entries(args.corpus),
        q_list,
        jobs=args.jobs,
        dering_enabled=not args.no_dering,
    )
    metrics.save_results(rows, args.out)
    for name, q, err in errors:
        print(f"error: {name} q={q}: {err}", file=sys.stderr)
    if args.svg and curve is not None:
        metrics.write_rd_svg({"dkf": curve}, "psnr", args.svg)
    print(f"{len(rows)} points -> {args.out}")
    return 0 if not errors else 2


def _cmd_bdrate(args) -> int:
    ref = metrics.import_external_curve(args.ref)
    test = metrics.import_external_curve(args.test)
    band = metrics.RATE_BANDS[args.band] if args.band else None
    value = metrics.bd_rate(ref, test, args.metric, method=args.method, band=band)
    if abs(value) < 0.05:
        value = 0.0
    print(f"{value:.1f}%")
    return 0


def _cmd_info(args) -> int:
    info = codec.bitstream_info(Path(args.bitstream).read_bytes())
    for key in ("width", "height", "subsampling", "partition", "base_q", "dering", "payload_bytes"):
        value = info[key]
        if key == "partition":
            value = value.name.lower()
        print(f"{key}: {value}")
    return 0


_COMMANDS = {
    "encode": _cmd_encode,
    "decode": _cmd_decode,
    "dering": _cmd_dering,
    "metrics": _cmd_metrics,
    "rd-sweep": _cmd_rd_sweep,
    "bdrate": _cmd_bdrate,
    "info": _cmd_info,
}


def run(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.verb](args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (DkfError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
