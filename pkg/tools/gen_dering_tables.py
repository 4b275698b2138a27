#!/usr/bin/env python3
"""Regenerates the direction constants committed in src/dkf/dering.py.

For each of the 8 quantized directions (d * 22.5 degrees from horizontal,
array coordinates with y down) this emits:

  * the 8x8 table assigning every pixel to a pixel line along the direction
    (``k = y - round(x * tan)`` for horizontal-major directions,
    ``k = x - round(y * cot)`` transposed otherwise, shifted to start at 0)
  * the tap offsets ``(dx, dy)`` at distances 1..3 along the direction

Run:  python tools/gen_dering_tables.py
"""

import math


def round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def tables():
    line_tables = []
    offsets = []
    for d in range(8):
        theta = d * math.pi / 8
        tan = math.tan(theta)
        horizontal_major = abs(tan) <= 1.0
        if horizontal_major:
            slope = tan
            ids = [[y - round_half_up(x * slope) for x in range(8)] for y in range(8)]
            offs = [(i, round_half_up(i * slope)) for i in (1, 2, 3)]
        else:
            cot = math.cos(theta) / math.sin(theta)
            ids = [[x - round_half_up(y * cot) for x in range(8)] for y in range(8)]
            offs = [(round_half_up(i * cot), i) for i in (1, 2, 3)]
        base = min(min(row) for row in ids)
        ids = [[v - base for v in row] for row in ids]
        line_tables.append(ids)
        offsets.append(offs)
    return line_tables, offsets


def main():
    line_tables, offsets = tables()
    print("DIRECTION_LINES = (")
    for ids in line_tables:
        rows = ", ".join("(" + ", ".join(str(v) for v in row) + ")" for row in ids)
        print(f"    ({rows}),")
    print(")")
    print()
    print("DIRECTION_TAPS = (")
    for offs in offsets:
        print("    (" + ", ".join(str(o) for o in offs) + "),")
    print(")")


if __name__ == "__main__":
    main()
