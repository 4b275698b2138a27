#!/usr/bin/env python3
"""Searches the lapping lifting multipliers committed in src/dkf/transform.py.

Models the linearised pre-filter + blocked DCT chain on an AR(0.95) source
and maximises its biorthogonal coding gain over integer lifting multipliers
(P, Q) at the committed shift.  The central block of a long signal is scored
so unlapped picture borders do not bias the result.

Run:  python tools/tune_lapping.py
"""

import numpy as np

SHIFT = 6
BLOCK = 8
BLOCKS = 8
RHO = 0.95


def dct_matrix(n):
    k = np.arange(n)[:, None]
    i = np.arange(n)[None, :]
    m = np.cos(np.pi * k * (2 * i + 1) / (2 * n)) * np.sqrt(2.0 / n)
    m[0] *= np.sqrt(0.5)
    return m


def prefilter_operator(length, p, q):
    """Linearised 4-point boundary filter at every interior block edge."""
    full = np.eye(length)
    lift = np.array([[1.0, q], [0.0, 1.0]]) @ np.array([[1.0, 0.0], [p, 1.0]])
    split = np.array(
        [[0.5, 0.0, 0.0, 0.5], [0.0, 0.5, 0.5, 0.0], [1.0, 0.0, 0.0, -1.0], [0.0, 1.0, -1.0, 0.0]]
    )
    merge = np.array(
        [[1.0, 0.0, 0.5, 0.0], [0.0, 1.0, 0.0, 0.5], [0.0, 1.0, 0.0, -0.5], [1.0, 0.0, -0.5, 0.0]]
    )
    local = merge @ np.block([[np.eye(2), np.zeros((2, 2))], [np.zeros((2, 2)), lift]]) @ split
    for b in range(BLOCK, length, BLOCK):
        step = np.eye(length)
        idx = [b - 2, b - 1, b, b + 1]
        step[np.ix_(idx, idx)] = local
        full = step @ full
    return full


def coding_gain(p, q):
    length = BLOCK * BLOCKS
    analysis = np.kron(np.eye(BLOCKS), dct_matrix(BLOCK)) @ prefilter_operator(length, p, q)
    synthesis = np.linalg.inv(analysis)
    corr = RHO ** np.abs(np.subtract.outer(np.arange(length), np.arange(length)))
    variances = np.diag(analysis @ corr @ analysis.T)
    norms = np.sum(synthesis * synthesis, axis=0)
    centre = (BLOCKS // 2) * BLOCK
    sel = slice(centre, centre + BLOCK)
    return -10.0 / BLOCK * np.sum(np.log10(variances[sel] * norms[sel]))


def main():
    print(f"plain blocked DCT: {coding_gain(0.0, 0.0):.4f} dB")
    best = None
    for pp in range(-64, 65, 2):
        for qq in range(-64, 65, 2):
            g = coding_gain(pp / 2**SHIFT, qq / 2**SHIFT)
            if best is None or g > best[0]:
                best = (g, pp, qq)
    g0, p0, q0 = best
    for pp in range(p0 - 3, p0 + 4):
        for qq in range(q0 - 3, q0 + 4):
            g = coding_gain(pp / 2**SHIFT, qq / 2**SHIFT)
            if g > best[0]:
                best = (g, pp, qq)
    print(f"best: LAP_P={best[1]} LAP_Q={best[2]} LAP_SHIFT={SHIFT}  ({best[0]:.4f} dB)")


if __name__ == "__main__":
    main()
