"""Frequency-domain prediction: H/V intra, chroma-from-luma, DC.

All predictors are pure functions of previously reconstructed data, so the
decoder reproduces the encoder's references exactly.
"""

from __future__ import annotations

import enum

import numpy as np


class IntraMode(enum.IntEnum):
    NONE = 0
    HORIZONTAL = 1
    VERTICAL = 2


def intra_predict(mode: IntraMode, left, above, size: int) -> np.ndarray:
    """Predict a coefficient block from a same-size coded neighbour.

    Vertical copies the first row of the block above, horizontal the first
    column of the block to the left; everything else, including DC, is zero.
    """
    pred = np.zeros((size, size))
    if mode == IntraMode.NONE:
        return pred
    if mode == IntraMode.VERTICAL:
        src = above
    elif mode == IntraMode.HORIZONTAL:
        src = left
    else:
        raise ValueError(f"unknown intra mode {mode}")
    if src is None:
        raise ValueError(f"intra mode {mode.name} requires a missing neighbour")
    if src.shape != (size, size):
        raise ValueError(f"neighbour shape {src.shape} does not match size {size}")
    if mode == IntraMode.VERTICAL:
        pred[0, 1:] = src[0, 1:]
    else:
        pred[1:, 0] = src[1:, 0]
    return pred


def cfl_reference(luma_coeffs, chroma_size: int) -> np.ndarray:
    """Build the chroma prediction reference from reconstructed luma.

    At 4:4:4 the co-sited luma block is used verbatim; at 4:2:0 a luma block
    of twice the chroma size contributes its low-frequency quadrant.  For a
    64x64 luma leaf only the coded low quadrant exists, which is exactly the
    32x32 the chroma block needs.  Any other alignment yields a zero
    reference, which downgrades the band to plain (no-reference) coding.
    The DC coefficient is excluded; gain and sign are left to the band
    quantizer's reference mode.
    """
    ref = np.zeros((chroma_size, chroma_size))
    if luma_coeffs is None:
        return ref
    if luma_coeffs.shape == (chroma_size, chroma_size):
        ref[:, :] = luma_coeffs
    elif luma_coeffs.shape == (2 * chroma_size, 2 * chroma_size):
        ref[:, :] = luma_coeffs[:chroma_size, :chroma_size]
    else:
        return ref
    ref[0, 0] = 0.0
    return ref


def dc_predict(left_dc, above_dc, neutral: int = 0) -> int:
    """Predict a superblock root DC from its decoded neighbours.

    Falls back to ``neutral`` (the mid-gray DC for the plane) when no
    neighbour exists; a single neighbour is used as is; two neighbours
    average with floor rounding.
    """
    if left_dc is None and above_dc is None:
        return neutral
    if left_dc is None:
        return above_dc
    if above_dc is None:
        return left_dc
    return (left_dc + above_dc) // 2
