"""Luma/chroma conversion (BT.601 full-range) used by the color pipeline."""

import numpy as np

# RGB -> YCbCr weights, full range
_FWD = np.array([
    [0.299, 0.587, 0.114],
    [-0.168735891647856, -0.331264108352144, 0.5],
    [0.5, -0.418687589158345, -0.081312410841655],
])
_INV = np.linalg.inv(_FWD)


def chroma_offset(data_range=255.0):
    """Neutral chroma level: 128 for 8-bit data."""
    return (data_range + 1.0) / 2.0


def rgb_to_ycbcr(rgb, data_range=255.0):
    rgb = np.asarray(rgb, dtype=float)
    out = rgb @ _FWD.T
    out[..., 1] += chroma_offset(data_range)
    out[..., 2] += chroma_offset(data_range)
    return out


def ycbcr_to_rgb(ycc, data_range=255.0):
    ycc = np.asarray(ycc, dtype=float).copy()
    ycc[..., 1] -= chroma_offset(data_range)
    ycc[..., 2] -= chroma_offset(data_range)
    return ycc @ _INV.T
