"""Separable linear resampling shared by augmentation, scoring and post-processing.

Resize and pooling kernels are materialized as explicit row-stochastic
matrices, so the transpose of the forward matrix is an exact adjoint and
gradient propagation through any resample is a plain matrix product.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=512)
def bilinear_matrix(n_out: int, n_in: int) -> np.ndarray:
    """Dense (n_out, n_in) bilinear interpolation matrix, half-pixel centers.

    Every row is a convex combination of at most two adjacent source
    samples, so applying the matrix cannot leave the source value range.
    The result is cached and write-protected; copy before mutating.
    """
    if n_out < 1 or n_in < 1:
        raise ValueError(f"resize needs positive sizes, got {n_out}x{n_in}")
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1.0)
    lo = np.floor(src).astype(int)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = src - lo
    mat = np.zeros((n_out, n_in))
    rows = np.arange(n_out)
    mat[rows, lo] = 1.0 - frac
    mat[rows, hi] += frac
    mat.flags.writeable = False
    return mat


@lru_cache(maxsize=512)
def average_pool_matrix(n_out: int, n_in: int) -> np.ndarray:
    """Dense (n_out, n_in) area-overlap averaging matrix.

    Output cell j averages the source interval [j*n_in/n_out, (j+1)*n_in/n_out),
    weighting fractional end pixels by their overlap, so rows sum to one for
    any size pair with n_in >= n_out.
    """
    if n_out < 1 or n_in < n_out:
        raise ValueError(f"pooling needs n_in >= n_out >= 1, got {n_out}x{n_in}")
    step = n_in / n_out
    mat = np.zeros((n_out, n_in))
    for j in range(n_out):
        a, b = j * step, (j + 1) * step
        first, last = int(np.floor(a)), int(np.ceil(b)) - 1
        for i in range(first, min(last, n_in - 1) + 1):
            overlap = min(b, i + 1) - max(a, i)
            if overlap > 0:
                mat[j, i] = overlap / step
    mat.flags.writeable = False
    return mat


def apply_separable(image: np.ndarray, row_op: np.ndarray, col_op: np.ndarray) -> np.ndarray:
    """Apply operator matrices along the leading two axes of (H, W[, C]) data.

    Computes row_op @ image @ col_op.T per trailing channel. Passing the
    transposed matrices of a forward resample backpropagates a gradient
    through it exactly.
    """
    out = np.tensordot(row_op, image, axes=(1, 0))
    out = np.moveaxis(np.tensordot(col_op, out, axes=(1, 1)), 0, 1)
    return out


def resize_bilinear(image: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear-resize an (H, W[, C]) grid to (out_h, out_w[, C])."""
    in_h, in_w = image.shape[:2]
    if (out_h, out_w) == (in_h, in_w):
        return image.copy()
    return apply_separable(image, bilinear_matrix(out_h, in_h), bilinear_matrix(out_w, in_w))
