"""Numerical kernels: resampling, convolution, pooling, distance transform, splatting.

Storage is 32-bit; every kernel computes in 64-bit and rounds once on output.
"""
import logging
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import ndimage

from panopyr.pixelgrid import (
    ACCUMULATOR_DTYPE,
    BinaryMask,
    LabelGrid,
    Tensor3,
)


LOGGER = logging.getLogger(__name__)

GAUSSIAN_TRUNCATE = 3.0


def _source_coordinates(src: int, dst: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Half-pixel-center source coordinates for resampling `src` samples onto `dst`."""
    coords = (np.arange(dst, dtype=ACCUMULATOR_DTYPE) + 0.5) * (src / dst) - 0.5
    coords = np.clip(coords, 0.0, src - 1)
    lower = np.floor(coords).astype(np.intp)
    upper = np.minimum(lower + 1, src - 1)
    return lower, upper, coords - lower


def bilinear_resize(t: Tensor3, out_h: int, out_w: int) -> Tensor3:
    """Resample every channel bilinearly with the half-pixel-center convention.

    The source coordinate of output pixel `i` is `(i + 0.5) * src / dst - 0.5`, clamped
    to the valid range, so no corner alignment takes place.

    Args:
        t: Input tensor.
        out_h: Output height.
        out_w: Output width.

    Returns:
        Tensor3: Tensor of shape `(C, out_h, out_w)`.

    Raises:
        ValueError: On a zero-sized input or non-positive output size.
    """
    if out_h < 1 or out_w < 1:
        raise ValueError(f"Output size must be at least 1x1, got {out_h}x{out_w}")
    if t.height == 0 or t.width == 0 or t.channels == 0:
        raise ValueError(f"Cannot resize a zero-sized tensor of shape {t.shape}")
    if (out_h, out_w) == (t.height, t.width):
        return Tensor3(t.data.copy())

    data = t.data.astype(ACCUMULATOR_DTYPE)
    r0, r1, fr = _source_coordinates(t.height, out_h)
    c0, c1, fc = _source_coordinates(t.width, out_w)

    top = data[:, r0, :]
    rows = top + fr[None, :, None] * (data[:, r1, :] - top)
    left = rows[:, :, c0]
    out = left + fc[None, None, :] * (rows[:, :, c1] - left)
    return Tensor3(out)


def conv2d(
    input: Tensor3,
    weights: np.ndarray,
    bias: Optional[np.ndarray] = None,
    stride: int = 1,
    zero_padding: int = 0,
) -> Tensor3:
    """2-D cross-correlation with zero padding.

    Args:
        input: Tensor of shape `(in_ch, H, W)`.
        weights: Array of shape `(out_ch, in_ch, kh, kw)` with odd `kh`, `kw`.
        bias (optional): Vector of length `out_ch`; zeros when omitted.
        stride (optional): Step between output samples.
        zero_padding (optional): Zero rows/columns added on every side.

    Returns:
        Tensor3: Tensor of shape `(out_ch, floor((H + 2p - kh)/s) + 1, ...)`.

    Raises:
        ValueError: On a channel mismatch, an even kernel or a kernel larger than the
            padded input.
    """
    w = np.asarray(weights, dtype=ACCUMULATOR_DTYPE)
    if w.ndim != 4:
        raise ValueError(f"Weights must have 4 axes (out, in, kh, kw), got {w.shape}")
    out_ch, in_ch, kh, kw = w.shape
    if in_ch != input.channels:
        raise ValueError(
            f"Weights expect {in_ch} input channels, tensor has {input.channels}"
        )
    if kh % 2 == 0 or kw % 2 == 0:
        raise ValueError(f"Kernel size must be odd, got {kh}x{kw}")
    if stride < 1 or zero_padding < 0:
        raise ValueError(f"Invalid stride {stride} or padding {zero_padding}")
    b = (
        np.zeros(out_ch, dtype=ACCUMULATOR_DTYPE)
        if bias is None
        else np.asarray(bias, dtype=ACCUMULATOR_DTYPE).reshape(-1)
    )
    if b.shape[0] != out_ch:
        raise ValueError(f"Bias has {b.shape[0]} entries, expected {out_ch}")

    pad = zero_padding
    x = np.pad(input.data.astype(ACCUMULATOR_DTYPE), ((0, 0), (pad, pad), (pad, pad)))
    if kh > x.shape[1] or kw > x.shape[2]:
        raise ValueError(
            f"Kernel {kh}x{kw} is larger than the padded input {x.shape[1]}x{x.shape[2]}"
        )
    windows = sliding_window_view(x, (kh, kw), axis=(1, 2))[:, ::stride, ::stride]
    out = np.tensordot(w, windows, axes=([1, 2, 3], [0, 3, 4]))
    out += b[:, None, None]
    return Tensor3(out)


def max_pool2d(t: Tensor3, kernel: int = 3, stride: int = 2, padding: int = 1) -> Tensor3:
    """Per-channel window maximum; padding never wins the maximum."""
    if padding >= kernel:
        raise ValueError(f"Padding {padding} must be smaller than the kernel {kernel}")
    x = np.pad(
        t.data,
        ((0, 0), (padding, padding), (padding, padding)),
        constant_values=-np.inf,
    )
    if kernel > x.shape[1] or kernel > x.shape[2]:
        raise ValueError(f"Pooling window {kernel} exceeds padded input {x.shape[1:]}")
    windows = sliding_window_view(x, (kernel, kernel), axis=(1, 2))[:, ::stride, ::stride]
    return Tensor3(windows.max(axis=(3, 4)))


def distance_transform(mask: BinaryMask) -> Tensor3:
    """Exact Euclidean distance from every true pixel to the nearest false pixel.

    Pixels outside the image count as false, so the image border is exterior.

    Args:
        mask: Foreground mask.

    Returns:
        Tensor3: One channel; false pixels hold 0.
    """
    padded = np.pad(np.asarray(mask, dtype=bool), 1, constant_values=False)
    dist = ndimage.distance_transform_edt(padded)[1:-1, 1:-1]
    return Tensor3(dist[None])


def gaussian_splat(
    points: Iterable[Sequence[float]], sigma: float, h: int, w: int
) -> Tensor3:
    """Peak-normalized Gaussian bumps, max-combined across points.

    `heatmap(p) = max_k exp(-|p - point_k|^2 / (2 sigma^2))`, set to 0 beyond 3 sigma.

    Args:
        points: `(row, col)` positions in pixel coordinates (pixel centers at integers).
        sigma: Standard deviation in pixels.
        h: Output height.
        w: Output width.

    Returns:
        Tensor3: One channel with values in [0, 1].

    Raises:
        ValueError: If sigma is not positive.
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    heat = np.zeros((h, w), dtype=ACCUMULATOR_DTYPE)
    radius = GAUSSIAN_TRUNCATE * sigma
    for row, col in points:
        r_lo, r_hi = max(int(np.floor(row - radius)), 0), min(int(np.ceil(row + radius)), h - 1)
        c_lo, c_hi = max(int(np.floor(col - radius)), 0), min(int(np.ceil(col + radius)), w - 1)
        if r_lo > r_hi or c_lo > c_hi:
            continue
        dr = np.arange(r_lo, r_hi + 1, dtype=ACCUMULATOR_DTYPE)[:, None] - row
        dc = np.arange(c_lo, c_hi + 1, dtype=ACCUMULATOR_DTYPE)[None, :] - col
        d2 = dr ** 2 + dc ** 2
        bump = np.exp(-d2 / (2.0 * sigma ** 2))
        bump[d2 > radius ** 2] = 0.0
        window = heat[r_lo : r_hi + 1, c_lo : c_hi + 1]
        np.maximum(window, bump, out=window)
    return Tensor3(heat[None])


def argmax_channel(logits: Tensor3) -> LabelGrid:
    """Index of the maximal channel per pixel; ties go to the lowest channel."""
    if logits.channels < 1:
        raise ValueError("argmax_channel needs at least one channel")
    return LabelGrid(np.argmax(logits.data, axis=0))
