"""
Same-size 2D convolution over H×W×C tensors.

Kernels are stored (kh, kw, c_in, c_out). Output square (r, c) reads input
rows r - top .. r - top + kh - 1 and columns c - left .. c - left + kw - 1,
with zeros outside the grid. Taps are accumulated in (row, col) order and
each tap contracts over input channels, so results are bit-stable.
"""

from typing import Optional, Tuple

import numpy as np

from ..errors import ShapeMismatch

Origin = Tuple[int, int]


def centered_origin(kh: int, kw: int) -> Origin:
    return (kh // 2, kw // 2)


def _check(x: np.ndarray, kernel: np.ndarray, bias: Optional[np.ndarray]) -> None:
    if x.ndim != 3:
        raise ShapeMismatch(f"Expected an H×W×C input, got shape {x.shape}")
    if kernel.ndim != 4:
        raise ShapeMismatch(f"Expected a (kh, kw, c_in, c_out) kernel, got shape {kernel.shape}")
    if kernel.shape[2] != x.shape[2]:
        raise ShapeMismatch(f"Kernel expects {kernel.shape[2]} input channels, input has {x.shape[2]}")
    if bias is not None and bias.shape != (kernel.shape[3],):
        raise ShapeMismatch(f"Bias shape {bias.shape} does not match {kernel.shape[3]} output channels")


def _padded(x: np.ndarray, kh: int, kw: int, origin: Origin) -> np.ndarray:
    top, left = origin
    return np.pad(x, ((top, kh - 1 - top), (left, kw - 1 - left), (0, 0)))


def conv2d(
    x: np.ndarray,
    kernel: np.ndarray,
    bias: Optional[np.ndarray] = None,
    origin: Optional[Origin] = None,
) -> np.ndarray:
    """
    Zero-padded, stride-1 convolution keeping the spatial size.

    Args:
        x: Input of shape (H, W, c_in)
        kernel: Weights of shape (kh, kw, c_in, c_out)
        bias: Optional per-output-channel bias
        origin: (top, left) padding; centered for odd kernels when omitted

    Returns:
        Output of shape (H, W, c_out)
    """
    _check(x, kernel, bias)
    kh, kw, _, c_out = kernel.shape
    if origin is None:
        origin = centered_origin(kh, kw)
    height, width = x.shape[:2]
    padded = _padded(x, kh, kw, origin)
    out = np.zeros((height, width, c_out), dtype=np.float64)
    for u in range(kh):
        for v in range(kw):
            out += np.einsum("hwi,io->hwo", padded[u : u + height, v : v + width], kernel[u, v])
    if bias is not None:
        out += bias
    return out


def conv2d_per_input(x: np.ndarray, kernel: np.ndarray, origin: Optional[Origin] = None) -> np.ndarray:
    """
    Contribution of every input channel separately.

    Returns an array of shape (c_in, H, W, c_out) whose sum over the first
    axis equals conv2d(x, kernel) without bias.
    """
    _check(x, kernel, None)
    kh, kw, c_in, c_out = kernel.shape
    if origin is None:
        origin = centered_origin(kh, kw)
    height, width = x.shape[:2]
    padded = _padded(x, kh, kw, origin)
    out = np.zeros((c_in, height, width, c_out), dtype=np.float64)
    for u in range(kh):
        for v in range(kw):
            out += np.einsum("hwi,io->ihwo", padded[u : u + height, v : v + width], kernel[u, v])
    return out


def compose_kernels(first: np.ndarray, second: np.ndarray) -> np.ndarray:
    """
    Kernel equal to applying ``first`` then ``second`` (full composition).

    With first of extent k1 and second of extent k2 the result has extent
    k1 + k2 - 1; the result's window offset is the sum of both offsets.
    """
    k1h, k1w, c_in, c_mid = first.shape
    k2h, k2w, c_mid2, c_out = second.shape
    if c_mid != c_mid2:
        raise ShapeMismatch(f"Cannot compose kernels with {c_mid} and {c_mid2} middle channels")
    out = np.zeros((k1h + k2h - 1, k1w + k2w - 1, c_in, c_out), dtype=np.float64)
    for a in range(k2h):
        for b in range(k2w):
            out[a : a + k1h, b : b + k1w] += np.einsum("uvim,mo->uvio", first, second[a, b])
    return out


def sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))
