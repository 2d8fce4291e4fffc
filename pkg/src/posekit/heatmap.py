"""Heatmap target encoding, gaussian smoothing, arg-max decoding and PKHM files."""
from __future__ import annotations

import math
import struct
from pathlib import Path
from typing import BinaryIO

import numpy as np

from .skeleton import NUM_KEYPOINTS, BoundingBox, KeypointSigmas, Skeleton

HEATMAP_MAGIC = b"PKHM"


def encode_target(
    s: Skeleton,
    b: BoundingBox,
    sig: KeypointSigmas,
    out_w: int,
    out_h: int,
    amplitude_scale: float = 1.0,
    sigma_scale: float = 1.0,
) -> np.ndarray:
    """Encode a skeleton as a (25, out_h, out_w) stack of gaussian peaks.

    Skeleton coordinates and the box are expected in the grid frame (one unit
    per cell).  Channel i carries a gaussian with standard deviation
    sigma_scale * kappa_i * sqrt(box area), centered on the cell nearest the
    keypoint so the peak equals amplitude_scale exactly; peaks falling outside
    the grid are clamped to the border cell.  Unlabeled keypoints yield
    all-zero channels.
    """
    if not 0 < amplitude_scale <= 1.0:
        raise ValueError(f"amplitude_scale must be in (0, 1], got {amplitude_scale}")
    if out_w <= 0 or out_h <= 0:
        raise ValueError(f"grid dimensions must be positive, got {out_w}x{out_h}")
    s = _require_25(s)
    scale = sigma_scale * math.sqrt(b.area)
    ys = np.arange(out_h, dtype=np.float64)[:, None]
    xs = np.arange(out_w, dtype=np.float64)[None, :]
    stack = np.zeros((NUM_KEYPOINTS, out_h, out_w), dtype=np.float32)
    for i in range(NUM_KEYPOINTS):
        x, y, v = s.pts[i]
        if v <= 0:
            continue
        cx = min(max(int(round(x)), 0), out_w - 1)
        cy = min(max(int(round(y)), 0), out_h - 1)
        sigma = sig.values[i] * scale
        g = np.exp(-((xs - cx) ** 2 + (ys - cy) ** 2) / (2.0 * sigma * sigma))
        stack[i] = amplitude_scale * g
        stack[i, cy, cx] = amplitude_scale
    return stack


def gaussian_kernel_1d(sigma_px: float) -> np.ndarray:
    """Unit-sum gaussian kernel truncated at radius ceil(3 * sigma_px)."""
    if sigma_px <= 0:
        raise ValueError(f"sigma_px must be positive, got {sigma_px}")
    radius = math.ceil(3.0 * sigma_px)
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-0.5 * (xs / sigma_px) ** 2)
    return kernel / kernel.sum()


def _convolve_1d_replicate(values: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    radius = (kernel.size - 1) // 2
    padding = [(0, 0), (0, 0)]
    padding[axis] = (radius, radius)
    padded = np.pad(values, padding, mode="edge")
    out = np.zeros_like(values, dtype=np.float64)
    length = values.shape[axis]
    for offset, weight in enumerate(kernel):
        sl = [slice(None), slice(None)]
        sl[axis] = slice(offset, offset + length)
        out += weight * padded[tuple(sl)]
    return out


def gaussian_smooth(h: np.ndarray, sigma_px: float = 1.0) -> np.ndarray:
    """Separable gaussian blur with edge replication at the borders."""
    h = np.asarray(h, dtype=np.float64)
    if h.ndim != 2:
        raise ValueError(f"heatmap must be 2D, got shape {h.shape}")
    kernel = gaussian_kernel_1d(sigma_px)
    smoothed = _convolve_1d_replicate(h, kernel, axis=0)
    return _convolve_1d_replicate(smoothed, kernel, axis=1)


def decode_keypoints(hs: np.ndarray, smooth_sigma: float = 1.0) -> Skeleton:
    """Decode a (25, H, W) stack back to keypoints at arg-max cell centers.

    Each channel is smoothed (skipped when smooth_sigma <= 0), then the
    maximum cell becomes (x, y) with v = 2; ties resolve to the smallest
    row-major index.  All-zero channels decode to the tie-break cell (0, 0);
    callers may threshold on peak value separately.
    """
    hs = np.asarray(hs)
    if hs.ndim != 3:
        raise ValueError(f"heatmap stack must be 3D, got shape {hs.shape}")
    n_channels, height, width = hs.shape
    out = np.zeros((n_channels, 3))
    for i in range(n_channels):
        channel = hs[i]
        if smooth_sigma > 0:
            channel = gaussian_smooth(channel, smooth_sigma)
        flat_idx = int(np.argmax(channel))
        out[i] = (flat_idx % width, flat_idx // width, 2)
    return Skeleton(out)


def write_heatmap_stack(hs: np.ndarray, destination: str | Path | BinaryIO) -> None:
    """Serialize a stack as PKHM: magic, u32 channels/width/height, f32 LE data."""
    hs = np.ascontiguousarray(hs, dtype="<f4")
    if hs.ndim != 3:
        raise ValueError(f"heatmap stack must be 3D, got shape {hs.shape}")
    channels, height, width = hs.shape
    header = HEATMAP_MAGIC + struct.pack("<III", channels, width, height)
    payload = header + hs.tobytes(order="C")
    if hasattr(destination, "write"):
        destination.write(payload)
    else:
        Path(destination).write_bytes(payload)


def read_heatmap_stack(source: str | Path | bytes) -> np.ndarray:
    """Load a PKHM file; truncated or mislabeled input raises ValueError."""
    data = source if isinstance(source, bytes) else Path(source).read_bytes()
    if len(data) < 16:
        raise ValueError(f"PKHM header truncated: {len(data)} bytes")
    if data[:4] != HEATMAP_MAGIC:
        raise ValueError(f"bad magic {data[:4]!r}, expected {HEATMAP_MAGIC!r}")
    channels, width, height = struct.unpack("<III", data[4:16])
    expected = 16 + channels * width * height * 4
    if len(data) != expected:
        raise ValueError(f"PKHM payload truncated: expected {expected} bytes, got {len(data)}")
    values = np.frombuffer(data, dtype="<f4", offset=16)
    return values.reshape(channels, height, width).copy()


def _require_25(s: Skeleton) -> Skeleton:
    if s.num_keypoints != NUM_KEYPOINTS:
        raise ValueError(f"expected a {NUM_KEYPOINTS}-keypoint skeleton, got {s.num_keypoints}")
    return s
