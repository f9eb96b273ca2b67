"""Raster preprocessing, oriented patch extraction, and object-size estimation.

Rasters are numpy arrays of shape (height, width, channels) with float32
values in [0, 1] and channels in {1, 3}.  The resampling inner loops exist in
numba and pure-NumPy versions; :mod:`psograsp.accel` picks the active one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import accel
from .geometry import GraspRect, corners

CROP_SIZE = 300
NET_INPUT_SIZE = 224
PATCH_SIZE = 24

# Default candidate-size intervals, used when no object-scale estimate is
# available.  They bound the gripper opening and jaw length in pixels.
DEFAULT_W_RANGE = (30.0, 100.0)
DEFAULT_H_RANGE = (10.0, 70.0)


class TooSmallError(ValueError):
    """Input image is smaller than the preprocessing crop window."""


class OutOfBoundsError(ValueError):
    """A rectangle corner falls outside the image."""


class NoForegroundError(ValueError):
    """Gray histogram shows no usable foreground region."""


def validate_raster(img: np.ndarray) -> None:
    if img.ndim != 3 or img.shape[2] not in (1, 3):
        raise ValueError(f"raster must be (H, W, 1|3), got shape {img.shape}")


# ---------------------------------------------------------------------------
# Bilinear kernels (numba + numpy fallback)
# ---------------------------------------------------------------------------


def _resize_bilinear_np(img: np.ndarray, oh: int, ow: int) -> np.ndarray:
    h, w = img.shape[:2]
    sy = np.clip((np.arange(oh, dtype=np.float64) + 0.5) * (h / oh) - 0.5, 0.0, h - 1.0)
    sx = np.clip((np.arange(ow, dtype=np.float64) + 0.5) * (w / ow) - 0.5, 0.0, w - 1.0)
    y0 = np.minimum(sy.astype(np.int64), h - 2) if h > 1 else np.zeros(oh, np.int64)
    x0 = np.minimum(sx.astype(np.int64), w - 2) if w > 1 else np.zeros(ow, np.int64)
    fy = (sy - y0)[:, None, None]
    fx = (sx - x0)[None, :, None]
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    data = img.astype(np.float64)
    top = data[y0][:, x0] * (1 - fx) + data[y0][:, x1] * fx
    bot = data[y1][:, x0] * (1 - fx) + data[y1][:, x1] * fx
    return (top * (1 - fy) + bot * fy).astype(np.float32)


if accel.HAS_NUMBA:
    from numba import njit

    @njit(cache=True, nogil=True)
    def _resize_bilinear_nb(img, out):  # pragma: no cover - exercised via wrapper
        h, w, c = img.shape
        oh, ow, _ = out.shape
        for i in range(oh):
            sy = (i + 0.5) * (h / oh) - 0.5
            if sy < 0.0:
                sy = 0.0
            if sy > h - 1.0:
                sy = h - 1.0
            y0 = int(sy)
            if y0 > h - 2:
                y0 = h - 2 if h > 1 else 0
            fy = sy - y0
            y1 = min(y0 + 1, h - 1)
            for j in range(ow):
                sx = (j + 0.5) * (w / ow) - 0.5
                if sx < 0.0:
                    sx = 0.0
                if sx > w - 1.0:
                    sx = w - 1.0
                x0 = int(sx)
                if x0 > w - 2:
                    x0 = w - 2 if w > 1 else 0
                fx = sx - x0
                x1 = min(x0 + 1, w - 1)
                for k in range(c):
                    top = img[y0, x0, k] * (1 - fx) + img[y0, x1, k] * fx
                    bot = img[y1, x0, k] * (1 - fx) + img[y1, x1, k] * fx
                    out[i, j, k] = top * (1 - fy) + bot * fy

    @njit(cache=True, nogil=True)
    def _sample_patch_nb(img, out, cx, cy, phi_deg, long_side, short_side):  # pragma: no cover
        h, w, c = img.shape
        n = out.shape[0]
        t = phi_deg * (math.pi / 180.0)
        ux = math.cos(t)
        uy = math.sin(t)
        half = 0.5 * short_side
        for i in range(n):
            v = (i + 0.5) / n * long_side - 0.5 * long_side
            if v < -half or v > half:
                for j in range(n):
                    for k in range(c):
                        out[i, j, k] = 0.0
                continue
            for j in range(n):
                u = (j + 0.5) / n * long_side - 0.5 * long_side
                sx = cx + u * ux - v * uy
                sy = cy + u * uy + v * ux
                if sx < 0.0:
                    sx = 0.0
                if sx > w - 1.0:
                    sx = w - 1.0
                if sy < 0.0:
                    sy = 0.0
                if sy > h - 1.0:
                    sy = h - 1.0
                x0 = int(sx)
                if x0 > w - 2:
                    x0 = w - 2 if w > 1 else 0
                y0 = int(sy)
                if y0 > h - 2:
                    y0 = h - 2 if h > 1 else 0
                fx = sx - x0
                fy = sy - y0
                x1 = min(x0 + 1, w - 1)
                y1 = min(y0 + 1, h - 1)
                for k in range(c):
                    top = img[y0, x0, k] * (1 - fx) + img[y0, x1, k] * fx
                    bot = img[y1, x0, k] * (1 - fx) + img[y1, x1, k] * fx
                    out[i, j, k] = top * (1 - fy) + bot * fy


def _sample_patch_np(
    img: np.ndarray, n: int, cx: float, cy: float, phi_deg: float, long_side: float, short_side: float
) -> np.ndarray:
    h, w, c = img.shape
    t = math.radians(phi_deg)
    ux, uy = math.cos(t), math.sin(t)
    grid = (np.arange(n, dtype=np.float64) + 0.5) / n * long_side - 0.5 * long_side
    u = grid[None, :]
    v = grid[:, None]
    band = np.abs(grid) <= 0.5 * short_side
    sx = np.clip(cx + u * ux - v * uy, 0.0, w - 1.0)
    sy = np.clip(cy + u * uy + v * ux, 0.0, h - 1.0)
    x0 = np.minimum(sx.astype(np.int64), w - 2) if w > 1 else np.zeros_like(sx, np.int64)
    y0 = np.minimum(sy.astype(np.int64), h - 2) if h > 1 else np.zeros_like(sy, np.int64)
    fx = (sx - x0)[..., None]
    fy = (sy - y0)[..., None]
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    data = img.astype(np.float64)
    top = data[y0, x0] * (1 - fx) + data[y0, x1] * fx
    bot = data[y1, x0] * (1 - fx) + data[y1, x1] * fx
    out = top * (1 - fy) + bot * fy
    out[~band] = 0.0
    return out.astype(np.float32)


def resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize with half-pixel center alignment."""
    validate_raster(img)
    if accel.active():
        out = np.empty((out_h, out_w, img.shape[2]), np.float32)
        _resize_bilinear_nb(img.astype(np.float32), out)
        return out
    return _resize_bilinear_np(img, out_h, out_w)


# ---------------------------------------------------------------------------
# Pipeline operations
# ---------------------------------------------------------------------------


def center_crop_window(width: int, height: int, size: int = CROP_SIZE) -> tuple[int, int]:
    """Top-left (x0, y0) of the centered size x size crop."""
    return (width - size) // 2, (height - size) // 2


def preprocess(img: np.ndarray) -> np.ndarray:
    """Center-crop to 300x300 and bilinearly resize to 224x224."""
    validate_raster(img)
    h, w = img.shape[:2]
    if h < CROP_SIZE or w < CROP_SIZE:
        raise TooSmallError(f"image {w}x{h} smaller than {CROP_SIZE}x{CROP_SIZE}")
    x0, y0 = center_crop_window(w, h)
    crop = np.ascontiguousarray(img[y0 : y0 + CROP_SIZE, x0 : x0 + CROP_SIZE])
    return resize_bilinear(crop, NET_INPUT_SIZE, NET_INPUT_SIZE)


def rect_in_bounds(img: np.ndarray, r: GraspRect) -> bool:
    """True when all four rectangle corners lie inside the image."""
    h, w = img.shape[:2]
    cs = corners(r)
    return bool(
        (cs[:, 0] >= 0.0).all()
        and (cs[:, 0] <= w - 1.0).all()
        and (cs[:, 1] >= 0.0).all()
        and (cs[:, 1] <= h - 1.0).all()
    )


def extract_patch(img: np.ndarray, r: GraspRect) -> np.ndarray:
    """Resample a grasp rectangle into the classifier's 24x24x3 input.

    The rectangle content is rotated so its longer side runs horizontally,
    the shorter dimension is zero-padded symmetrically to a square, and the
    square is scaled to 24x24.  Padding rows are exactly zero.
    """
    validate_raster(img)
    if img.shape[2] != 3:
        raise ValueError("patch extraction expects a 3-channel raster")
    if not rect_in_bounds(img, r):
        raise OutOfBoundsError(f"rectangle corners exit the {img.shape[1]}x{img.shape[0]} image")
    if r.w >= r.h:
        phi = r.theta
        long_side, short_side = r.w, r.h
    else:
        phi = (r.theta + 90.0) % 180.0
        long_side, short_side = r.h, r.w
    if accel.active():
        out = np.empty((PATCH_SIZE, PATCH_SIZE, 3), np.float32)
        _sample_patch_nb(img.astype(np.float32), out, r.x, r.y, phi, long_side, short_side)
        return out
    return _sample_patch_np(img, PATCH_SIZE, r.x, r.y, phi, long_side, short_side)


def gray_histogram(img: np.ndarray) -> np.ndarray:
    """256-bin histogram of the luminance image; counts sum to H*W."""
    validate_raster(img)
    if img.shape[2] == 3:
        gray = 0.299 * img[..., 0] + 0.587 * img[..., 1] + 0.114 * img[..., 2]
    else:
        gray = img[..., 0]
    levels = np.clip(np.rint(gray * 255.0).astype(np.int64), 0, 255)
    return np.bincount(levels.ravel(), minlength=256)


def otsu_threshold(hist: np.ndarray) -> int:
    """Gray level maximizing between-class variance; split is <=t vs >t."""
    total = int(hist.sum())
    if total == 0:
        return 0
    levels = np.arange(256, dtype=np.float64)
    weights = hist.astype(np.float64)
    cum_n = np.cumsum(weights)
    cum_sum = np.cumsum(weights * levels)
    grand = cum_sum[-1]
    n0 = cum_n[:-1]
    n1 = total - n0
    valid = (n0 > 0) & (n1 > 0)
    if not valid.any():
        return 0
    mu0 = np.where(valid, cum_sum[:-1] / np.maximum(n0, 1), 0.0)
    mu1 = np.where(valid, (grand - cum_sum[:-1]) / np.maximum(n1, 1), 0.0)
    between = np.where(valid, n0 * n1 * (mu0 - mu1) ** 2, -1.0)
    return int(np.argmax(between))


@dataclass(frozen=True)
class ScaleEstimate:
    """Rough object size and derived candidate-size intervals (pixels)."""

    size_estimate: float
    w_range: tuple[float, float]
    h_range: tuple[float, float]


def estimate_object_scale(
    img: np.ndarray,
    w_multipliers: tuple[float, float] = (0.6, 2.0),
    h_multipliers: tuple[float, float] = (0.3, 1.5),
    w_clamp: tuple[float, float] = DEFAULT_W_RANGE,
    h_clamp: tuple[float, float] = DEFAULT_H_RANGE,
    min_foreground_fraction: float = 0.005,
) -> ScaleEstimate:
    """Estimate object size from the gray histogram.

    Otsu's threshold splits the histogram; the side with fewer pixels is
    taken as foreground (objects are assumed smaller than the background).
    ``size_estimate`` is the square root of the foreground pixel count and
    the candidate intervals are multiples of it, clamped to the defaults.
    """
    hist = gray_histogram(img)
    total = int(hist.sum())
    t = otsu_threshold(hist)
    below = int(hist[: t + 1].sum())
    foreground = min(below, total - below)
    if foreground < min_foreground_fraction * total:
        raise NoForegroundError(
            f"foreground fraction {foreground / max(total, 1):.4f} below {min_foreground_fraction}"
        )
    size = math.sqrt(foreground)

    def clamp(v: float, lohi: tuple[float, float]) -> float:
        return min(max(v, lohi[0]), lohi[1])

    w_range = (clamp(w_multipliers[0] * size, w_clamp), clamp(w_multipliers[1] * size, w_clamp))
    h_range = (clamp(h_multipliers[0] * size, h_clamp), clamp(h_multipliers[1] * size, h_clamp))
    return ScaleEstimate(size_estimate=size, w_range=w_range, h_range=h_range)
