"""Image file I/O: 8-bit PNG and binary PPM (P6) in, annotated PPM out."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .geometry import GraspRect, corners

# Edge colors cycled per rectangle when annotating.
_PALETTE = ((0, 255, 0), (255, 64, 64), (64, 128, 255), (255, 200, 0), (200, 0, 255))


def read_ppm(path) -> np.ndarray:
    """Decode a binary PPM (P6, maxval <= 255) to a float32 (H, W, 3) raster."""
    raw = Path(path).read_bytes()
    if not raw.startswith(b"P6"):
        raise ValueError(f"{path}: not a binary PPM (P6) file")
    # Header tokens may be separated by whitespace and '#' comments.
    tokens: list[int] = []
    i = 2
    while len(tokens) < 3:
        while i < len(raw) and raw[i : i + 1].isspace():
            i += 1
        if i < len(raw) and raw[i : i + 1] == b"#":
            while i < len(raw) and raw[i] != 0x0A:
                i += 1
            continue
        j = i
        while j < len(raw) and not raw[j : j + 1].isspace():
            j += 1
        if j == i:
            raise ValueError(f"{path}: truncated PPM header")
        tokens.append(int(raw[i:j]))
        i = j
    i += 1  # single whitespace byte after maxval
    width, height, maxval = tokens
    if not (0 < maxval < 256):
        raise ValueError(f"{path}: unsupported PPM maxval {maxval}")
    n = width * height * 3
    data = raw[i : i + n]
    if len(data) < n:
        raise ValueError(f"{path}: PPM pixel data truncated")
    arr = np.frombuffer(data, np.uint8).reshape(height, width, 3)
    return (arr.astype(np.float32) / float(maxval)).clip(0.0, 1.0)


def write_ppm(path, img: np.ndarray) -> None:
    """Write a raster (1 or 3 channels, values in [0, 1]) as binary PPM."""
    if img.ndim != 3 or img.shape[2] not in (1, 3):
        raise ValueError(f"expected (H, W, 1|3) raster, got {img.shape}")
    if img.shape[2] == 1:
        img = np.repeat(img, 3, axis=2)
    u8 = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    h, w = u8.shape[:2]
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        f.write(u8.tobytes())


def read_image(path) -> np.ndarray:
    """Read a PNG or PPM file into a float32 (H, W, 3) raster in [0, 1]."""
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(str(p))
    if p.suffix.lower() == ".ppm":
        return read_ppm(p)
    from PIL import Image

    with Image.open(p) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
    return arr.astype(np.float32) / 255.0


def draw_rect(img: np.ndarray, r: GraspRect, color: tuple[int, int, int]) -> None:
    """Draw the rectangle's four edges as 1-px lines, in place."""
    h, w = img.shape[:2]
    col = np.array(color, np.float32) / 255.0
    cs = corners(r)
    for k in range(4):
        x0, y0 = cs[k]
        x1, y1 = cs[(k + 1) % 4]
        steps = max(2, int(math.ceil(2.0 * math.hypot(x1 - x0, y1 - y0))))
        for t in np.linspace(0.0, 1.0, steps):
            px = int(round(x0 + t * (x1 - x0)))
            py = int(round(y0 + t * (y1 - y0)))
            if 0 <= px < w and 0 <= py < h:
                img[py, px, :] = col


def annotate(img: np.ndarray, rects, path) -> None:
    """Write a PPM copy of ``img`` with each rectangle outlined."""
    canvas = img.copy()
    if canvas.shape[2] == 1:
        canvas = np.repeat(canvas, 3, axis=2)
    for i, r in enumerate(rects):
        draw_rect(canvas, r, _PALETTE[i % len(_PALETTE)])
    write_ppm(path, canvas)
