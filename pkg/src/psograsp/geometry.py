"""Oriented grasp rectangles and the rectangle-match test.

A grasp is a 5-tuple ``{x, y, theta, h, w}``: center column/row in pixels,
rotation in degrees, jaw length ``h`` perpendicular to the rotation
direction, and opening width ``w`` along it.  ``theta`` and ``theta + 180``
describe the same rectangle, so angles are normalized into ``[0, 180)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Shoelace results below this are treated as zero area.
_AREA_EPS = 1e-12


@dataclass(frozen=True)
class GraspRect:
    """An oriented grasp rectangle in image coordinates.

    ``w`` is the edge parallel to the ``theta`` direction (gripper opening),
    ``h`` the edge perpendicular to it (jaw length).  This axis convention is
    fixed project-wide; patch extraction relies on it.
    """

    x: float
    y: float
    theta: float
    h: float
    w: float

    def __post_init__(self) -> None:
        if not (self.h > 0.0 and self.w > 0.0):
            raise ValueError(f"h and w must be positive, got h={self.h!r} w={self.w!r}")
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "theta", float(self.theta) % 180.0)
        object.__setattr__(self, "h", float(self.h))
        object.__setattr__(self, "w", float(self.w))

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.x, self.y, self.theta, self.h, self.w)


def corners(r: GraspRect) -> np.ndarray:
    """Four vertices of ``r`` as a (4, 2) array of (x, y) points.

    Vertices are listed counter-clockwise (in the x-right / y-up sense);
    the first two span a ``w`` edge, so consecutive pairs alternate between
    ``w`` and ``h`` edges.  Their mean is the rectangle center.
    """
    t = math.radians(r.theta)
    ux, uy = math.cos(t), math.sin(t)
    vx, vy = -uy, ux
    dwx, dwy = 0.5 * r.w * ux, 0.5 * r.w * uy
    dhx, dhy = 0.5 * r.h * vx, 0.5 * r.h * vy
    return np.array(
        [
            [r.x - dwx - dhx, r.y - dwy - dhy],
            [r.x + dwx - dhx, r.y + dwy - dhy],
            [r.x + dwx + dhx, r.y + dwy + dhy],
            [r.x - dwx + dhx, r.y - dwy + dhy],
        ]
    )


def angle_diff(a: float, b: float) -> float:
    """Smallest angle in degrees between two undirected orientations.

    Orientations wrap at 180, so the result lies in [0, 90].
    """
    d = abs(float(a) - float(b)) % 180.0
    return min(d, 180.0 - d)


def _clip_polygon(subject: np.ndarray, clipper: np.ndarray) -> list[tuple[float, float]]:
    """Sutherland-Hodgman clip of ``subject`` against convex CCW ``clipper``.

    Points exactly on a clip edge count as inside, so identical rectangles
    survive clipping with their vertex list unchanged.
    """
    output = [(float(p[0]), float(p[1])) for p in subject]
    nclip = len(clipper)
    for i in range(nclip):
        if not output:
            break
        ax, ay = clipper[i]
        bx, by = clipper[(i + 1) % nclip]
        ex, ey = bx - ax, by - ay
        inp = output
        output = []
        n = len(inp)
        for j in range(n):
            sx, sy = inp[j - 1]
            px, py = inp[j]
            s_side = ex * (sy - ay) - ey * (sx - ax)
            p_side = ex * (py - ay) - ey * (px - ax)
            s_in = s_side >= 0.0
            p_in = p_side >= 0.0
            if p_in != s_in:
                # Edge crosses the clip line; param along s->p.
                denom = s_side - p_side
                t = s_side / denom
                output.append((sx + t * (px - sx), sy + t * (py - sy)))
            if p_in:
                output.append((px, py))
    return output


def _shoelace_area(poly) -> float:
    n = len(poly)
    if n < 3:
        return 0.0
    s = 0.0
    for i in range(n):
        x0, y0 = poly[i - 1]
        x1, y1 = poly[i]
        s += x0 * y1 - x1 * y0
    area = abs(s) * 0.5
    return area if area > _AREA_EPS else 0.0


def rect_iou(a: GraspRect, b: GraspRect, denominator: str = "union") -> float:
    """Overlap ratio of two grasp rectangles in [0, 1].

    The intersection polygon comes from convex clipping and all areas from
    the shoelace formula.  ``denominator`` selects the normalization:
    ``"union"`` (Jaccard, the default) or ``"label"`` (intersection over the
    area of ``b``).
    """
    pa = corners(a)
    pb = corners(b)
    inter = _shoelace_area(_clip_polygon(pa, pb))
    if inter == 0.0:
        return 0.0
    area_a = _shoelace_area(pa)
    area_b = _shoelace_area(pb)
    if denominator == "union":
        ratio = inter / (area_a + area_b - inter)
    elif denominator == "label":
        ratio = inter / area_b
    else:
        raise ValueError(f"unknown denominator {denominator!r}")
    return min(max(ratio, 0.0), 1.0)


def rect_match(
    pred: GraspRect,
    label: GraspRect,
    max_angle: float = 30.0,
    min_overlap: float = 0.20,
    denominator: str = "union",
) -> bool:
    """Detection success test: angle within ``max_angle`` degrees and
    overlap ratio at least ``min_overlap``."""
    if angle_diff(pred.theta, label.theta) > max_angle:
        return False
    return rect_iou(pred, label, denominator=denominator) >= min_overlap
