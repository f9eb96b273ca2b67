"""Grasp-quality scorers bridging images and rectangles to the search objective.

A scorer maps (image, rectangle) to a value in [0, 1], or ``None`` when the
candidate is invalid (its patch exits the image).  ``None`` is a distinct
signal rather than a zero score so the search can eliminate and replace the
particle instead of merely penalizing it.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor

from .geometry import GraspRect, angle_diff
from .imaging import extract_patch, rect_in_bounds, OutOfBoundsError
from .nn import WeightsBundle, forward


class Scorer:
    """Base scorer; subclasses implement :meth:`score`.

    Scorers are immutable after construction and must be safe for concurrent
    read-only use: a search evaluates one generation of candidates in
    parallel.
    """

    def score(self, img, rect: GraspRect) -> float | None:
        raise NotImplementedError

    def score_many(self, img, rects, workers: int = 1) -> list[float | None]:
        """Score candidates in order; results are positional regardless of
        how many workers evaluate them."""
        if workers <= 1 or len(rects) <= 1:
            return [self.score(img, r) for r in rects]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda r: self.score(img, r), rects))


class CnnScorer(Scorer):
    """Scores a rectangle by the CNN's graspable-class probability."""

    def __init__(self, weights: WeightsBundle):
        weights.validate()
        self.weights = weights

    def score(self, img, rect: GraspRect) -> float | None:
        try:
            patch = extract_patch(img, rect)
        except OutOfBoundsError:
            return None
        return forward(patch, self.weights)


class SyntheticScorer(Scorer):
    """Deterministic Gaussian bump around a known target rectangle.

    The score is exp(-sum((d_i / s_i)^2)) over the five dimensions, with the
    angle distance computed on the wrapped [0, 180) circle; it is 1 exactly
    at the target and strictly decreases with distance in every dimension.
    Used as a search oracle in tests and via the CLI's ``synthetic:`` scorer.
    """

    def __init__(self, target: GraspRect, scales=(8.0, 8.0, 15.0, 10.0, 12.0)):
        if len(scales) != 5 or any(s <= 0 for s in scales):
            raise ValueError(f"scales must be 5 positive values, got {scales!r}")
        self.target = target
        self.scales = tuple(float(s) for s in scales)

    def score(self, img, rect: GraspRect) -> float | None:
        if not rect_in_bounds(img, rect):
            return None
        t = self.target
        sx, sy, st, sh, sw = self.scales
        d = (
            ((rect.x - t.x) / sx) ** 2
            + ((rect.y - t.y) / sy) ** 2
            + (angle_diff(rect.theta, t.theta) / st) ** 2
            + ((rect.h - t.h) / sh) ** 2
            + ((rect.w - t.w) / sw) ** 2
        )
        return math.exp(-d)


class MaxScorer(Scorer):
    """Pointwise maximum of several scorers (multi-peak synthetic fixtures)."""

    def __init__(self, scorers):
        if not scorers:
            raise ValueError("MaxScorer needs at least one sub-scorer")
        self.scorers = tuple(scorers)

    def score(self, img, rect: GraspRect) -> float | None:
        values = [s.score(img, rect) for s in self.scorers]
        if any(v is None for v in values):
            return None
        return max(values)
