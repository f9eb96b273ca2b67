"""Particle-swarm search over the 5-D grasp-rectangle space.

A swarm of candidate rectangles is initialized inside the central region of
the image, with sizes drawn from the object-scale estimate, and iterated
under the velocity/position update until the best score crosses a threshold
or the iteration cap is reached.  Constraint handling: angles wrap modulo
180, centers clamp to the image interior, sizes are projected back into
their intervals by multiplicative correction factors, and any particle whose
rectangle exits the image is eliminated and replaced by a fresh random one.

All random draws for a generation happen in a fixed serial order before any
(possibly parallel) scoring, so a fixed seed gives bit-identical results for
any worker count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .geometry import GraspRect
from .imaging import (
    DEFAULT_H_RANGE,
    DEFAULT_W_RANGE,
    NoForegroundError,
    estimate_object_scale,
)
from .scorer import Scorer

UPDATE_RULES = ("standard-difference", "as-printed")


class InitFailedError(RuntimeError):
    """Swarm initialization never reached the required score threshold."""


@dataclass
class SwarmConfig:
    """Search knobs.

    ``update_rule`` selects the velocity formula: "standard-difference" uses
    the conventional attraction terms c1*r1*(p_best - x) + c2*r2*(g_best - x);
    "as-printed" uses the raw c1*r1*p_best + c2*r2*g_best form and is kept
    for fidelity experiments (it drives positions unboundedly and relies on
    the constraint corrections).
    """

    n_particles: int = 40
    inertia: float = 0.7
    c1: float = 1.5
    c2: float = 1.5
    init_threshold: float = 0.7
    prob_threshold: float = 0.95
    max_init: int = 20
    max_iter: int = 100
    update_rule: str = "standard-difference"
    center_region_fraction: float = 0.5
    v_max_fraction: float = 0.10
    h_limits: tuple[float, float] | None = None
    w_limits: tuple[float, float] | None = None
    aspect_limits: tuple[float, float] | None = None
    area_limits: tuple[float, float] | None = None
    correct_sizes: bool = True
    seed: int | None = None
    workers: int = 1

    def validate(self) -> None:
        if self.n_particles < 1:
            raise ValueError("n_particles must be >= 1")
        if not (0.0 <= self.init_threshold <= 1.0 and 0.0 <= self.prob_threshold <= 1.0):
            raise ValueError("score thresholds must lie in [0, 1]")
        if self.max_init < 1 or self.max_iter < 1:
            raise ValueError("max_init and max_iter must be >= 1")
        if not 0.0 < self.center_region_fraction <= 1.0:
            raise ValueError("center_region_fraction must be in (0, 1]")
        if self.update_rule not in UPDATE_RULES:
            raise ValueError(f"update_rule must be one of {UPDATE_RULES}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SearchLimits:
    """Resolved per-image feasibility intervals and derived bounds."""

    width: int
    height: int
    h_range: tuple[float, float]
    w_range: tuple[float, float]
    aspect_range: tuple[float, float]
    area_range: tuple[float, float]
    center_box: tuple[float, float, float, float]  # x0, x1, y0, y1
    v_max: np.ndarray  # (5,)


@dataclass
class Swarm:
    positions: np.ndarray  # (n, 5): x, y, theta, h, w
    velocities: np.ndarray  # (n, 5)
    p_best: np.ndarray  # (n, 5)
    p_fit: np.ndarray  # (n,), -1 means no valid observation yet
    g_best: np.ndarray | None
    g_fit: float
    rng: np.random.Generator
    limits: SearchLimits
    initializations_used: int = 0


@dataclass
class TrajectoryPoint:
    iteration: int
    g_fit: float
    g_best: tuple[float, float, float, float, float]

    def to_dict(self) -> dict:
        return {"iteration": self.iteration, "g_fit": self.g_fit, "g_best": list(self.g_best)}


@dataclass
class SearchResult:
    best: GraspRect
    best_score: float
    iterations_used: int
    initializations_used: int
    trajectory: list[TrajectoryPoint] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "x": self.best.x,
            "y": self.best.y,
            "theta": self.best.theta,
            "h": self.best.h,
            "w": self.best.w,
            "score": self.best_score,
            "iterations": self.iterations_used,
            "initializations": self.initializations_used,
        }


@dataclass(frozen=True)
class ScoredGrasp:
    rect: GraspRect
    score: float

    def to_dict(self) -> dict:
        return {
            "x": self.rect.x,
            "y": self.rect.y,
            "theta": self.rect.theta,
            "h": self.rect.h,
            "w": self.rect.w,
            "score": self.score,
        }


@dataclass
class MultigraspResult:
    grasps: list[ScoredGrasp]
    search: SearchResult


def resolve_limits(img: np.ndarray, cfg: SwarmConfig) -> SearchLimits:
    """Compute the per-image intervals the swarm is constrained to."""
    height, width = img.shape[:2]
    if cfg.h_limits is not None and cfg.w_limits is not None:
        h_range, w_range = tuple(cfg.h_limits), tuple(cfg.w_limits)
    else:
        try:
            est = estimate_object_scale(img)
            h_range, w_range = est.h_range, est.w_range
        except NoForegroundError:
            h_range, w_range = DEFAULT_H_RANGE, DEFAULT_W_RANGE
        if cfg.h_limits is not None:
            h_range = tuple(cfg.h_limits)
        if cfg.w_limits is not None:
            w_range = tuple(cfg.w_limits)
    aspect = cfg.aspect_limits or (w_range[0] / h_range[1], w_range[1] / h_range[0])
    area = cfg.area_limits or (h_range[0] * w_range[0], h_range[1] * w_range[1])
    f = cfg.center_region_fraction
    cx, cy = (width - 1) / 2.0, (height - 1) / 2.0
    box = (
        cx - f * (width - 1) / 2.0,
        cx + f * (width - 1) / 2.0,
        cy - f * (height - 1) / 2.0,
        cy + f * (height - 1) / 2.0,
    )
    v_max = cfg.v_max_fraction * np.array(
        [width - 1.0, height - 1.0, 180.0, h_range[1] - h_range[0], w_range[1] - w_range[0]]
    )
    return SearchLimits(
        width=width,
        height=height,
        h_range=tuple(h_range),
        w_range=tuple(w_range),
        aspect_range=tuple(aspect),
        area_range=tuple(area),
        center_box=box,
        v_max=v_max,
    )


# ---------------------------------------------------------------------------
# Constraint handling
# ---------------------------------------------------------------------------


def _rect_corners_ok(pos: np.ndarray, lim: SearchLimits) -> bool:
    x, y, theta, h, w = pos
    t = math.radians(theta)
    ux, uy = math.cos(t), math.sin(t)
    ex = 0.5 * (w * abs(ux) + h * abs(uy))
    ey = 0.5 * (w * abs(uy) + h * abs(ux))
    return 0.0 <= x - ex and x + ex <= lim.width - 1.0 and 0.0 <= y - ey and y + ey <= lim.height - 1.0


def _correct_size(h: float, w: float, lim: SearchLimits) -> tuple[float, float]:
    """Project (h, w) into the size/aspect/area intervals.

    Each violated limit is fixed by a multiplicative correction factor:
    box limits rescale the offending dimension to its bound, the aspect fix
    preserves area, and the area fix preserves aspect.  A few passes settle
    mutually consistent limits; inconsistent ones fall back to the box clamp.
    """
    h_lo, h_hi = lim.h_range
    w_lo, w_hi = lim.w_range
    a_lo, a_hi = lim.aspect_range
    area_lo, area_hi = lim.area_range
    eps = 1e-9
    for _ in range(6):
        h = min(max(h, h_lo), h_hi)
        w = min(max(w, w_lo), w_hi)
        ratio = w / h
        if ratio < a_lo:
            s = math.sqrt(a_lo / ratio)
            w *= s
            h /= s
        elif ratio > a_hi:
            s = math.sqrt(ratio / a_hi)
            w /= s
            h *= s
        area = h * w
        if area < area_lo:
            s = math.sqrt(area_lo / area)
            h *= s
            w *= s
        elif area > area_hi:
            s = math.sqrt(area_hi / area)
            h *= s
            w *= s
        if (
            h_lo - eps <= h <= h_hi + eps
            and w_lo - eps <= w <= w_hi + eps
            and a_lo - eps <= w / h <= a_hi + eps
            and area_lo - eps <= h * w <= area_hi + eps
        ):
            return min(max(h, h_lo), h_hi), min(max(w, w_lo), w_hi)
    return min(max(h, h_lo), h_hi), min(max(w, w_lo), w_hi)


def _draw_position(rng: np.random.Generator, lim: SearchLimits) -> np.ndarray:
    x0, x1, y0, y1 = lim.center_box
    lo = np.array([x0, y0, 0.0, lim.h_range[0], lim.w_range[0]])
    hi = np.array([x1, y1, 180.0, lim.h_range[1], lim.w_range[1]])
    for _ in range(50):
        pos = rng.uniform(lo, hi)
        if _rect_corners_ok(pos, lim):
            return pos
    # Give up on random placement; a minimum-size rectangle at the image
    # center is always valid for sane limit sets.
    theta = rng.uniform(0.0, 180.0)
    return np.array(
        [(lim.width - 1) / 2.0, (lim.height - 1) / 2.0, theta, lim.h_range[0], lim.w_range[0]]
    )


def _draw_velocity(rng: np.random.Generator, lim: SearchLimits) -> np.ndarray:
    return rng.uniform(-lim.v_max, lim.v_max)


# ---------------------------------------------------------------------------
# Algorithm
# ---------------------------------------------------------------------------


def _apply_scores(swarm: Swarm, scores, fresh: np.ndarray) -> None:
    """Update personal and global bests from one generation's scores.

    ``fresh`` marks particles whose history was just reset (initial draw or
    replacement).  Ties keep the earlier record, so the merge order is fixed
    by particle index no matter how the scores were computed.
    """
    for i, s in enumerate(scores):
        fit = -1.0 if s is None else float(s)
        if fresh[i]:
            swarm.p_fit[i] = fit
            swarm.p_best[i] = swarm.positions[i]
        elif fit > swarm.p_fit[i]:
            swarm.p_fit[i] = fit
            swarm.p_best[i] = swarm.positions[i]
        if swarm.p_fit[i] >= 0.0 and swarm.p_fit[i] > swarm.g_fit:
            swarm.g_fit = float(swarm.p_fit[i])
            swarm.g_best = swarm.p_best[i].copy()


def initialize(img: np.ndarray, scorer: Scorer, cfg: SwarmConfig) -> Swarm:
    """Draw the swarm, re-drawing wholesale until the best score clears the
    initialization threshold or the attempt budget runs out."""
    cfg.validate()
    lim = resolve_limits(img, cfg)
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n_particles
    swarm = Swarm(
        positions=np.zeros((n, 5)),
        velocities=np.zeros((n, 5)),
        p_best=np.zeros((n, 5)),
        p_fit=np.full(n, -1.0),
        g_best=None,
        g_fit=-1.0,
        rng=rng,
        limits=lim,
    )
    fresh = np.ones(n, dtype=bool)
    for _ in range(cfg.max_init):
        swarm.initializations_used += 1
        for i in range(n):
            swarm.positions[i] = _draw_position(rng, lim)
            swarm.velocities[i] = _draw_velocity(rng, lim)
        scores = scorer.score_many(img, [_rect_at(swarm.positions[i]) for i in range(n)], cfg.workers)
        _apply_scores(swarm, scores, fresh)
        if swarm.g_fit >= cfg.init_threshold:
            break
    if swarm.g_fit < cfg.init_threshold:
        raise InitFailedError(
            f"best initialization score {max(swarm.g_fit, 0.0):.4f} below "
            f"init threshold {cfg.init_threshold} after {swarm.initializations_used} attempts"
        )
    return swarm


def _rect_at(pos: np.ndarray) -> GraspRect:
    return GraspRect(x=pos[0], y=pos[1], theta=pos[2], h=max(pos[3], 1e-6), w=max(pos[4], 1e-6))


def step(swarm: Swarm, img: np.ndarray, scorer: Scorer, cfg: SwarmConfig) -> Swarm:
    """One velocity/position update, constraint pass, and scoring round."""
    lim = swarm.limits
    n = cfg.n_particles
    rng = swarm.rng
    r = rng.uniform(0.0, 1.0, size=(n, 2))
    r1 = r[:, 0:1]
    r2 = r[:, 1:2]
    g = swarm.g_best if swarm.g_best is not None else np.zeros(5)
    if cfg.update_rule == "standard-difference":
        vel = (
            cfg.inertia * swarm.velocities
            + cfg.c1 * r1 * (swarm.p_best - swarm.positions)
            + cfg.c2 * r2 * (g[None, :] - swarm.positions)
        )
    else:  # as-printed
        vel = cfg.inertia * swarm.velocities + cfg.c1 * r1 * swarm.p_best + cfg.c2 * r2 * g[None, :]
    np.clip(vel, -lim.v_max, lim.v_max, out=vel)
    swarm.velocities = vel
    swarm.positions = swarm.positions + vel

    swarm.positions[:, 2] %= 180.0
    if cfg.correct_sizes:
        for i in range(n):
            h, w = _correct_size(swarm.positions[i, 3], swarm.positions[i, 4], lim)
            swarm.positions[i, 3] = h
            swarm.positions[i, 4] = w
    np.clip(swarm.positions[:, 0], 0.0, lim.width - 1.0, out=swarm.positions[:, 0])
    np.clip(swarm.positions[:, 1], 0.0, lim.height - 1.0, out=swarm.positions[:, 1])

    # Eliminate-and-replace: rectangles that exit the image are re-drawn.
    fresh = np.zeros(n, dtype=bool)
    for i in range(n):
        if not _rect_corners_ok(swarm.positions[i], lim):
            swarm.positions[i] = _draw_position(rng, lim)
            swarm.velocities[i] = _draw_velocity(rng, lim)
            fresh[i] = True

    scores = scorer.score_many(img, [_rect_at(swarm.positions[i]) for i in range(n)], cfg.workers)
    _apply_scores(swarm, scores, fresh)
    return swarm


def search(img: np.ndarray, scorer: Scorer, cfg: SwarmConfig | None = None) -> SearchResult:
    """Full Algorithm run: initialize, iterate, return the best grasp."""
    result, _ = search_with_swarm(img, scorer, cfg)
    return result


def search_with_swarm(
    img: np.ndarray, scorer: Scorer, cfg: SwarmConfig | None = None
) -> tuple[SearchResult, Swarm]:
    cfg = cfg or SwarmConfig()
    swarm = initialize(img, scorer, cfg)
    trajectory: list[TrajectoryPoint] = []
    iteration = 0
    while swarm.g_fit < cfg.prob_threshold and iteration < cfg.max_iter:
        step(swarm, img, scorer, cfg)
        iteration += 1
        trajectory.append(
            TrajectoryPoint(iteration=iteration, g_fit=float(swarm.g_fit), g_best=tuple(swarm.g_best))
        )
    result = SearchResult(
        best=_rect_at(swarm.g_best),
        best_score=float(swarm.g_fit),
        iterations_used=iteration,
        initializations_used=swarm.initializations_used,
        trajectory=trajectory,
    )
    return result, swarm


def multigrasp(
    img: np.ndarray,
    scorer: Scorer,
    cfg: SwarmConfig | None = None,
    k: int = 3,
    score_floor: float = 0.5,
    min_separation: float = 30.0,
) -> MultigraspResult:
    """Return up to ``k`` high-scoring, spatially separated grasps.

    Candidates are the personal-best records of all particles (plus the
    global best), greedily selected in descending score order while skipping
    any whose center lies within ``min_separation`` pixels of an already
    selected grasp.  The first selection always equals the single-search
    best.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    result, swarm = search_with_swarm(img, scorer, cfg)
    pool: list[tuple[float, np.ndarray]] = [(result.best_score, np.array(result.best.as_tuple()))]
    for i in range(len(swarm.p_fit)):
        if swarm.p_fit[i] >= 0.0:
            pool.append((float(swarm.p_fit[i]), swarm.p_best[i]))
    pool.sort(key=lambda t: -t[0])  # stable: global best wins ties
    selected: list[ScoredGrasp] = []
    for fit, pos in pool:
        if fit < score_floor:
            break
        if any(
            math.hypot(pos[0] - s.rect.x, pos[1] - s.rect.y) < min_separation for s in selected
        ):
            continue
        selected.append(ScoredGrasp(rect=_rect_at(pos), score=fit))
        if len(selected) == k:
            break
    return MultigraspResult(grasps=selected, search=result)
