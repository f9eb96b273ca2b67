"""Cornell-format dataset ingestion, label conversion, and evaluation.

On-disk layout per example id: ``<id>r.png`` (or ``<id>r.ppm``) plus
``<id>cpos.txt`` / ``<id>cneg.txt`` label files holding one rectangle per
four "x y" vertex lines.  Images at least 300x300 go through the standard
center-crop/resize preprocessing and label coordinates are remapped through
the same transform; images already at 224x224 are used as-is.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import GraspRect, rect_match
from .imaging import (
    CROP_SIZE,
    NET_INPUT_SIZE,
    OutOfBoundsError,
    center_crop_window,
    extract_patch,
    preprocess,
)
from .raster_io import read_image


class DegenerateRectError(ValueError):
    """Label vertices do not form a usable rectangle."""


class SkippedRectError(ValueError):
    """Label rectangle contains NaN coordinates (present in Cornell files)."""


@dataclass
class GraspExample:
    id: str
    image: np.ndarray
    positives: list[GraspRect] = field(default_factory=list)
    negatives: list[GraspRect] = field(default_factory=list)


@dataclass
class LoadReport:
    examples: list[GraspExample] = field(default_factory=list)
    skipped_rects: int = 0
    issues: list[tuple[str, str]] = field(default_factory=list)  # (example id, message)

    def __iter__(self):
        return iter(self.examples)

    def __len__(self):
        return len(self.examples)


def rect_from_vertices(points) -> GraspRect:
    """Convert four edge-adjacent vertices to the canonical 5-tuple.

    The center is the centroid, theta the first edge's direction wrapped to
    [0, 180), w the first edge's length and h the second's; this inverts
    :func:`psograsp.geometry.corners` up to the theta-wrap ambiguity.
    """
    p = np.asarray(points, dtype=np.float64)
    if p.shape != (4, 2):
        raise DegenerateRectError(f"expected 4 points, got array of shape {p.shape}")
    if np.isnan(p).any():
        raise SkippedRectError("vertex contains NaN")
    edges = np.roll(p, -1, axis=0) - p
    lengths = np.hypot(edges[:, 0], edges[:, 1])
    if np.any(lengths < 1.0):
        raise DegenerateRectError(f"edge shorter than 1 px: {lengths.min():.3f}")
    cross = edges[0, 0] * edges[1, 1] - edges[0, 1] * edges[1, 0]
    if abs(cross) < 1e-6 * lengths[0] * lengths[1]:
        raise DegenerateRectError("vertices are collinear")
    cx, cy = p.mean(axis=0)
    theta = math.degrees(math.atan2(edges[0, 1], edges[0, 0])) % 180.0
    return GraspRect(x=cx, y=cy, theta=theta, h=float(lengths[1]), w=float(lengths[0]))


@dataclass(frozen=True)
class _Remap:
    """Affine x' = (x - x0) * s, y' = (y - y0) * s shared by image and labels."""

    x0: float = 0.0
    y0: float = 0.0
    scale: float = 1.0

    def apply(self, pts: np.ndarray) -> np.ndarray:
        out = pts.astype(np.float64).copy()
        out[:, 0] = (out[:, 0] - self.x0) * self.scale
        out[:, 1] = (out[:, 1] - self.y0) * self.scale
        return out


def _read_rects(path: Path, remap: _Remap) -> tuple[list[GraspRect], int]:
    rects: list[GraspRect] = []
    skipped = 0
    vertices: list[list[float]] = []
    for line in path.read_text().splitlines():
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 2:
            skipped += 1
            vertices.clear()
            continue
        vertices.append([float(parts[0]), float(parts[1])])
        if len(vertices) == 4:
            try:
                rects.append(rect_from_vertices(remap.apply(np.array(vertices))))
            except (SkippedRectError, DegenerateRectError):
                skipped += 1
            vertices.clear()
    if vertices:
        skipped += 1
    return rects, skipped


def load_cornell(directory) -> LoadReport:
    """Load every example in a Cornell-layout directory.

    Per-example problems (missing label file, unreadable or undersized
    image) are collected in the report rather than raised; malformed
    rectangles are skipped and counted.
    """
    root = Path(directory)
    report = LoadReport()
    image_paths = sorted(
        p for p in root.iterdir() if p.is_file() and p.suffix.lower() in (".png", ".ppm")
    )
    for img_path in image_paths:
        stem = img_path.stem
        ex_id = stem[:-1] if stem.endswith("r") else stem
        pos_path = root / f"{ex_id}cpos.txt"
        neg_path = root / f"{ex_id}cneg.txt"
        if not pos_path.exists():
            report.issues.append((ex_id, f"missing label file {pos_path.name}"))
            continue
        try:
            img = read_image(img_path)
        except Exception as e:  # decode failure is a per-example issue
            report.issues.append((ex_id, f"unreadable image: {e}"))
            continue
        h, w = img.shape[:2]
        if (h, w) == (NET_INPUT_SIZE, NET_INPUT_SIZE):
            remap = _Remap()
        elif h >= CROP_SIZE and w >= CROP_SIZE:
            x0, y0 = center_crop_window(w, h)
            img = preprocess(img)
            remap = _Remap(x0=x0, y0=y0, scale=NET_INPUT_SIZE / CROP_SIZE)
        else:
            report.issues.append((ex_id, f"unreadable image: {w}x{h} below {CROP_SIZE}"))
            continue
        positives, skipped = _read_rects(pos_path, remap)
        report.skipped_rects += skipped
        negatives: list[GraspRect] = []
        if neg_path.exists():
            negatives, skipped = _read_rects(neg_path, remap)
            report.skipped_rects += skipped
        else:
            report.issues.append((ex_id, f"missing label file {neg_path.name}"))
        report.examples.append(
            GraspExample(id=ex_id, image=img, positives=positives, negatives=negatives)
        )
    return report


def extract_labeled_patches(examples, out_dir) -> int:
    """Write each label's 24x24x3 patch as .npy plus a manifest.

    The manifest has one "id,label,relative-path" line per patch with label
    1 for graspable and 0 for ungraspable.  Out-of-bounds labels are
    skipped.  Output is deterministic for a fixed input.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lines: list[str] = []
    count = 0
    for ex in examples:
        for label, rects in ((1, ex.positives), (0, ex.negatives)):
            tag = "pos" if label else "neg"
            for j, rect in enumerate(rects):
                try:
                    patch = extract_patch(ex.image, rect)
                except OutOfBoundsError:
                    continue
                rel = f"{ex.id}_{tag}{j}.npy"
                np.save(out / rel, patch)
                lines.append(f"{ex.id},{label},{rel}")
                count += 1
    (out / "manifest.csv").write_text("".join(line + "\n" for line in lines))
    return count


def evaluate(detector, examples, parallel: bool = False) -> dict:
    """Score a detector against labeled examples with the rectangle metric.

    ``detector`` maps an image to a GraspRect or a list of them; an example
    counts as a success when any predicted rectangle matches any positive
    label (angle within 30 degrees, overlap ratio at least 20%).  Detector
    calls run sequentially by default so the per-call timings are honest.
    """
    examples = list(examples)
    if not examples:
        raise ValueError("evaluate needs at least one example")

    def run_one(ex: GraspExample) -> dict:
        t0 = time.perf_counter()
        preds = detector(ex.image)
        ms = (time.perf_counter() - t0) * 1000.0
        if isinstance(preds, GraspRect):
            preds = [preds]
        matched = any(rect_match(p, lab) for p in preds for lab in ex.positives)
        return {
            "id": ex.id,
            "matched": bool(matched),
            "ms": ms,
            "predictions": [[r.x, r.y, r.theta, r.h, r.w] for r in preds],
        }

    if parallel:
        with ThreadPoolExecutor() as pool:
            records = list(pool.map(run_one, examples))
    else:
        records = [run_one(ex) for ex in examples]
    times = sorted(r["ms"] for r in records)
    n = len(records)
    return {
        "accuracy": sum(r["matched"] for r in records) / n,
        "n_examples": n,
        "timing": {
            "mean_ms": sum(times) / n,
            "p50_ms": times[n // 2],
            "p90_ms": times[min(n - 1, int(0.9 * n))],
        },
        "per_example": records,
    }


def kfold_by_object(ids, object_of=None, k: int = 5, seed: int = 0):
    """Seeded k-fold split grouping by object key so near-duplicate images
    of one object never straddle a fold boundary.

    ``object_of`` maps an example id to its object key (defaults to the id
    itself).  Returns k (train_ids, val_ids) pairs.
    """
    ids = list(ids)
    object_of = object_of or (lambda i: i)
    groups: dict[str, list] = {}
    for i in ids:
        groups.setdefault(object_of(i), []).append(i)
    keys = sorted(groups)
    rng = np.random.default_rng(seed)
    rng.shuffle(keys)
    folds: list[list] = [[] for _ in range(k)]
    for j, key in enumerate(keys):
        folds[j % k].extend(groups[key])
    out = []
    for j in range(k):
        val = sorted(folds[j])
        train = sorted(i for jj in range(k) if jj != j for i in folds[jj])
        out.append((train, val))
    return out
