"""Patch-manifest loading, object-wise splitting, and augmentation."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import affine_transform


class EmptyManifestError(ValueError):
    """Manifest contains no patches."""


class SingleClassDatasetError(ValueError):
    """Training needs both graspable and ungraspable patches."""


@dataclass
class PatchSet:
    ids: list[str]
    labels: np.ndarray  # (n,) int64
    patches: np.ndarray  # (n, 24, 24, 3) float32


def load_manifest(manifest_path) -> PatchSet:
    """Read "id,label,relative-path" lines and their .npy patches."""
    path = Path(manifest_path)
    root = path.parent
    ids: list[str] = []
    labels: list[int] = []
    patches: list[np.ndarray] = []
    for line in path.read_text().splitlines():
        if not line.strip():
            continue
        ex_id, label, rel = line.split(",")
        patch = np.load(root / rel)
        if patch.shape != (24, 24, 3):
            raise ValueError(f"{rel}: expected (24, 24, 3) patch, got {patch.shape}")
        ids.append(ex_id)
        labels.append(int(label))
        patches.append(patch.astype(np.float32))
    if not ids:
        raise EmptyManifestError(f"{path}: no patches listed")
    return PatchSet(ids=ids, labels=np.array(labels, np.int64), patches=np.stack(patches))


def split_by_object(data: PatchSet, val_fraction: float, seed: int):
    """Train/validation indices grouped by example id, so patches from one
    object never land on both sides."""
    groups: dict[str, list[int]] = {}
    for i, ex_id in enumerate(data.ids):
        groups.setdefault(ex_id, []).append(i)
    keys = sorted(groups)
    rng = np.random.default_rng(seed)
    rng.shuffle(keys)
    n_val = max(1, round(val_fraction * len(keys)))
    if len(keys) < 2:
        raise ValueError("need at least two objects to split")
    val_keys = set(keys[:n_val])
    train_idx = [i for k in keys[n_val:] for i in groups[k]]
    val_idx = [i for k in sorted(val_keys) for i in groups[k]]
    return sorted(train_idx), sorted(val_idx)


def augment(patch: np.ndarray, rng: np.random.Generator,
            max_shift: float = 2.0, scale_range=(0.9, 1.1), max_rot_deg: float = 10.0) -> np.ndarray:
    """Random translate/scale/rotate of one (24, 24, 3) patch, bilinear."""
    angle = np.deg2rad(rng.uniform(-max_rot_deg, max_rot_deg))
    scale = rng.uniform(*scale_range)
    shift = rng.uniform(-max_shift, max_shift, size=2)
    c, s = np.cos(angle) / scale, np.sin(angle) / scale
    mat = np.array([[c, -s], [s, c]])
    center = np.array([11.5, 11.5])
    offset = center - mat @ (center + shift)
    out = np.empty_like(patch)
    for ch in range(patch.shape[2]):
        out[:, :, ch] = affine_transform(
            patch[:, :, ch], mat, offset=offset, order=1, mode="constant", cval=0.0
        )
    return np.clip(out, 0.0, 1.0)
