from pathlib import Path

import numpy as np
import pytest


def build_separable(root: Path, n_objects=30, per_object=6, seed=5) -> Path:
    """Linearly separable patch set: graspable patches carry a bright
    horizontal band mid-patch, ungraspable ones are pure noise."""
    rng = np.random.default_rng(seed)
    root.mkdir(parents=True, exist_ok=True)
    lines = []
    for obj in range(n_objects):
        for j in range(per_object):
            label = j % 2
            patch = rng.uniform(0.0, 0.35, (24, 24, 3)).astype(np.float32)
            if label:
                patch[8:16, :, :] += rng.uniform(0.5, 0.65)
            np.save(root / f"obj{obj:02d}_{j}.npy", np.clip(patch, 0, 1))
            lines.append(f"obj{obj:02d},{label},obj{obj:02d}_{j}.npy")
    (root / "manifest.csv").write_text("\n".join(lines) + "\n")
    return root / "manifest.csv"


@pytest.fixture(scope="session")
def separable_manifest(tmp_path_factory):
    return build_separable(tmp_path_factory.mktemp("patches"))


@pytest.fixture(scope="session")
def tiny_manifest(tmp_path_factory):
    return build_separable(tmp_path_factory.mktemp("tiny"), n_objects=4, per_object=4)


@pytest.fixture(scope="session")
def fixture_patches():
    rng = np.random.default_rng(77)
    return [rng.random((24, 24, 3), dtype=np.float32) for _ in range(20)]
