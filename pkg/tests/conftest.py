import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from psograsp import GraspRect, corners, nn  # noqa: E402
from psograsp.raster_io import write_ppm  # noqa: E402


@pytest.fixture(scope="session")
def fixture_weights():
    return nn.random_weights(seed=11)


@pytest.fixture(scope="session")
def fixture_patches():
    rng = np.random.default_rng(100)
    return [rng.random((24, 24, 3), dtype=np.float32) for _ in range(20)]


@pytest.fixture
def flat_image():
    return np.full((224, 224, 3), 0.5, np.float32)


def make_object_image(rect: GraspRect, size: int = 224) -> np.ndarray:
    """White background with a dark axis-aligned blob around the rect center."""
    img = np.full((size, size, 3), 0.95, np.float32)
    cs = corners(rect)
    x0, x1 = int(cs[:, 0].min()), int(np.ceil(cs[:, 0].max()))
    y0, y1 = int(cs[:, 1].min()), int(np.ceil(cs[:, 1].max()))
    img[max(y0, 0) : y1 + 1, max(x0, 0) : x1 + 1] = 0.15
    return img


def write_cornell_example(root: Path, ex_id: str, rect: GraspRect, *, negatives=(), extra_pos_lines=""):
    """One synthetic dataset example: image + cpos/cneg vertex files."""
    img = make_object_image(rect)
    write_ppm(root / f"{ex_id}r.ppm", img)
    lines = []
    for p in corners(rect):
        lines.append(f"{p[0]:.2f} {p[1]:.2f}")
    text = "\n".join(lines) + "\n" + extra_pos_lines
    (root / f"{ex_id}cpos.txt").write_text(text)
    neg_lines = []
    for r in negatives:
        for p in corners(r):
            neg_lines.append(f"{p[0]:.2f} {p[1]:.2f}")
    (root / f"{ex_id}cneg.txt").write_text("\n".join(neg_lines) + ("\n" if neg_lines else ""))
    return img


@pytest.fixture
def cornell_dir(tmp_path):
    """Three-example synthetic dataset with known rectangles."""
    rects = {
        "ex0": GraspRect(100, 110, 0, 20, 40),
        "ex1": GraspRect(120, 100, 90, 24, 36),
        "ex2": GraspRect(112, 112, 45, 18, 44),
    }
    for ex_id, rect in rects.items():
        write_cornell_example(
            tmp_path, ex_id, rect, negatives=[GraspRect(60, 60, 0, 10, 20)]
        )
    return tmp_path, rects
