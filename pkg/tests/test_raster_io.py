import numpy as np
import pytest
from PIL import Image

from psograsp.geometry import GraspRect, corners
from psograsp.raster_io import annotate, read_image, read_ppm, write_ppm


class TestPpm:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        img = (rng.integers(0, 256, (15, 11, 3)) / 255.0).astype(np.float32)
        path = tmp_path / "x.ppm"
        write_ppm(path, img)
        back = read_ppm(path)
        assert back.shape == (15, 11, 3)
        assert np.allclose(back, img, atol=0.5 / 255)

    def test_deterministic_bytes(self, tmp_path):
        img = np.random.default_rng(1).random((8, 9, 3)).astype(np.float32)
        write_ppm(tmp_path / "a.ppm", img)
        write_ppm(tmp_path / "b.ppm", img)
        assert (tmp_path / "a.ppm").read_bytes() == (tmp_path / "b.ppm").read_bytes()

    def test_header_comments(self, tmp_path):
        data = b"P6\n# a comment\n2 1\n255\n" + bytes([255, 0, 0, 0, 255, 0])
        path = tmp_path / "c.ppm"
        path.write_bytes(data)
        img = read_ppm(path)
        assert img.shape == (1, 2, 3)
        assert img[0, 0, 0] == 1.0 and img[0, 1, 1] == 1.0

    def test_rejects_non_p6(self, tmp_path):
        path = tmp_path / "bad.ppm"
        path.write_bytes(b"P3\n1 1\n255\n1 2 3\n")
        with pytest.raises(ValueError):
            read_ppm(path)

    def test_truncated_pixels(self, tmp_path):
        path = tmp_path / "short.ppm"
        path.write_bytes(b"P6\n4 4\n255\n" + b"\x00" * 10)
        with pytest.raises(ValueError):
            read_ppm(path)


class TestPng:
    def test_read_png(self, tmp_path):
        arr = np.zeros((6, 5, 3), np.uint8)
        arr[2, 3] = (255, 128, 0)
        path = tmp_path / "x.png"
        Image.fromarray(arr).save(path)
        img = read_image(path)
        assert img.shape == (6, 5, 3)
        assert img[2, 3, 0] == 1.0
        assert img[2, 3, 1] == pytest.approx(128 / 255)

    def test_grayscale_png_expands_to_rgb(self, tmp_path):
        arr = np.full((4, 4), 200, np.uint8)
        path = tmp_path / "g.png"
        Image.fromarray(arr, mode="L").save(path)
        img = read_image(path)
        assert img.shape == (4, 4, 3)
        assert np.allclose(img, 200 / 255)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            read_image(tmp_path / "nope.png")


class TestAnnotate:
    def test_draws_rect_edges(self, tmp_path):
        img = np.zeros((64, 64, 3), np.float32)
        r = GraspRect(32, 32, 0, 10, 20)
        out = tmp_path / "anno.ppm"
        annotate(img, [r], out)
        drawn = read_ppm(out)
        # Corner pixels of the rectangle must be colored, interior untouched.
        for cx, cy in corners(r):
            assert drawn[int(round(cy)), int(round(cx))].sum() > 0
        assert drawn[32, 32].sum() == 0.0
