import numpy as np
import pytest

from psograsp import accel
from psograsp.geometry import GraspRect
from psograsp.imaging import (
    NoForegroundError,
    OutOfBoundsError,
    TooSmallError,
    center_crop_window,
    estimate_object_scale,
    extract_patch,
    gray_histogram,
    otsu_threshold,
    preprocess,
    resize_bilinear,
)


@pytest.fixture(params=["numba", "numpy"])
def kernel_path(request, monkeypatch):
    monkeypatch.setattr(accel, "FORCE_NUMPY", request.param == "numpy")
    return request.param


class TestPreprocess:
    def test_crop_window_arithmetic(self):
        assert center_crop_window(640, 480) == (170, 90)
        assert center_crop_window(300, 300) == (0, 0)
        assert center_crop_window(301, 302) == (0, 1)

    def test_output_shape_and_crop_content(self, kernel_path):
        rng = np.random.default_rng(0)
        img = rng.random((480, 640, 3)).astype(np.float32)
        out = preprocess(img)
        assert out.shape == (224, 224, 3)
        # Must equal resizing the [90:390, 170:470) window.
        manual = resize_bilinear(np.ascontiguousarray(img[90:390, 170:470]), 224, 224)
        assert np.array_equal(out, manual)

    def test_constant_preserved(self, kernel_path):
        img = np.full((320, 300, 3), 0.37, np.float32)
        out = preprocess(img)
        assert out.shape == (224, 224, 3)
        assert np.allclose(out, 0.37, atol=1e-6)

    def test_too_small(self):
        with pytest.raises(TooSmallError):
            preprocess(np.zeros((480, 299, 3), np.float32))
        with pytest.raises(TooSmallError):
            preprocess(np.zeros((299, 480, 3), np.float32))

    def test_resize_matches_hand_formula(self):
        # Half-pixel mapping: out[i] samples src at (i + .5) * (in/out) - .5.
        img = np.arange(12, dtype=np.float32).reshape(1, 12, 1) / 12.0
        out = resize_bilinear(img, 1, 4)
        for j in range(4):
            sx = (j + 0.5) * 3.0 - 0.5
            x0 = int(sx)
            expect = img[0, x0, 0] * (1 - (sx - x0)) + img[0, x0 + 1, 0] * (sx - x0)
            assert out[0, j, 0] == pytest.approx(expect, abs=1e-6)

    def test_paths_agree(self, monkeypatch):
        rng = np.random.default_rng(5)
        img = rng.random((300, 340, 3)).astype(np.float32)
        monkeypatch.setattr(accel, "FORCE_NUMPY", False)
        a = preprocess(img)
        monkeypatch.setattr(accel, "FORCE_NUMPY", True)
        b = preprocess(img)
        assert np.allclose(a, b, atol=1e-6)


class TestExtractPatch:
    def test_band_and_padding(self, kernel_path):
        img = np.ones((224, 224, 3), np.float32)
        patch = extract_patch(img, GraspRect(112, 112, 0, 10, 20))
        assert patch.shape == (24, 24, 3)
        # h/w = 0.5: rows 6..17 carry content, 6 zero rows above and below.
        assert np.all(patch[:6] == 0.0)
        assert np.all(patch[18:] == 0.0)
        assert np.allclose(patch[6:18], 1.0, atol=1e-6)

    def test_padding_exactly_zero(self, kernel_path):
        rng = np.random.default_rng(1)
        img = rng.random((224, 224, 3)).astype(np.float32)
        patch = extract_patch(img, GraspRect(100, 90, 30, 12, 40))
        band = 12 / 40 * 24  # 7.2 content rows around the middle
        n_pad = int((24 - band) / 2)
        assert np.all(patch[:n_pad] == 0.0)
        assert np.all(patch[-n_pad:] == 0.0)

    def test_representation_swap_symmetry(self, kernel_path):
        rng = np.random.default_rng(2)
        img = rng.random((224, 224, 3)).astype(np.float32)
        a = extract_patch(img, GraspRect(112, 112, 20, 10, 30))
        b = extract_patch(img, GraspRect(112, 112, 110, 30, 10))
        assert np.allclose(a, b, atol=1e-6)

    def test_out_of_bounds(self):
        img = np.ones((224, 224, 3), np.float32)
        with pytest.raises(OutOfBoundsError):
            extract_patch(img, GraspRect(0, 0, 30, 10, 20))
        with pytest.raises(OutOfBoundsError):
            extract_patch(img, GraspRect(220, 112, 0, 10, 20))

    def test_output_range(self, kernel_path):
        rng = np.random.default_rng(3)
        img = rng.random((224, 224, 3)).astype(np.float32)
        for _ in range(20):
            r = GraspRect(
                rng.uniform(60, 160), rng.uniform(60, 160), rng.uniform(0, 180),
                rng.uniform(5, 40), rng.uniform(5, 40),
            )
            patch = extract_patch(img, r)
            assert patch.shape == (24, 24, 3)
            assert patch.min() >= 0.0 and patch.max() <= 1.0

    def test_paths_agree(self, monkeypatch):
        rng = np.random.default_rng(4)
        img = rng.random((224, 224, 3)).astype(np.float32)
        r = GraspRect(100, 120, 77, 17, 33)
        monkeypatch.setattr(accel, "FORCE_NUMPY", False)
        a = extract_patch(img, r)
        monkeypatch.setattr(accel, "FORCE_NUMPY", True)
        b = extract_patch(img, r)
        assert np.allclose(a, b, atol=1e-6)


class TestGrayHistogram:
    def test_all_black(self):
        hist = gray_histogram(np.zeros((10, 20, 3), np.float32))
        assert hist[0] == 200 and hist.sum() == 200

    def test_all_white(self):
        hist = gray_histogram(np.ones((10, 20, 1), np.float32))
        assert hist[255] == 200 and hist.sum() == 200

    def test_half_half(self):
        img = np.zeros((224, 224, 3), np.float32)
        img[:112] = 1.0
        hist = gray_histogram(img)
        assert hist[0] == hist[255] == 224 * 112
        assert hist.sum() == 224 * 224

    def test_luminance_weights(self):
        img = np.zeros((1, 1, 3), np.float32)
        img[0, 0] = (1.0, 0.0, 0.0)
        assert gray_histogram(img)[round(0.299 * 255)] == 1

    def test_total_count_always_matches(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            img = rng.random((17, 23, 3)).astype(np.float32)
            assert gray_histogram(img).sum() == 17 * 23


class TestEstimateObjectScale:
    def test_square_object(self):
        img = np.full((224, 224, 3), 0.95, np.float32)
        img[50:100, 60:110] = 0.1  # 50x50 dark square: foreground count 2500
        est = estimate_object_scale(img)
        assert est.size_estimate == pytest.approx(50.0, abs=5.0)
        assert est.w_range == pytest.approx((30.0, 100.0), abs=1e-6)
        assert est.h_range == pytest.approx((15.0, 70.0), abs=1e-6)

    def test_uniform_image_has_no_foreground(self):
        with pytest.raises(NoForegroundError):
            estimate_object_scale(np.full((224, 224, 3), 0.5, np.float32))

    def test_large_object_clamps_to_maxima(self):
        img = np.full((224, 224, 3), 0.95, np.float32)
        img[:, :112] = 0.1  # half the frame: size estimate ~158
        est = estimate_object_scale(img)
        assert est.size_estimate == pytest.approx(np.sqrt(224 * 112), abs=1e-6)
        assert est.w_range[1] == 100.0
        assert est.h_range[1] == 70.0

    def test_translation_invariance(self):
        a = np.full((224, 224, 3), 0.95, np.float32)
        b = a.copy()
        a[20:60, 30:70] = 0.1
        b[150:190, 100:140] = 0.1
        ea = estimate_object_scale(a)
        eb = estimate_object_scale(b)
        assert ea.size_estimate == eb.size_estimate
        assert ea.w_range == eb.w_range and ea.h_range == eb.h_range

    def test_otsu_splits_bimodal(self):
        hist = np.zeros(256, np.int64)
        hist[40] = 500
        hist[200] = 1500
        t = otsu_threshold(hist)
        assert 40 <= t < 200
