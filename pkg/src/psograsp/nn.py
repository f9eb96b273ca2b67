"""From-scratch forward inference for the grasp identification CNN.

The network takes a 24x24x3 patch and outputs two softmax probabilities
(ungraspable, graspable).  Fixed layer stack:

* conv 3x3, 32 kernels, stride 1, valid padding, + batchnorm + ReLU
* 3 x [conv 3x3, 64 kernels, stride 2, valid, + batchnorm + ReLU]
* 4 x [conv 3x3, 128 kernels, stride 2, + batchnorm + ReLU]
* global average pooling over the 128 channels
* 1x1 "ascend" convolution to 256 channels (width stored in the weight file)
* 1x1 "reduce" convolution to 2 channels
* softmax

Spatial sizes run 24 -> 22 -> 10 -> 4 -> 1 under valid padding, so the last
four convolutions would be impossible on a 1x1 input; any layer whose input
is smaller than its kernel switches to SAME (zero) padding.  Dropout between
the head convolutions is identity at inference.

Weights travel in a little-endian binary format (see README):

    magic "GNWB" | version u32 | layer_count u32 | bn_eps f32
    per layer: kind u8 (1 conv+bn, 2 conv) | stride u8 | reserved u16
               kh,kw,cin,cout u32 x4 | kernel f32[kh*kw*cin*cout]
               bias f32[cout] | (kind 1 only) gamma,beta,mean,var f32[cout] x4

Kernel values are row-major over (kh, kw, cin, cout).  Save/load round-trips
are bit-exact.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import accel

MAGIC = b"GNWB"
FORMAT_VERSION = 1
DEFAULT_BN_EPS = 1e-5
DEFAULT_ASCEND_WIDTH = 256

# (kind, kernel_size, cin, cout, stride); cout None means read from file.
_CONV_STACK = (
    ("conv_bn", 3, 3, 32, 1),
    ("conv_bn", 3, 32, 64, 2),
    ("conv_bn", 3, 64, 64, 2),
    ("conv_bn", 3, 64, 64, 2),
    ("conv_bn", 3, 64, 128, 2),
    ("conv_bn", 3, 128, 128, 2),
    ("conv_bn", 3, 128, 128, 2),
    ("conv_bn", 3, 128, 128, 2),
)
N_CLASSES = 2


class ShapeMismatchError(ValueError):
    """Operand shapes are incompatible."""


class NonPositiveVarianceError(ValueError):
    """Batch-norm running variance must be strictly positive."""


class WeightMismatchError(ValueError):
    """Weights bundle does not fit the fixed architecture."""


class BadMagicError(ValueError):
    """Weight file does not start with the expected magic bytes."""


class VersionMismatchError(ValueError):
    """Weight file version is not supported."""


class TruncatedFileError(ValueError):
    """Weight file ends early or has trailing bytes."""


class ArchitectureMismatchError(ValueError):
    """Weight file layer structure does not match the fixed architecture."""


@dataclass
class LayerRecord:
    """One serialized layer: kernel + bias, batch-norm stats when present."""

    kind: str  # "conv_bn" | "conv"
    stride: int
    kernel: np.ndarray  # (kh, kw, cin, cout) float32
    bias: np.ndarray  # (cout,) float32
    gamma: np.ndarray | None = None
    beta: np.ndarray | None = None
    mean: np.ndarray | None = None
    var: np.ndarray | None = None


@dataclass
class WeightsBundle:
    layers: list[LayerRecord] = field(default_factory=list)
    bn_eps: float = DEFAULT_BN_EPS

    def validate(self) -> None:
        """Check the layer list against the fixed architecture."""
        if len(self.layers) != len(_CONV_STACK) + 2:
            raise ArchitectureMismatchError(
                f"expected {len(_CONV_STACK) + 2} layers, got {len(self.layers)}"
            )
        for i, (rec, (kind, k, cin, cout, stride)) in enumerate(zip(self.layers, _CONV_STACK)):
            self._check(i, rec, kind, k, cin, cout, stride)
        ascend = self.layers[len(_CONV_STACK)]
        reduce_ = self.layers[len(_CONV_STACK) + 1]
        self._check(len(_CONV_STACK), ascend, "conv", 1, _CONV_STACK[-1][3], None, 1)
        self._check(len(_CONV_STACK) + 1, reduce_, "conv", 1, ascend.kernel.shape[3], N_CLASSES, 1)

    @staticmethod
    def _check(i, rec, kind, k, cin, cout, stride) -> None:
        kh, kw, rcin, rcout = rec.kernel.shape
        if rec.kind != kind:
            raise ArchitectureMismatchError(f"layer {i}: kind {rec.kind!r}, expected {kind!r}")
        if (kh, kw) != (k, k) or rcin != cin or (cout is not None and rcout != cout):
            raise ArchitectureMismatchError(
                f"layer {i}: kernel {rec.kernel.shape}, expected ({k},{k},{cin},{cout or 'any'})"
            )
        if rec.stride != stride:
            raise ArchitectureMismatchError(f"layer {i}: stride {rec.stride}, expected {stride}")
        if rec.bias.shape != (rcout,):
            raise ArchitectureMismatchError(f"layer {i}: bias shape {rec.bias.shape}")
        if kind == "conv_bn":
            for name in ("gamma", "beta", "mean", "var"):
                arr = getattr(rec, name)
                if arr is None or arr.shape != (rcout,):
                    raise ArchitectureMismatchError(f"layer {i}: bad batch-norm field {name}")
            if np.any(rec.var <= 0.0):
                raise NonPositiveVarianceError(f"layer {i}: running variance must be > 0")


# ---------------------------------------------------------------------------
# Primitive operations
# ---------------------------------------------------------------------------


def _conv2d_valid_np(x: np.ndarray, kernels: np.ndarray, stride: int) -> np.ndarray:
    kh, kw, cin, cout = kernels.shape
    ih, iw, _ = x.shape
    oh = (ih - kh) // stride + 1
    ow = (iw - kw) // stride + 1
    s0, s1, s2 = x.strides
    windows = np.lib.stride_tricks.as_strided(
        x,
        shape=(oh, ow, kh, kw, cin),
        strides=(s0 * stride, s1 * stride, s0, s1, s2),
        writeable=False,
    )
    return np.tensordot(windows, kernels, axes=([2, 3, 4], [0, 1, 2]))


if accel.HAS_NUMBA:
    from numba import njit

    @njit(cache=True, nogil=True, fastmath=True)
    def _conv2d_valid_nb(x, kernels, stride, out):  # pragma: no cover - via wrapper
        # Innermost loop runs over the contiguous output-channel axis of both
        # the kernel tensor and the output row, so it vectorizes.
        kh, kw, cin, cout = kernels.shape
        oh, ow, _ = out.shape
        for oy in range(oh):
            for ox in range(ow):
                for co in range(cout):
                    out[oy, ox, co] = 0.0
                for dy in range(kh):
                    for dx in range(kw):
                        for ci in range(cin):
                            xv = x[oy * stride + dy, ox * stride + dx, ci]
                            for co in range(cout):
                                out[oy, ox, co] += xv * kernels[dy, dx, ci, co]


def conv2d(x: np.ndarray, kernels: np.ndarray, stride: int = 1) -> np.ndarray:
    """Valid-padding cross-correlation of (H, W, Cin) with (kh, kw, Cin, Cout).

    Output spatial size is floor((in - k) / stride) + 1.
    """
    if x.ndim != 3 or kernels.ndim != 4:
        raise ShapeMismatchError(f"bad ranks: input {x.shape}, kernels {kernels.shape}")
    kh, kw, cin, cout = kernels.shape
    if x.shape[2] != cin:
        raise ShapeMismatchError(f"input channels {x.shape[2]} != kernel cin {cin}")
    if x.shape[0] < kh or x.shape[1] < kw:
        raise ShapeMismatchError(f"kernel {kh}x{kw} larger than input {x.shape[:2]}")
    if stride < 1:
        raise ShapeMismatchError(f"stride must be >= 1, got {stride}")
    x64 = np.ascontiguousarray(x, dtype=np.float64)
    k64 = np.ascontiguousarray(kernels, dtype=np.float64)
    if accel.active():
        oh = (x.shape[0] - kh) // stride + 1
        ow = (x.shape[1] - kw) // stride + 1
        out = np.empty((oh, ow, cout), np.float64)
        _conv2d_valid_nb(x64, k64, stride, out)
        return out
    return _conv2d_valid_np(x64, k64, stride)


def pad_same(x: np.ndarray, k: int, stride: int) -> np.ndarray:
    """Zero-pad so a valid k-conv yields ceil(in / stride) outputs per axis."""
    ih, iw = x.shape[:2]
    oh = -(-ih // stride)
    ow = -(-iw // stride)
    pad_h = max((oh - 1) * stride + k - ih, 0)
    pad_w = max((ow - 1) * stride + k - iw, 0)
    return np.pad(
        x,
        ((pad_h // 2, pad_h - pad_h // 2), (pad_w // 2, pad_w - pad_w // 2), (0, 0)),
    )


def batchnorm_infer(
    x: np.ndarray,
    gamma: np.ndarray,
    beta: np.ndarray,
    mean: np.ndarray,
    var: np.ndarray,
    eps: float = DEFAULT_BN_EPS,
) -> np.ndarray:
    """Per-channel inference normalization: gamma*(x-mean)/sqrt(var+eps)+beta."""
    c = x.shape[-1]
    for name, arr in (("gamma", gamma), ("beta", beta), ("mean", mean), ("var", var)):
        if np.shape(arr) != (c,):
            raise ShapeMismatchError(f"{name} must have shape ({c},), got {np.shape(arr)}")
    if np.any(np.asarray(var) <= 0.0):
        raise NonPositiveVarianceError("variance entries must be strictly positive")
    scale = gamma / np.sqrt(np.asarray(var, np.float64) + eps)
    return (x - mean) * scale + beta


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def gap(x: np.ndarray) -> np.ndarray:
    """Global average pooling: spatial mean per channel."""
    if x.ndim != 3 or x.shape[0] == 0 or x.shape[1] == 0:
        raise ShapeMismatchError(f"gap expects nonempty (H, W, C), got {x.shape}")
    return x.mean(axis=(0, 1))


def softmax(x: np.ndarray) -> np.ndarray:
    """Numerically stable softmax over a vector."""
    z = np.asarray(x, np.float64)
    e = np.exp(z - z.max())
    return e / e.sum()


# ---------------------------------------------------------------------------
# Full forward pass
# ---------------------------------------------------------------------------


def class_probs(patch: np.ndarray, wts: WeightsBundle) -> np.ndarray:
    """Run the network; returns (p_ungraspable, p_graspable), summing to 1."""
    if patch.shape != (24, 24, 3):
        raise WeightMismatchError(f"patch must be 24x24x3, got {patch.shape}")
    try:
        wts.validate()
    except (ArchitectureMismatchError, NonPositiveVarianceError) as e:
        raise WeightMismatchError(str(e)) from e
    x = np.asarray(patch, np.float64)
    n_conv = len(_CONV_STACK)
    for rec in wts.layers[:n_conv]:
        k = rec.kernel.shape[0]
        if x.shape[0] < k or x.shape[1] < k:
            x = pad_same(x, k, rec.stride)
        x = conv2d(x, rec.kernel, rec.stride) + rec.bias
        x = batchnorm_infer(x, rec.gamma, rec.beta, rec.mean, rec.var, wts.bn_eps)
        x = relu(x)
    v = gap(x)
    for rec in wts.layers[n_conv:]:
        # 1x1 convolution on a pooled vector is an affine map; dropout is
        # identity at inference.
        v = v @ rec.kernel[0, 0].astype(np.float64) + rec.bias
    return softmax(v)


def forward(patch: np.ndarray, wts: WeightsBundle) -> float:
    """Graspable-class probability for a 24x24x3 patch, in [0, 1]."""
    return float(class_probs(patch, wts)[1])


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

_KIND_CODES = {"conv_bn": 1, "conv": 2}
_CODE_KINDS = {v: k for k, v in _KIND_CODES.items()}


def save_weights(wts: WeightsBundle, path) -> None:
    """Serialize a bundle; the byte layout is documented in the module docstring."""
    wts.validate()
    buf = bytearray()
    buf += MAGIC
    buf += struct.pack("<II", FORMAT_VERSION, len(wts.layers))
    buf += struct.pack("<f", wts.bn_eps)
    for rec in wts.layers:
        kh, kw, cin, cout = rec.kernel.shape
        buf += struct.pack("<BBH", _KIND_CODES[rec.kind], rec.stride, 0)
        buf += struct.pack("<IIII", kh, kw, cin, cout)
        buf += np.ascontiguousarray(rec.kernel, "<f4").tobytes()
        buf += np.ascontiguousarray(rec.bias, "<f4").tobytes()
        if rec.kind == "conv_bn":
            for arr in (rec.gamma, rec.beta, rec.mean, rec.var):
                buf += np.ascontiguousarray(arr, "<f4").tobytes()
    Path(path).write_bytes(bytes(buf))


class _Reader:
    def __init__(self, data: bytes, path: str):
        self.data = data
        self.path = path
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedFileError(f"{self.path}: expected {n} more bytes at offset {self.pos}")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def floats(self, n: int) -> np.ndarray:
        return np.frombuffer(self.take(4 * n), "<f4").copy()


def load_weights(path) -> WeightsBundle:
    """Load and validate a weight file; inverse of :func:`save_weights`."""
    data = Path(path).read_bytes()
    rd = _Reader(data, str(path))
    if rd.take(4) != MAGIC:
        raise BadMagicError(f"{path}: bad magic, not a weight file")
    version, n_layers = struct.unpack("<II", rd.take(8))
    if version != FORMAT_VERSION:
        raise VersionMismatchError(f"{path}: version {version}, supported {FORMAT_VERSION}")
    (bn_eps,) = struct.unpack("<f", rd.take(4))
    layers = []
    for _ in range(n_layers):
        kind_code, stride, _reserved = struct.unpack("<BBH", rd.take(4))
        if kind_code not in _CODE_KINDS:
            raise ArchitectureMismatchError(f"{path}: unknown layer kind {kind_code}")
        kind = _CODE_KINDS[kind_code]
        kh, kw, cin, cout = struct.unpack("<IIII", rd.take(16))
        if max(kh, kw, cin, cout) > 1 << 20:
            raise ArchitectureMismatchError(f"{path}: implausible layer shape")
        kernel = rd.floats(kh * kw * cin * cout).reshape(kh, kw, cin, cout)
        bias = rd.floats(cout)
        rec = LayerRecord(kind=kind, stride=stride, kernel=kernel, bias=bias)
        if kind == "conv_bn":
            rec.gamma = rd.floats(cout)
            rec.beta = rd.floats(cout)
            rec.mean = rd.floats(cout)
            rec.var = rd.floats(cout)
        layers.append(rec)
    if rd.pos != len(data):
        raise TruncatedFileError(f"{path}: {len(data) - rd.pos} trailing bytes")
    wts = WeightsBundle(layers=layers, bn_eps=float(bn_eps))
    wts.validate()
    return wts


def random_weights(seed: int = 0, ascend_width: int = DEFAULT_ASCEND_WIDTH) -> WeightsBundle:
    """Seeded random bundle matching the architecture; used for fixtures."""
    rng = np.random.default_rng(seed)
    layers = []
    for kind, k, cin, cout, stride in _CONV_STACK:
        scale = np.sqrt(2.0 / (k * k * cin))
        layers.append(
            LayerRecord(
                kind=kind,
                stride=stride,
                kernel=(rng.normal(0.0, scale, (k, k, cin, cout))).astype(np.float32),
                bias=rng.normal(0.0, 0.05, cout).astype(np.float32),
                gamma=rng.uniform(0.7, 1.3, cout).astype(np.float32),
                beta=rng.normal(0.0, 0.1, cout).astype(np.float32),
                mean=rng.normal(0.0, 0.1, cout).astype(np.float32),
                var=rng.uniform(0.5, 1.5, cout).astype(np.float32),
            )
        )
    widths = [(128, ascend_width), (ascend_width, N_CLASSES)]
    for cin, cout in widths:
        layers.append(
            LayerRecord(
                kind="conv",
                stride=1,
                kernel=rng.normal(0.0, np.sqrt(1.0 / cin), (1, 1, cin, cout)).astype(np.float32),
                bias=rng.normal(0.0, 0.05, cout).astype(np.float32),
            )
        )
    return WeightsBundle(layers=layers)
