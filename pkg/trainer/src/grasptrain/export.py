"""Weight export in the engine's binary format, and the parity check.

The writer below is an independent implementation of the documented byte
layout (magic "GNWB", version, layer count, bn_eps, then per-layer records
with little-endian float32 payloads); the engine's loader is the read side
of the contract.  Batch-norm layers are exported in inference form: gamma,
beta, and the running mean/variance.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .model import CONV_STACK, GraspNet

MAGIC = b"GNWB"
FORMAT_VERSION = 1
KIND_CONV_BN = 1
KIND_CONV = 2


class ArchitectureMismatchError(ValueError):
    """Model does not match the fixed export architecture."""


def _kernel_bytes(conv: torch.nn.Conv2d) -> tuple[np.ndarray, np.ndarray]:
    # torch stores (out, in, kh, kw); the file wants (kh, kw, in, out).
    kernel = conv.weight.detach().cpu().numpy().transpose(2, 3, 1, 0)
    bias = conv.bias.detach().cpu().numpy()
    return np.ascontiguousarray(kernel, "<f4"), np.ascontiguousarray(bias, "<f4")


def export_weights(model: GraspNet, path) -> None:
    """Serialize a trained model for the inference engine."""
    convs = [m for m in model.features if isinstance(m, torch.nn.Conv2d)]
    bns = [m for m in model.features if isinstance(m, torch.nn.BatchNorm2d)]
    if len(convs) != len(CONV_STACK) or len(bns) != len(CONV_STACK):
        raise ArchitectureMismatchError(
            f"expected {len(CONV_STACK)} conv+bn blocks, found {len(convs)}/{len(bns)}"
        )
    for conv, (cin, cout, stride, _pad) in zip(convs, CONV_STACK):
        if conv.in_channels != cin or conv.out_channels != cout or conv.stride[0] != stride:
            raise ArchitectureMismatchError(
                f"conv {conv.in_channels}->{conv.out_channels} s{conv.stride[0]} does not match "
                f"{cin}->{cout} s{stride}"
            )
    if model.reduce.out_channels != 2 or model.ascend.in_channels != 128:
        raise ArchitectureMismatchError("head must map 128 -> ascend width -> 2")

    buf = bytearray()
    buf += MAGIC
    buf += struct.pack("<II", FORMAT_VERSION, len(CONV_STACK) + 2)
    buf += struct.pack("<f", bns[0].eps)
    for conv, bn, (_cin, _cout, stride, _pad) in zip(convs, bns, CONV_STACK):
        kernel, bias = _kernel_bytes(conv)
        kh, kw, cin, cout = kernel.shape
        buf += struct.pack("<BBH", KIND_CONV_BN, stride, 0)
        buf += struct.pack("<IIII", kh, kw, cin, cout)
        buf += kernel.tobytes() + bias.tobytes()
        for tensor in (bn.weight, bn.bias, bn.running_mean, bn.running_var):
            buf += np.ascontiguousarray(tensor.detach().cpu().numpy(), "<f4").tobytes()
    for conv in (model.ascend, model.reduce):
        kernel, bias = _kernel_bytes(conv)
        kh, kw, cin, cout = kernel.shape
        buf += struct.pack("<BBH", KIND_CONV, 1, 0)
        buf += struct.pack("<IIII", kh, kw, cin, cout)
        buf += kernel.tobytes() + bias.tobytes()
    Path(path).write_bytes(bytes(buf))


@dataclass
class ParityReport:
    n_patches: int
    max_abs_deviation: float
    deviations: list[float]

    @property
    def ok(self) -> bool:
        return self.max_abs_deviation < 1e-5


def parity_check(model: GraspNet, weights_path, patches) -> ParityReport:
    """Compare trainer-side forward probabilities against the engine.

    The engine side loads ``weights_path`` (so file corruption shows up as a
    deviation); the trainer side runs the given model in double precision.
    """
    from psograsp.nn import forward, load_weights

    patches = list(patches)
    if not patches:
        raise ValueError("parity check needs at least one patch")
    bundle = load_weights(weights_path)
    model = model.double().eval()
    deviations = []
    for patch in patches:
        arr = np.asarray(patch, np.float64)
        x = torch.from_numpy(arr.transpose(2, 0, 1).copy()).unsqueeze(0)
        ours = float(model.graspable_probability(x)[0])
        engine = forward(arr.astype(np.float32), bundle)
        deviations.append(abs(ours - engine))
    return ParityReport(
        n_patches=len(patches),
        max_abs_deviation=max(deviations),
        deviations=deviations,
    )
