"""Torch definition of the grasp-patch classifier.

Mirrors the inference engine's fixed architecture exactly: eight 3x3
convolutions with batch norm and ReLU (stride 1, then seven stride 2),
global average pooling, and a 1x1 ascend/reduce head.  Spatial sizes shrink
24 -> 22 -> 10 -> 4 -> 1 under valid padding; the four 128-channel layers
see 1x1 inputs and use padding 1, which reproduces the engine's SAME-padding
rule.  Dropout precedes each head convolution and is inactive at eval.
"""

from __future__ import annotations

import torch
from torch import nn

BN_EPS = 1e-5

# (cin, cout, stride, padding) for the eight conv+bn blocks.  Spatial sizes
# hit 1x1 after the fourth block, so the last four need padding 1.
CONV_STACK = (
    (3, 32, 1, 0),
    (32, 64, 2, 0),
    (64, 64, 2, 0),
    (64, 64, 2, 0),
    (64, 128, 2, 1),
    (128, 128, 2, 1),
    (128, 128, 2, 1),
    (128, 128, 2, 1),
)


class GraspNet(nn.Module):
    def __init__(self, ascend_width: int = 256, dropout: float = 0.5):
        super().__init__()
        blocks = []
        for cin, cout, stride, pad in CONV_STACK:
            blocks += [
                nn.Conv2d(cin, cout, 3, stride=stride, padding=pad),
                nn.BatchNorm2d(cout, eps=BN_EPS),
                nn.ReLU(inplace=True),
            ]
        self.features = nn.Sequential(*blocks)
        self.pool = nn.AdaptiveAvgPool2d(1)
        self.drop1 = nn.Dropout(dropout)
        self.ascend = nn.Conv2d(128, ascend_width, 1)
        self.drop2 = nn.Dropout(dropout)
        self.reduce = nn.Conv2d(ascend_width, 2, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = self.features(x)
        x = self.pool(x)
        x = self.ascend(self.drop1(x))
        x = self.reduce(self.drop2(x))
        return x.flatten(1)

    @torch.no_grad()
    def graspable_probability(self, patches: torch.Tensor) -> torch.Tensor:
        """Softmax probability of the graspable class for (N, 3, 24, 24)."""
        was_training = self.training
        self.eval()
        probs = torch.softmax(self.forward(patches), dim=1)[:, 1]
        if was_training:
            self.train()
        return probs


def patches_to_tensor(patches, dtype=torch.float32) -> torch.Tensor:
    """Stack (24, 24, 3) float arrays into an (N, 3, 24, 24) batch."""
    import numpy as np

    arr = np.stack([np.asarray(p) for p in patches]).transpose(0, 3, 1, 2)
    return torch.from_numpy(np.ascontiguousarray(arr)).to(dtype)
