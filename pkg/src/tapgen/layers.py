"""Shared building blocks: initializers and the conv->affine->ReLU block.

Normalization layers are replaced by a per-channel learnable affine
(scale init 1, shift init 0) so forward passes are deterministic and
independent of batch composition.
"""

import math

import numpy as np

from . import autodiff as ad
from .autodiff import Parameter, Tensor


def he_conv1d(rng, c_out: int, c_in: int, k: int) -> np.ndarray:
    return rng.normal(0.0, math.sqrt(2.0 / (c_in * k)), size=(c_out, c_in, k))


def he_conv2d(rng, c_out: int, c_in: int, k: int) -> np.ndarray:
    return rng.normal(0.0, math.sqrt(2.0 / (c_in * k * k)), size=(c_out, c_in, k, k))


def he_dense(rng, n_in: int, n_out: int) -> np.ndarray:
    return rng.normal(0.0, math.sqrt(2.0 / n_in), size=(n_in, n_out))


class ConvBlock:
    """1-D conv (kernel 3, stride 1, same padding) -> channel affine -> ReLU."""

    def __init__(self, c_in: int, c_out: int, rng, name: str):
        self.w = Parameter(he_conv1d(rng, c_out, c_in, 3), f"{name}.w")
        self.scale = Parameter(np.ones((c_out, 1)), f"{name}.scale")
        self.shift = Parameter(np.zeros((c_out, 1)), f"{name}.shift")

    def __call__(self, x: Tensor) -> Tensor:
        y = ad.conv1d(x, self.w)
        return ad.relu(ad.add(ad.mul(y, self.scale), self.shift))

    def parameters(self) -> list[Parameter]:
        return [self.w, self.scale, self.shift]


class PointConv1d:
    """Kernel-1 1-D conv with bias (a per-position linear map).

    Logit-producing heads pass init_scale << 1: a head whose initial logits
    are large gets corrected so hard in the first steps that its sigmoid can
    saturate beyond recovery at this training scale.
    """

    def __init__(self, c_in: int, c_out: int, rng, name: str, init_scale: float = 1.0):
        self.w = Parameter(init_scale * he_conv1d(rng, c_out, c_in, 1), f"{name}.w")
        self.b = Parameter(np.zeros(c_out), f"{name}.b")

    def __call__(self, x: Tensor) -> Tensor:
        return ad.conv1d(x, self.w, self.b)

    def parameters(self) -> list[Parameter]:
        return [self.w, self.b]
