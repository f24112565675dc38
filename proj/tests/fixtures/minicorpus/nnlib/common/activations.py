import math

import torch
import torch.nn as nn

__all__ = ["gelu_tanh", "swish", "Swish", "HardSigmoid"]

_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


def gelu_tanh(x):
    return 0.5 * x * (1.0 + torch.tanh(_SQRT_2_OVER_PI * (x + 0.044715 * x.pow(3))))


def swish(x):
    return x * torch.sigmoid(x)


def _private_helper(x):
    return x


class Swish(nn.Module):
    def forward(self, x):
        return swish(x)


class HardSigmoid(nn.Module):
    def __init__(self, inplace=False):
        super().__init__()
        self.inplace = inplace

    def forward(self, x):
        return torch.clamp(x + 3.0, 0.0, 6.0) / 6.0
