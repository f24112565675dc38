import torch.nn as nn

from .cycle_b import B_SCALE

A_SCALE = B_SCALE * 2


class CycleBlock(nn.Module):
    scale = A_SCALE

    def forward(self, x):
        return x * self.scale
