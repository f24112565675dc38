import torch.nn as nn

from ..common import EPS, make_divisible


class ReexportUser(nn.Module):
    def __init__(self, dim):
        super().__init__()
        self.dim = make_divisible(dim)
        self.eps = EPS

    def forward(self, x):
        return x / (x.norm(dim=-1, keepdim=True) + self.eps)
