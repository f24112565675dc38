import torch
import torch.nn as nn
import torch.nn.functional as F


class GeMPool(nn.Module):
    def __init__(self, p=3.0, eps=1e-6):
        super().__init__()
        self.p = nn.Parameter(torch.ones(1) * p)
        self.eps = eps

    def forward(self, x):
        x = x.clamp(min=self.eps).pow(self.p)
        return F.avg_pool2d(x, x.shape[-2:]).pow(1.0 / self.p)


class GlobalAvgPool(nn.Module):
    def __init__(self, flatten=True):
        super().__init__()
        self.flatten = flatten

    def forward(self, x):
        x = x.mean((2, 3), keepdim=not self.flatten)
        return x
