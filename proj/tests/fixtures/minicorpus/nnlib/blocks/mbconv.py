import torch.nn as nn

from ..common.utils import make_divisible
from ..layers.conv import ConvBNAct, DepthwiseSeparableConv, SqueezeExcite


class MBConv(nn.Module):
    def __init__(self, in_ch, out_ch, expand_ratio=4, stride=1):
        super().__init__()
        mid = make_divisible(in_ch * expand_ratio)
        self.expand = ConvBNAct(in_ch, mid, 1)
        self.dw = DepthwiseSeparableConv(mid, mid, stride)
        self.se = SqueezeExcite(mid)
        self.project = ConvBNAct(mid, out_ch, 1, act=False)
        self.use_res = stride == 1 and in_ch == out_ch

    def forward(self, x):
        y = self.project(self.se(self.dw(self.expand(x))))
        return x + y if self.use_res else y
