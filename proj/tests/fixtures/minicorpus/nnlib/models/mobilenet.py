import torch.nn as nn

from ..blocks.mbconv import MBConv
from ..common.utils import make_divisible
from ..layers.conv import ConvBNAct
from ..layers.pooling import GlobalAvgPool

CONFIG = [
    # expand, channels, repeats, stride
    (1, 16, 1, 1),
    (6, 24, 2, 2),
    (6, 32, 3, 2),
]


class MobileNetV2(nn.Module):
    def __init__(self, width_mult=1.0, num_classes=1000):
        super().__init__()
        ch = make_divisible(32 * width_mult)
        layers = [ConvBNAct(3, ch, 3, 2)]
        for t, c, n, s in CONFIG:
            out = make_divisible(c * width_mult)
            for i in range(n):
                layers.append(MBConv(ch, out, t, s if i == 0 else 1))
                ch = out
        self.features = nn.Sequential(*layers)
        self.pool = GlobalAvgPool()
        self.classifier = nn.Linear(ch, num_classes)

    def forward(self, x):
        return self.classifier(self.pool(self.features(x)))
