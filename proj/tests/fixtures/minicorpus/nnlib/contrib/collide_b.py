import torch.nn as nn


def scale(x):
    return x * 2.0


class Scaler(nn.Module):
    def forward(self, x):
        return scale(x)
