import torch.nn as nn

type Shape = tuple[int, ...]


class FutureBlock(nn.Module):
    def forward(self, x):
        return x
