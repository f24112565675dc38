import functools

import torch.nn as nn

from ..common.registry import register


def with_name(name):
    def deco(cls):
        cls.display_name = name
        return cls

    return deco


@functools.lru_cache(maxsize=None)
def table(n):
    return [i * i for i in range(n)]


@register
@with_name("squares")
class SquareTable(nn.Module):
    def forward(self, x):
        return x * len(table(4))
