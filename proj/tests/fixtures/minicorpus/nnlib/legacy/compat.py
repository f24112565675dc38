import sys

import torch.nn as nn

if sys.version_info >= (3, 8):
    from functools import cached_property
else:
    cached_property = property


class CompatBlock(nn.Module):
    @cached_property
    def size(self):
        return 4

    def forward(self, x):
        return x * self.size
