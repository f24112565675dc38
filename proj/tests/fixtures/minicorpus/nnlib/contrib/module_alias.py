import torch.nn as nn

import nnlib.common.utils as U


class ScaledLinear(nn.Module):
    def __init__(self, dim):
        super().__init__()
        self.fc = nn.Linear(dim, U.make_divisible(dim))

    def forward(self, x):
        return self.fc(x)
