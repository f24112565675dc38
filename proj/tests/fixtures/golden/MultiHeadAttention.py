# @generated by scopeweaver extract; do not edit.
# target: minicorpus.nnlib.layers.attention.MultiHeadAttention
# index: 5b921a515e1f373b69c52f12a88a87ee263e3395
import math
import torch
import torch.nn as nn

DEFAULT_HEADS = 8


def scaled_dot_product(q, k, v, mask=None):
    scale = 1.0 / math.sqrt(q.size(-1))
    attn = torch.matmul(q, k.transpose(-2, -1)) * scale
    if mask is not None:
        attn = attn.masked_fill(mask == 0, float("-inf"))
    attn = attn.softmax(dim=-1)
    return torch.matmul(attn, v), attn


class MultiHeadAttention(nn.Module):
    """Multi-head self attention."""

    def __init__(self, dim, num_heads=DEFAULT_HEADS, qkv_bias=True):
        super().__init__()
        assert dim % num_heads == 0
        self.num_heads = num_heads
        self.head_dim = dim // num_heads
        self.qkv = nn.Linear(dim, dim * 3, bias=qkv_bias)
        self.proj = nn.Linear(dim, dim)

    def forward(self, x, mask=None):
        b, n, c = x.shape
        qkv = self.qkv(x).reshape(b, n, 3, self.num_heads, self.head_dim).permute(2, 0, 3, 1, 4)
        q, k, v = qkv.unbind(0)
        out, _ = scaled_dot_product(q, k, v, mask)
        return self.proj(out.transpose(1, 2).reshape(b, n, c))
