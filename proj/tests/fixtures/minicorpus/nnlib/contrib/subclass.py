from ..layers.attention import MultiHeadAttention


class GatedAttention(MultiHeadAttention):
    def forward(self, x, mask=None):
        return super().forward(x, mask) * 0.5
