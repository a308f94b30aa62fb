"""
layers.py

Shared building blocks for the learned modules: a multi-head cross-attention with separate query/key/value/output
projections (so tests can set them by hand), timm MLPs with leaky-rectifier activations, sinusoidal position
encodings, and the initialization helpers every module applies.
"""

import math
from functools import partial
from typing import Optional

import torch
import torch.nn as nn
from einops import rearrange
from timm.models.vision_transformer import Mlp


def leaky_mlp(in_features: int, hidden_features: int, out_features: int, slope: float = 0.1) -> Mlp:
    """Two-layer MLP (`fc1` -> leaky-rectifier -> `fc2`)."""
    return Mlp(in_features, hidden_features, out_features, act_layer=partial(nn.LeakyReLU, negative_slope=slope))


def basic_init(module: nn.Module) -> None:
    """Xavier-uniform linear weights and zero biases; use with `module.apply`."""
    if isinstance(module, nn.Linear):
        nn.init.xavier_uniform_(module.weight)
        if module.bias is not None:
            nn.init.constant_(module.bias, 0)


def zero_init(linear: nn.Linear, bias: Optional[torch.Tensor] = None) -> None:
    """Zero a head's weight; its bias becomes `bias` (or zero)."""
    nn.init.constant_(linear.weight, 0)
    with torch.no_grad():
        linear.bias.copy_(bias if bias is not None else torch.zeros_like(linear.bias))


def sinusoidal_embedding(positions: torch.Tensor, dim: int, max_period: int = 10000) -> torch.Tensor:
    """
    Sinusoidal embeddings of (possibly fractional) 1-D positions.
    :param positions: a 1-D Tensor of N indices.
    :param dim: the dimension of the output.
    :return: an (N, dim) Tensor of positional embeddings.
    """
    half = dim // 2
    freqs = torch.exp(-math.log(max_period) * torch.arange(half, dtype=positions.dtype) / half)
    args = positions[:, None] * freqs[None]
    embedding = torch.cat([torch.cos(args), torch.sin(args)], dim=-1)
    if dim % 2:
        embedding = torch.cat([embedding, torch.zeros_like(embedding[:, :1])], dim=-1)
    return embedding


class CrossAttention(nn.Module):
    """Multi-head attention of a query set over a per-batch token set; returns the output projection (no residual)."""

    def __init__(self, dim: int, num_heads: int, query_dim: Optional[int] = None, token_dim: Optional[int] = None):
        super().__init__()
        assert dim % num_heads == 0, "dim should be divisible by num_heads"
        self.num_heads, self.head_dim = num_heads, dim // num_heads
        self.scale = self.head_dim**-0.5

        self.q_proj = nn.Linear(query_dim or dim, dim)
        self.k_proj = nn.Linear(token_dim or dim, dim)
        self.v_proj = nn.Linear(token_dim or dim, dim)
        self.out_proj = nn.Linear(dim, dim)

    def forward(
        self, query: torch.Tensor, tokens: torch.Tensor, token_mask: Optional[torch.Tensor] = None
    ) -> torch.Tensor:
        """
        :param query: (B, Q, query_dim)
        :param tokens: (B, T, token_dim)
        :param token_mask: [Optional] (B, T) bool, True where a token may be attended
        :return: (B, Q, dim); rows whose tokens are all masked attend to nothing (zero before `out_proj`)
        """
        q = rearrange(self.q_proj(query), "b q (h d) -> b h q d", h=self.num_heads)
        k = rearrange(self.k_proj(tokens), "b t (h d) -> b h t d", h=self.num_heads)
        v = rearrange(self.v_proj(tokens), "b t (h d) -> b h t d", h=self.num_heads)

        logits = (q @ k.transpose(-2, -1)) * self.scale                             # (B, H, Q, T)
        if token_mask is not None:
            mask = token_mask[:, None, None, :]
            any_token = mask.any(dim=-1, keepdim=True)
            logits = torch.where(any_token, logits.masked_fill(~mask, float("-inf")), torch.zeros_like(logits))
            attn = torch.where(any_token, logits.softmax(dim=-1), torch.zeros_like(logits))
        else:
            attn = logits.softmax(dim=-1)

        out = rearrange(attn @ v, "b h q d -> b q (h d)")
        return self.out_proj(out)
