"""Sparse/dense attention pair and the gated feature-refinement block.

The actor's trunk fuses two attention branches over action-group tokens: a
squared-ReLU branch that zeroes low-relevance pairs and a softmax branch
that always aggregates everything.  Token features then pass through a
split-transform-merge feed-forward with a depthwise convolution along the
token axis on one half and multiplicative gating by the other half.
"""

from __future__ import annotations

import math

import torch
import torch.nn as nn
import torch.nn.functional as F


def _scores(q: torch.Tensor, k: torch.Tensor, bias) -> torch.Tensor:
    if q.shape[-1] != k.shape[-1]:
        raise ValueError(f"key width mismatch: {q.shape} vs {k.shape}")
    s = q @ k.transpose(-2, -1) / math.sqrt(q.shape[-1])
    return s if bias is None else s + bias


def ssa_weights(q, k, bias=None) -> torch.Tensor:
    """Squared-ReLU attention weights; nonnegative, may be all zero."""
    return F.relu(_scores(q, k, bias)) ** 2


def dsa_weights(q, k, bias=None) -> torch.Tensor:
    """Softmax attention weights; each row sums to one."""
    return torch.softmax(_scores(q, k, bias), dim=-1)


def ssa(q, k, v, bias=None) -> torch.Tensor:
    """Sparse branch: ReLU^2 scores applied to the values."""
    return ssa_weights(q, k, bias) @ v


def dsa(q, k, v, bias=None) -> torch.Tensor:
    """Dense branch: row-stochastic scores applied to the values."""
    return dsa_weights(q, k, bias) @ v


def assa_fuse(ssa_out: torch.Tensor, dsa_out: torch.Tensor,
              mix_logits: torch.Tensor) -> torch.Tensor:
    """Convex blend of both branches; the two weights softmax to one."""
    if ssa_out.shape != dsa_out.shape:
        raise ValueError(f"shape mismatch: {ssa_out.shape} vs {dsa_out.shape}")
    w = torch.softmax(mix_logits, dim=0)
    return w[0] * ssa_out + w[1] * dsa_out


class FRFN(nn.Module):
    """Split-transform-merge refinement: gate one half by a convolved other.

    out = GELU(W2(x1 * proj(dwconv(x2)))); the depthwise kernel runs along
    the token axis and touches only a quarter of the branch channels, the
    rest pass through untouched.
    """

    def __init__(self, width: int, kernel: int = 3, bias: bool = True):
        super().__init__()
        if width % 2 != 0:
            raise ValueError(f"feature width must be even, got {width}")
        self.width = width
        half = width // 2
        self.conv_channels = max(1, half // 4)
        self.dwconv = nn.Conv1d(self.conv_channels, self.conv_channels,
                                kernel_size=kernel, padding=kernel // 2,
                                groups=self.conv_channels, bias=bias)
        self.proj = nn.Linear(half, half, bias=bias)
        self.out = nn.Linear(half, width, bias=bias)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[-1] != self.width:
            raise ValueError(f"expected width {self.width}, got {x.shape[-1]}")
        squeeze = x.dim() == 2
        if squeeze:
            x = x.unsqueeze(0)
        x1, x2 = x.chunk(2, dim=-1)
        head = x2[..., :self.conv_channels].transpose(-2, -1)
        head = self.dwconv(head).transpose(-2, -1)
        x2 = torch.cat([head, x2[..., self.conv_channels:]], dim=-1)
        gated = x1 * self.proj(x2)
        out = F.gelu(self.out(gated))
        return out.squeeze(0) if squeeze else out


class AssaBlock(nn.Module):
    """Pre-norm transformer block with the fused sparse/dense attention."""

    def __init__(self, n_tokens: int, width: int, bias: bool = True):
        super().__init__()
        self.norm1 = nn.LayerNorm(width)
        self.norm2 = nn.LayerNorm(width)
        self.q = nn.Linear(width, width, bias=bias)
        self.k = nn.Linear(width, width, bias=bias)
        self.v = nn.Linear(width, width, bias=bias)
        self.out = nn.Linear(width, width, bias=bias)
        self.attn_bias = nn.Parameter(torch.zeros(n_tokens, n_tokens))
        self.mix = nn.Parameter(torch.zeros(2))
        self.frfn = FRFN(width, bias=bias)
        # residual branches start at zero so the block is an identity at
        # init; the attention path grows in as its output projection trains
        nn.init.zeros_(self.out.weight)
        nn.init.zeros_(self.frfn.out.weight)
        if bias:
            nn.init.zeros_(self.out.bias)
            nn.init.zeros_(self.frfn.out.bias)

    def forward(self, tokens: torch.Tensor) -> torch.Tensor:
        h = self.norm1(tokens)
        q, k, v = self.q(h), self.k(h), self.v(h)
        fused = assa_fuse(ssa(q, k, v, self.attn_bias),
                          dsa(q, k, v, self.attn_bias), self.mix)
        tokens = tokens + self.out(fused)
        return tokens + self.frfn(self.norm2(tokens))
