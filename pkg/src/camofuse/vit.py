"""Miniature per-stage self-attention stage for the fusion branch.

Feature maps are patchified into tokens, passed through pre-norm
transformer blocks, and folded back to the stage resolution, preserving
the channel contract of the stage.
"""

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import ConfigError


@dataclass
class FusionBranchConfig:
    patch_size: int = 2
    embed_dim: int = 32
    depth: int = 1
    heads: int = 2

    def __post_init__(self):
        if self.embed_dim % self.heads != 0:
            raise ConfigError(
                f"embed_dim {self.embed_dim} not divisible by heads {self.heads}"
            )


class TokenAttention(nn.Module):
    """Multi-head softmax attention over a (B, N, E) token sequence."""

    def __init__(self, dim, heads=2):
        super().__init__()
        if dim % heads != 0:
            raise ConfigError(f"dim {dim} not divisible by heads {heads}")
        self.heads = heads
        self.head_dim = dim // heads
        self.scale = self.head_dim ** -0.5
        self.q = nn.Linear(dim, dim)
        self.k = nn.Linear(dim, dim)
        self.v = nn.Linear(dim, dim)
        self.proj = nn.Linear(dim, dim)

    def forward(self, x):
        b, n, _ = x.shape
        def split(t):
            return t.reshape(b, n, self.heads, self.head_dim).transpose(1, 2)
        q, k, v = split(self.q(x)), split(self.k(x)), split(self.v(x))
        attn = torch.softmax((q * self.scale) @ k.transpose(-2, -1), dim=-1)
        out = (attn @ v).transpose(1, 2).reshape(b, n, -1)
        return self.proj(out)


class TransformerBlock(nn.Module):
    def __init__(self, dim, heads=2, mlp_ratio=2):
        super().__init__()
        self.norm1 = nn.LayerNorm(dim)
        self.attn = TokenAttention(dim, heads)
        self.norm2 = nn.LayerNorm(dim)
        self.mlp = nn.Sequential(
            nn.Linear(dim, mlp_ratio * dim),
            nn.GELU(),
            nn.Linear(mlp_ratio * dim, dim),
        )

    def forward(self, x):
        x = x + self.attn(self.norm1(x))
        return x + self.mlp(self.norm2(x))


class SelfAttentionStage(nn.Module):
    """patchify -> transformer blocks -> unpatchify, at fixed resolution.

    An optional previous-stage map (already channel/resolution aligned)
    is added before patchifying; a zero map is equivalent to no map.
    """

    def __init__(self, channels, branch_cfg: FusionBranchConfig):
        super().__init__()
        p = branch_cfg.patch_size
        self.patch = p
        self.channels = channels
        self.embed = nn.Conv2d(channels, branch_cfg.embed_dim, p, stride=p)
        self.blocks = nn.ModuleList(
            TransformerBlock(branch_cfg.embed_dim, branch_cfg.heads)
            for _ in range(branch_cfg.depth)
        )
        self.unembed = nn.Linear(branch_cfg.embed_dim, channels * p * p)

    def forward(self, x, prev=None):
        if prev is not None:
            x = x + prev
        b, c, h, w = x.shape
        p = self.patch
        if h % p != 0 or w % p != 0:
            raise ConfigError(f"spatial size ({h},{w}) not divisible by patch {p}")
        tokens = self.embed(x).flatten(2).transpose(1, 2)  # (B, N, E)
        for blk in self.blocks:
            tokens = blk(tokens)
        y = self.unembed(tokens)                            # (B, N, C*p*p)
        y = y.transpose(1, 2).reshape(b, c * p * p, (h // p) * (w // p))
        return F.fold(y, output_size=(h, w), kernel_size=p, stride=p)


class ConvStage(nn.Module):
    """Plain 3x3 conv stand-in used when the self-attention branch is
    ablated away; keeps the channel/resolution contract."""

    def __init__(self, channels):
        super().__init__()
        self.conv = nn.Conv2d(channels, channels, 3, padding=1)

    def forward(self, x, prev=None):
        if prev is not None:
            x = x + prev
        return self.conv(x)
