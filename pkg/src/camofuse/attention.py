"""Attention building blocks: channel / spatial attention (CBAM-style) and
efficient channel attention (ECA). All blocks are pure functions of their
input and parameters and keep every entry finite for finite inputs."""

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import ConfigError


def global_avg_pool(x):
    """Per-channel spatial mean: (B, C, H, W) -> (B, C)."""
    return x.mean(dim=(-2, -1))


class ChannelAttention(nn.Module):
    """Channel gate from pooled statistics.

    A shared two-layer MLP is applied to the average-pooled and max-pooled
    channel vectors; the two logits are summed and squashed by a sigmoid,
    so every weight lies in (0, 1). The output depends only on per-channel
    pooled statistics, hence is invariant to spatial permutations of the
    input.
    """

    def __init__(self, channels, reduction=4):
        super().__init__()
        if channels < 1:
            raise ConfigError(f"channels must be >= 1, got {channels}")
        hidden = max(1, channels // reduction)
        self.channels = channels
        self.fc1 = nn.Linear(channels, hidden)
        self.fc2 = nn.Linear(hidden, channels)
        # tiny hidden widths are prone to dead ReLU units at init
        nn.init.constant_(self.fc1.bias, 0.1)

    def _mlp(self, v):
        return self.fc2(F.relu(self.fc1(v)))

    def forward(self, x):
        if x.shape[1] != self.channels:
            raise ConfigError(
                f"channel attention built for {self.channels} channels, "
                f"input has {x.shape[1]}"
            )
        avg = x.mean(dim=(2, 3))
        mx = x.amax(dim=(2, 3))
        return torch.sigmoid(self._mlp(avg) + self._mlp(mx))  # (B, C)


class SpatialAttention(nn.Module):
    """Spatial gate from per-position channel statistics.

    Channel-mean and channel-max planes are stacked and convolved
    (7x7 by default); a sigmoid bounds the map in (0, 1). Invariant to
    channel permutations of the input.
    """

    def __init__(self, kernel_size=7):
        super().__init__()
        if kernel_size < 1 or kernel_size % 2 == 0:
            raise ConfigError(f"kernel_size must be odd and >= 1, got {kernel_size}")
        self.conv = nn.Conv2d(2, 1, kernel_size, padding=kernel_size // 2)

    def forward(self, x):
        mean = x.mean(dim=1, keepdim=True)
        mx = x.amax(dim=1, keepdim=True)
        stats = torch.cat([mean, mx], dim=1)
        return torch.sigmoid(self.conv(stats))  # (B, 1, H, W)


class EfficientChannelAttention(nn.Module):
    """Channel gating via a 1-D cross-channel convolution of pooled means.

    Each channel is scaled by a gate in (0, 1), so the output magnitude
    never exceeds the input elementwise.
    """

    def __init__(self, kernel_size=3):
        super().__init__()
        if kernel_size < 1 or kernel_size % 2 == 0:
            raise ConfigError(f"kernel_size must be odd and >= 1, got {kernel_size}")
        self.conv = nn.Conv1d(1, 1, kernel_size, padding=kernel_size // 2, bias=False)

    def forward(self, x):
        y = global_avg_pool(x)              # (B, C)
        y = self.conv(y.unsqueeze(1)).squeeze(1)
        gate = torch.sigmoid(y)
        return x * gate[:, :, None, None]


def apply_channel_weights(x, weights):
    """Broadcast (B, C) channel weights over the spatial grid of x."""
    return x * weights[:, :, None, None]
