"""Depth-weighted cross-attention fusion of an RGB/depth feature pair.

The block cross-attends the two modalities, estimates a per-sample depth
confidence in [0, 1] from an affinity-aggregated feature, and fuses as
x_f = q * D' + R'. The updated depth map x_d + x_f feeds the next stage
of the depth stream.
"""

import torch
import torch.nn as nn

from .attention import ChannelAttention, SpatialAttention, apply_channel_weights
from .errors import ConfigError

FUSION_MODES = ("full", "no_daw", "no_ca_sa", "baseline")


def fuse(r_prime, d_prime, q):
    """x_f = q * D' + R' with q broadcast per sample.

    Affine in q: q=0 returns R' bit-exactly, q=1 returns R' + D'.
    """
    if q.dim() == 1:
        q = q[:, None, None, None]
    return q * d_prime + r_prime


def update_depth_stream(x_d, x_f):
    """Next-stage depth input: x_d + x_f (shapes must match)."""
    if x_d.shape != x_f.shape:
        raise ValueError(f"shape mismatch {tuple(x_d.shape)} vs {tuple(x_f.shape)}")
    return x_d + x_f


class DepthWeightedFusion(nn.Module):
    """One fusion block for a matched (x_c, x_d) feature pair.

    Modes:
      full      cross-attention + learned depth confidence gate
      no_daw    cross-attention, gate pinned to 1
      no_ca_sa  attention replaced by identity, gated fusion kept
      baseline  plain 1x1-conv fusion of the concatenated pair
    """

    def __init__(self, channels, ca_reduction=4, sa_kernel=7, mode="full"):
        super().__init__()
        if mode not in FUSION_MODES:
            raise ConfigError(f"unknown fusion mode {mode!r}")
        self.channels = channels
        self.mode = mode
        if mode != "baseline":
            # one CA and one SA shared by both modalities, so the block is
            # symmetric under swapping identical inputs
            self.ca = ChannelAttention(channels, ca_reduction)
            self.sa = SpatialAttention(sa_kernel)
            self.conv_rgb = nn.Conv2d(channels, channels, 1)
            self.conv_depth = nn.Conv2d(channels, channels, 1)
            hidden = max(1, channels // 4)
            self.confidence_mlp = nn.Sequential(
                nn.Linear(channels, hidden),
                nn.ReLU(),
                nn.Linear(hidden, 1),
            )
            nn.init.constant_(self.confidence_mlp[0].bias, 0.1)
        else:
            self.baseline_conv = nn.Conv2d(2 * channels, channels, 1)

    @staticmethod
    def _check_pair(x_c, x_d):
        if x_c.shape != x_d.shape:
            raise ValueError(
                f"RGB/depth shapes differ: {tuple(x_c.shape)} vs {tuple(x_d.shape)}"
            )

    def cross_attend(self, x_c, x_d):
        """R' = (SA(x_d) * x_c) * CA(x_d);  D' = (SA(x_c) * x_d) * CA(x_c)."""
        self._check_pair(x_c, x_d)
        r_prime = apply_channel_weights(self.sa(x_d) * x_c, self.ca(x_d))
        d_prime = apply_channel_weights(self.sa(x_c) * x_d, self.ca(x_c))
        return r_prime, d_prime

    def affinity(self, x_c, x_d):
        """Cross-modal affinity: row-stochastic (B, C, C) matrix plus the
        reshaped-back aggregation map (B, C, H, W)."""
        self._check_pair(x_c, x_d)
        b, c, h, w = x_c.shape
        a_d = self.conv_depth(x_d).reshape(b, c, h * w)
        a_c = self.conv_rgb(x_c).reshape(b, c, h * w)
        f_a = torch.softmax(torch.bmm(a_d, a_c.transpose(1, 2)), dim=-1)
        f_a2 = (torch.bmm(f_a, a_d) + torch.bmm(f_a, a_c)).reshape(b, c, h, w)
        return f_a, f_a2

    def depth_confidence(self, x_c, x_d):
        """Per-sample confidence q in [0, 1] gating the depth contribution."""
        _, f_a2 = self.affinity(x_c, x_d)
        pooled = (f_a2 + x_d + x_c).mean(dim=(2, 3))
        return torch.sigmoid(self.confidence_mlp(pooled)).squeeze(-1)  # (B,)

    def forward(self, x_c, x_d, q=None, daw_pair=None):
        """Returns (x_f, q, next_depth).

        `q` overrides the learned confidence (used for gate-sharing across
        stages and identity tests). `daw_pair` feeds the confidence MLP
        with features from another stage.
        """
        self._check_pair(x_c, x_d)
        ones = x_c.new_ones(x_c.shape[0])
        if self.mode == "baseline":
            x_f = self.baseline_conv(torch.cat([x_c, x_d], dim=1))
            return x_f, ones, update_depth_stream(x_d, x_f)

        if self.mode == "no_ca_sa":
            r_prime, d_prime = x_c, x_d
        else:
            r_prime, d_prime = self.cross_attend(x_c, x_d)

        if q is None:
            if self.mode == "no_daw":
                q = ones
            else:
                pair = daw_pair if daw_pair is not None else (x_c, x_d)
                q = self.depth_confidence(*pair)
        x_f = fuse(r_prime, d_prime, q)
        return x_f, q, update_depth_stream(x_d, x_f)
