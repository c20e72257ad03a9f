"""Feature enhancement and the aggregation decoder.

Incoming pyramid features are enhanced by residual multi-scale blocks,
upsampled to the finest resolution and concatenated; the concatenation is
gated by a global ECA pass, smoothed by multi-scale pooled averaging, and
finally projected to three single-channel logits maps, each multiplied by
an enhanced RGB feature before its 1x1 head. All resampling is bilinear
with align_corners disabled.
"""

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .attention import EfficientChannelAttention
from .errors import ConfigError

DECODER_MODES = ("full", "no_geca", "no_fam", "no_residual", "baseline")


def _resize(x, size):
    if x.shape[-2:] == tuple(size):
        return x
    return F.interpolate(x, size=size, mode="bilinear", align_corners=False)


class ResidualMultiScaleBlock(nn.Module):
    """Parallel dilated 3x3 convs (dilations 1,2,3) merged and added to a
    1x1-projected skip. Zeroing the merge projection leaves only the skip."""

    def __init__(self, in_channels, out_channels, use_multiscale=True):
        super().__init__()
        self.skip = nn.Conv2d(in_channels, out_channels, 1)
        self.use_multiscale = use_multiscale
        if use_multiscale:
            self.branches = nn.ModuleList(
                nn.Conv2d(in_channels, out_channels, 3, padding=d, dilation=d)
                for d in (1, 2, 3)
            )
            self.merge = nn.Conv2d(3 * out_channels, out_channels, 1)

    def forward(self, x):
        y = self.skip(x)
        if self.use_multiscale:
            cat = torch.cat([F.relu(b(x)) for b in self.branches], dim=1)
            y = y + self.merge(cat)
        return y


class MultiScaleEnhancer(nn.Module):
    """Enhance a (fine, mid, coarse) triple to a common channel width."""

    def __init__(self, in_channels, width, use_multiscale=True):
        super().__init__()
        self.blocks = nn.ModuleList(
            ResidualMultiScaleBlock(c, width, use_multiscale) for c in in_channels
        )

    def forward(self, fine, mid, coarse):
        return tuple(blk(x) for blk, x in zip(self.blocks, (fine, mid, coarse)))


class FeatureAggregation(nn.Module):
    """Average of the identity branch and avg-pooled (2,4,8) branches
    upsampled back, followed by one 3x3 conv."""

    def __init__(self, channels, pool_sizes=(2, 4, 8)):
        super().__init__()
        self.pool_sizes = pool_sizes
        self.conv = nn.Conv2d(channels, channels, 3, padding=1)

    def forward(self, x):
        acc = x
        for k in self.pool_sizes:
            pooled = F.avg_pool2d(x, k, stride=k, ceil_mode=True)
            acc = acc + _resize(pooled, x.shape[-2:])
        return self.conv(acc / (len(self.pool_sizes) + 1))


@dataclass
class PredictionBundle:
    f_out_1: torch.Tensor  # final prediction logits, finest supervision
    f_out_2: torch.Tensor
    f_out_3: torch.Tensor

    def as_tuple(self):
        return (self.f_out_1, self.f_out_2, self.f_out_3)


class AggregationDecoder(nn.Module):
    """Concatenate the enhanced triple at the finest resolution and fuse.

    Modes: full (gate + smoothing), no_geca (smoothing only), no_fam
    (gate only), no_residual (full fusion, heads skip the RGB product),
    baseline (single 3x3 conv on the concatenation).
    """

    def __init__(self, width, eca_kernel=3, mode="full"):
        super().__init__()
        if mode not in DECODER_MODES:
            raise ConfigError(f"unknown decoder mode {mode!r}")
        self.mode = mode
        cat_ch = 3 * width
        if mode == "baseline":
            self.conv = nn.Conv2d(cat_ch, cat_ch, 3, padding=1)
            return
        if mode != "no_geca":
            self.geca = EfficientChannelAttention(eca_kernel)
        if mode != "no_fam":
            self.fam = FeatureAggregation(cat_ch)

    def forward(self, triple):
        fine, mid, coarse = triple
        if not (fine.shape[1] == mid.shape[1] == coarse.shape[1]):
            raise ValueError("enhanced triple must share one channel width")
        target = fine.shape[-2:]
        stacked = torch.cat([fine, _resize(mid, target), _resize(coarse, target)], dim=1)
        if self.mode == "baseline":
            return self.conv(stacked)
        x = stacked if self.mode == "no_geca" else self.geca(stacked) + stacked
        if self.mode == "no_fam":
            return x
        return self.fam(x)


class OutputHeads(nn.Module):
    """Project the decoded map to three supervised logits maps.

    conv_k resizes the decoded map to the k-th enhancement's grid; the
    product with the enhanced RGB feature (when enabled) re-weights RGB
    evidence before the single-channel head. Every output is upsampled to
    the supervision resolution.
    """

    def __init__(self, width, use_rgb_residual=True):
        super().__init__()
        self.use_rgb_residual = use_rgb_residual
        self.convs = nn.ModuleList(
            nn.Conv2d(3 * width, width, 3, padding=1) for _ in range(3)
        )
        self.heads = nn.ModuleList(nn.Conv2d(width, 1, 1) for _ in range(3))

    def forward(self, decoded, target_sizes, enhanced_rgb, out_size):
        outs = []
        for k in range(3):
            y = _resize(self.convs[k](decoded), target_sizes[k])
            if self.use_rgb_residual:
                y = y * enhanced_rgb[k]
            outs.append(_resize(self.heads[k](y), out_size))
        return PredictionBundle(*outs)
