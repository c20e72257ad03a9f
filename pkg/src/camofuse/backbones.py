"""Four-stage convolutional feature pyramids.

Two bottleneck variants share the stage contract (channels C1..C4, one
stride per stage): plain bottlenecks, and a multi-scale variant that
splits the bottleneck width into hierarchical groups with cascaded 3x3
convolutions. Blocks use a smooth activation so the whole pyramid stays
finite-difference friendly, and each block ends in a learnable scalar
scale on the branch, so zeroing it reduces the block to its shortcut.
"""

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import ConfigError

BACKBONE_VARIANTS = ("resnet_like", "res2net_like")


@dataclass
class BackboneConfig:
    stage_channels: tuple = (8, 16, 32, 64)
    stage_strides: tuple = (2, 2, 2, 2)
    blocks_per_stage: tuple = (1, 1, 1, 1)
    variant: str = "resnet_like"
    in_channels: int = 3
    res2net_scale: int = 4

    def __post_init__(self):
        if self.variant not in BACKBONE_VARIANTS:
            raise ConfigError(f"unknown backbone variant {self.variant!r}")
        if any(c < 1 for c in self.stage_channels):
            raise ConfigError("stage channels must be positive")
        if len(self.stage_channels) != 4:
            raise ConfigError("expected 4 stage channel counts")
        if self.variant == "res2net_like":
            bad = [c for c in self.stage_channels if c % self.res2net_scale != 0]
            if bad:
                raise ConfigError(
                    f"stage channels {bad} not divisible by group count "
                    f"{self.res2net_scale}"
                )


def _mid_width(out_channels, variant, scale):
    base = max(1, out_channels // 4)
    if variant == "res2net_like":
        # round up so the width splits evenly into `scale` groups
        return scale * max(1, -(-base // scale))
    return base


class Bottleneck(nn.Module):
    """reduce 1x1 (carries the stride) -> 3x3 transform -> expand 1x1.

    Output is shortcut(x) + scale * branch(x); `scale` is a scalar
    parameter initialised to 1.
    """

    def __init__(self, in_channels, out_channels, stride=1, variant="resnet_like",
                 res2net_scale=4):
        super().__init__()
        mid = _mid_width(out_channels, variant, res2net_scale)
        self.variant = variant
        self.reduce = nn.Conv2d(in_channels, mid, 1, stride=stride, bias=False)
        self.bn1 = nn.BatchNorm2d(mid)
        if variant == "res2net_like":
            self.groups = res2net_scale
            self.group_width = mid // self.groups
            n_convs = 1 if self.groups == 1 else self.groups - 1
            self.convs = nn.ModuleList(
                nn.Conv2d(self.group_width, self.group_width, 3, padding=1, bias=False)
                for _ in range(n_convs)
            )
            self.bns = nn.ModuleList(nn.BatchNorm2d(self.group_width) for _ in range(n_convs))
        else:
            self.conv3 = nn.Conv2d(mid, mid, 3, padding=1, bias=False)
            self.bn2 = nn.BatchNorm2d(mid)
        self.expand = nn.Conv2d(mid, out_channels, 1, bias=False)
        self.bn3 = nn.BatchNorm2d(out_channels)
        self.scale = nn.Parameter(torch.ones(1))
        if in_channels != out_channels or stride != 1:
            self.shortcut = nn.Sequential(
                nn.Conv2d(in_channels, out_channels, 1, stride=stride, bias=False),
                nn.BatchNorm2d(out_channels),
            )
        else:
            self.shortcut = nn.Identity()

    def _transform(self, x):
        if self.variant != "res2net_like":
            return F.silu(self.bn2(self.conv3(x)))
        splits = torch.split(x, self.group_width, dim=1)
        if self.groups == 1:
            return F.silu(self.bns[0](self.convs[0](splits[0])))
        outs = []
        prev = None
        for i, conv in enumerate(self.convs):
            sp = splits[i] if prev is None else splits[i] + prev
            prev = F.silu(self.bns[i](conv(sp)))
            outs.append(prev)
        outs.append(splits[-1])  # last group passes through untouched
        return torch.cat(outs, dim=1)

    def forward(self, x):
        y = F.silu(self.bn1(self.reduce(x)))
        y = self._transform(y)
        y = self.bn3(self.expand(y))
        return self.shortcut(x) + self.scale * y


class Backbone(nn.Module):
    """Stage pipeline emitting the four per-stage feature maps."""

    def __init__(self, config: BackboneConfig):
        super().__init__()
        self.config = config
        stages = []
        in_ch = config.in_channels
        for out_ch, stride, n_blocks in zip(
            config.stage_channels, config.stage_strides, config.blocks_per_stage
        ):
            blocks = [
                Bottleneck(in_ch, out_ch, stride=stride, variant=config.variant,
                           res2net_scale=config.res2net_scale)
            ]
            for _ in range(n_blocks - 1):
                blocks.append(
                    Bottleneck(out_ch, out_ch, variant=config.variant,
                               res2net_scale=config.res2net_scale)
                )
            stages.append(nn.Sequential(*blocks))
            in_ch = out_ch
        self.stages = nn.ModuleList(stages)

    def forward_stage(self, i, x):
        return self.stages[i](x)

    def forward(self, x):
        feats = []
        for stage in self.stages:
            x = stage(x)
            feats.append(x)
        return feats


def build_backbone(config: BackboneConfig) -> Backbone:
    return Backbone(config)
