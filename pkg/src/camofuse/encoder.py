"""Three-branch encoder: RGB backbone (main), depth backbone (auxiliary),
and a self-attention fusion branch, wired stage-by-stage through the
depth-weighted fusion block.

Per stage i: both backbones advance one stage, the fusion block produces
x_f^i and the updated depth map (which becomes the depth input of stage
i+1), and the fusion branch consumes x_f^i with a residual connection
adding its own previous-stage output from stage 2 onward. The decoder
consumes the fusion outputs of the last three stages.
"""

from dataclasses import dataclass

import torch.nn as nn
import torch.nn.functional as F

from .backbones import Backbone, BackboneConfig
from .config import ModelConfig
from .errors import ConfigError
from .fusion import DepthWeightedFusion
from .vit import ConvStage, FusionBranchConfig, SelfAttentionStage

# fusion modes that share one confidence value across stages, keyed by the
# stage whose features produce it; earlier stages fuse unweighted
_SHARED_GATE_STAGE = {"first_layer": 1, "second_layer": 2, "third_layer": 3}


@dataclass
class EncoderOutput:
    rgb_stages: list          # x_c^1..x_c^4
    depth_stages: list        # x_d^1..x_d^4 after the additive update
    fused: tuple              # fusion-branch outputs of stages 2..4, fine->coarse
    q_values: list            # per-stage depth confidence, each (B,)


class TridentEncoder(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        cfg.validate()
        self.cfg = cfg
        ch = tuple(cfg.stage_channels)
        self.rgb_backbone = Backbone(BackboneConfig(
            stage_channels=ch, blocks_per_stage=tuple(cfg.blocks_per_stage),
            variant=cfg.rgb_variant, in_channels=3, res2net_scale=cfg.res2net_scale,
        ))
        self.encoder_mode = cfg.encoder_mode
        self.fusion_mode = cfg.fusion_mode
        if self.encoder_mode == "no_depth":
            return
        self.depth_backbone = Backbone(BackboneConfig(
            stage_channels=ch, blocks_per_stage=tuple(cfg.blocks_per_stage),
            variant=cfg.depth_variant, in_channels=1, res2net_scale=cfg.res2net_scale,
        ))
        block_mode = cfg.fusion_mode if cfg.fusion_mode not in _SHARED_GATE_STAGE else "full"
        self.fusion_blocks = nn.ModuleList(
            DepthWeightedFusion(c, cfg.ca_reduction, cfg.sa_kernel, mode=block_mode)
            for c in ch
        )
        branch_cfg = FusionBranchConfig(
            patch_size=cfg.vit_patch, embed_dim=cfg.vit_dim,
            depth=cfg.vit_depth, heads=cfg.vit_heads,
        )
        if self.encoder_mode == "full":
            self.fusion_stages = nn.ModuleList(
                SelfAttentionStage(c, branch_cfg) for c in ch
            )
        else:  # no_vit / no_residual keep a conv stand-in
            self.fusion_stages = nn.ModuleList(ConvStage(c) for c in ch)
        self.use_residual = self.encoder_mode in ("full", "no_vit")
        if self.use_residual:
            # project previous fusion output onto the next stage's
            # channel/resolution grid; bias-free so a zero map stays zero
            self.aligners = nn.ModuleList(
                nn.Conv2d(ch[i - 1], ch[i], 1, bias=False) for i in range(1, 4)
            )

    def _check_inputs(self, rgb, depth):
        s = self.cfg.input_size
        if rgb.dim() != 4 or rgb.shape[1] != 3 or rgb.shape[-2:] != (s, s):
            raise ConfigError(
                f"expected RGB of shape (B,3,{s},{s}), got {tuple(rgb.shape)}"
            )
        if depth is not None and (depth.dim() != 4 or depth.shape[1] != 1
                                  or depth.shape[-2:] != (s, s)):
            raise ConfigError(
                f"expected depth of shape (B,1,{s},{s}), got {tuple(depth.shape)}"
            )

    def _align_prev(self, stage_idx, prev):
        y = self.aligners[stage_idx - 1](prev)
        k = self.rgb_backbone.config.stage_strides[stage_idx]
        return F.avg_pool2d(y, k, stride=k) if k > 1 else y

    def forward(self, rgb, depth):
        self._check_inputs(rgb, depth)
        if self.encoder_mode == "no_depth":
            feats = self.rgb_backbone(rgb)
            return EncoderOutput(
                rgb_stages=feats, depth_stages=[],
                fused=(feats[1], feats[2], feats[3]), q_values=[],
            )
        shared_stage = _SHARED_GATE_STAGE.get(self.fusion_mode)
        x_c_in, x_d_in = rgb, depth
        rgb_stages, depth_stages, q_values, branch_outs = [], [], [], []
        prev = None
        shared_q = None
        for i in range(4):
            x_c = self.rgb_backbone.forward_stage(i, x_c_in)
            x_d = self.depth_backbone.forward_stage(i, x_d_in)
            block = self.fusion_blocks[i]
            if shared_stage is not None:
                if i + 1 == shared_stage:
                    shared_q = block.depth_confidence(x_c, x_d)
                q = shared_q if i + 1 >= shared_stage else x_c.new_ones(x_c.shape[0])
                x_f, q, x_d_next = block(x_c, x_d, q=q)
            else:
                x_f, q, x_d_next = block(x_c, x_d)
            aligned = None
            if self.use_residual and prev is not None:
                aligned = self._align_prev(i, prev)
            out = self.fusion_stages[i](x_f, aligned)
            rgb_stages.append(x_c)
            depth_stages.append(x_d_next)
            q_values.append(q)
            branch_outs.append(out)
            x_c_in, x_d_in, prev = x_c, x_d_next, out
        return EncoderOutput(
            rgb_stages=rgb_stages, depth_stages=depth_stages,
            fused=(branch_outs[1], branch_outs[2], branch_outs[3]),
            q_values=q_values,
        )
