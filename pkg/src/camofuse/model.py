"""Full RGB-D camouflage segmentation network: three-branch encoder with
depth-weighted fusion, multi-scale enhancement, aggregation decoder and
three supervised outputs (the first is the final prediction)."""

import torch.nn as nn

from .config import ModelConfig
from .decoder import AggregationDecoder, MultiScaleEnhancer, OutputHeads
from .encoder import TridentEncoder


class CamoFusionNet(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        cfg.validate()
        self.cfg = cfg
        self.encoder = TridentEncoder(cfg)
        ch = tuple(cfg.stage_channels)
        width = cfg.decoder_width
        pyramid = (ch[1], ch[2], ch[3])  # stages 2..4 feed the decoder
        self.fused_enhancer = MultiScaleEnhancer(pyramid, width, cfg.use_rmfe)
        self.decoder = AggregationDecoder(width, cfg.eca_kernel, mode=cfg.decoder_mode)
        self.use_rgb_residual = cfg.decoder_mode in ("full", "no_geca", "no_fam")
        if self.use_rgb_residual:
            self.rgb_enhancer = MultiScaleEnhancer(pyramid, width, cfg.use_rmfe)
        self.heads = OutputHeads(width, use_rgb_residual=self.use_rgb_residual)

    def forward(self, rgb, depth):
        enc = self.encoder(rgb, depth)
        triple = self.fused_enhancer(*enc.fused)
        decoded = self.decoder(triple)
        enhanced_rgb = None
        if self.use_rgb_residual:
            enhanced_rgb = self.rgb_enhancer(
                enc.rgb_stages[1], enc.rgb_stages[2], enc.rgb_stages[3]
            )
        sizes = [t.shape[-2:] for t in triple]
        out_size = rgb.shape[-2:]
        bundle = self.heads(decoded, sizes, enhanced_rgb, out_size)
        return bundle, enc


def build_model(cfg: ModelConfig) -> CamoFusionNet:
    return CamoFusionNet(cfg)
