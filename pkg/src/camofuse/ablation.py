"""Ablation suites as pure configuration deltas.

Each suite mirrors one block of the component study: `table3` sweeps the
component matrix (fusion block / enhancer / decoder / backbone pairing),
`table4` the fusion-block internals and gate placement, `table5` the
encoder branches, `table6` the decoder internals. Running a suite does a
forward+backward sanity pass per variant (optionally a few optimizer
steps) and emits one CSV row per variant.
"""

import os
from dataclasses import dataclass, field

import torch

from .config import RunConfig, apply_overrides
from .data import batches, scan_dataset
from .errors import ConfigError
from .losses import total_loss
from .model import build_model

_PLAIN = {"model.rgb_variant": "resnet_like", "model.depth_variant": "resnet_like"}


@dataclass
class AblationVariant:
    name: str
    overrides: dict = field(default_factory=dict)


SUITES = {
    # component matrix: weighted fusion / enhancer / aggregation decoder
    # on-off, then the backbone pairing
    "table3": [
        AblationVariant("r1_base_fuse_base_dec", {
            **_PLAIN, "model.fusion_mode": "baseline",
            "model.use_rmfe": "false", "model.decoder_mode": "baseline"}),
        AblationVariant("r2_agg_decoder", {
            **_PLAIN, "model.fusion_mode": "baseline",
            "model.use_rmfe": "false", "model.decoder_mode": "full"}),
        AblationVariant("r3_weighted_fusion", {
            **_PLAIN, "model.fusion_mode": "full",
            "model.use_rmfe": "false", "model.decoder_mode": "baseline"}),
        AblationVariant("r4_fusion_and_decoder", {
            **_PLAIN, "model.fusion_mode": "full",
            "model.use_rmfe": "false", "model.decoder_mode": "full"}),
        AblationVariant("r5_fusion_decoder_enhancer", {
            **_PLAIN, "model.fusion_mode": "full",
            "model.use_rmfe": "true", "model.decoder_mode": "full"}),
        AblationVariant("r6_multiscale_both", {
            "model.rgb_variant": "res2net_like",
            "model.depth_variant": "res2net_like",
            "model.fusion_mode": "full",
            "model.use_rmfe": "true", "model.decoder_mode": "full"}),
        AblationVariant("r7_multiscale_rgb_plain_depth", {
            "model.rgb_variant": "res2net_like",
            "model.depth_variant": "resnet_like",
            "model.fusion_mode": "full",
            "model.use_rmfe": "true", "model.decoder_mode": "full"}),
    ],
    # fusion-block internals and confidence-gate placement
    "table4": [
        AblationVariant("baseline", {"model.fusion_mode": "baseline"}),
        AblationVariant("no_daw", {"model.fusion_mode": "no_daw"}),
        AblationVariant("no_ca_sa", {"model.fusion_mode": "no_ca_sa"}),
        AblationVariant("first_layer", {"model.fusion_mode": "first_layer"}),
        AblationVariant("second_layer", {"model.fusion_mode": "second_layer"}),
        AblationVariant("third_layer", {"model.fusion_mode": "third_layer"}),
        AblationVariant("all_layer", {"model.fusion_mode": "full"}),
    ],
    # encoder branches
    "table5": [
        AblationVariant("no_depth", {"model.encoder_mode": "no_depth"}),
        AblationVariant("no_residual", {"model.encoder_mode": "no_residual"}),
        AblationVariant("no_vit", {"model.encoder_mode": "no_vit"}),
        AblationVariant("full", {"model.encoder_mode": "full"}),
    ],
    # decoder internals
    "table6": [
        AblationVariant("no_geca", {"model.decoder_mode": "no_geca"}),
        AblationVariant("no_fam", {"model.decoder_mode": "no_fam"}),
        AblationVariant("no_residual", {"model.decoder_mode": "no_residual"}),
        AblationVariant("full", {"model.decoder_mode": "full"}),
    ],
}


def run_variant(cfg: RunConfig, train_steps=0):
    """One forward+backward pass (plus optional optimizer steps) on the
    configured dataset; returns {loss, parts, grad_ok, finite}."""
    torch.manual_seed(cfg.seed)
    manifest = scan_dataset(cfg.data.root, cfg.data.train_split)
    model = build_model(cfg.model)
    batch = next(batches(manifest, cfg.optim.batch_size, cfg.model.input_size,
                         seed=cfg.seed, train=True, epoch=0,
                         crop_frac=cfg.data.crop_frac,
                         rgb_mean=cfg.data.rgb_mean, rgb_std=cfg.data.rgb_std))
    model.train()
    opt = torch.optim.AdamW(model.parameters(), lr=cfg.optim.lr,
                            weight_decay=cfg.optim.weight_decay)
    loss_value = None
    parts_value = None
    for _ in range(max(1, train_steps)):
        bundle, _ = model(batch.rgb, batch.depth)
        loss, parts = total_loss(bundle, batch.gt, cfg.optim.lambda_weights)
        opt.zero_grad()
        loss.backward()
        if train_steps > 0:
            opt.step()
        loss_value = loss.item()
        parts_value = [p.item() for p in parts]
    grads_finite = all(
        p.grad is None or torch.isfinite(p.grad).all() for p in model.parameters()
    )
    finite = torch.isfinite(loss).item() and grads_finite
    return {"loss": loss_value, "parts": parts_value, "finite": finite}


def run_suite(suite_name, base_cfg: RunConfig, train_steps=0, out_csv=None,
              quiet=False):
    if suite_name not in SUITES:
        raise ConfigError(
            f"unknown suite {suite_name!r}; choose from {sorted(SUITES)}"
        )
    rows = []
    for variant in SUITES[suite_name]:
        cfg = apply_overrides(base_cfg, variant.overrides)
        result = run_variant(cfg, train_steps=train_steps)
        row = {
            "suite": suite_name,
            "variant": variant.name,
            "status": "ok" if result["finite"] else "non_finite",
            "loss": result["loss"],
            "loss_out1": result["parts"][0],
            "loss_out2": result["parts"][1],
            "loss_out3": result["parts"][2],
        }
        rows.append(row)
        if not quiet:
            print(f"{suite_name}/{variant.name}: {row['status']} "
                  f"loss={row['loss']:.5f}")
    if out_csv:
        os.makedirs(os.path.dirname(out_csv) or ".", exist_ok=True)
        with open(out_csv, "w", encoding="utf-8") as fh:
            cols = ["suite", "variant", "status", "loss",
                    "loss_out1", "loss_out2", "loss_out3"]
            fh.write(",".join(cols) + "\n")
            for row in rows:
                fh.write(",".join(str(row[c]) for c in cols) + "\n")
    return rows
