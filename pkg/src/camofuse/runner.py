"""Inference drivers: batch evaluation with PNG restoration to original
sizes, and single-pair prediction. Both paths share one map-to-PNG routine
so their outputs are byte-identical for the same sample."""

import os

import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image

from .checkpoint import check_model_section, load_checkpoint, restore_model
from .config import RunConfig
from .data import batches, load_rgb_depth, scan_dataset
from .errors import DataError
from .metrics import (evaluate_directory, format_report_table,
                      write_report_csv)
from .model import build_model


def save_prediction_png(prob, original_size, path):
    """Resize a probability map in [0,1] to the original size (bilinear,
    align_corners off) and write it as an 8-bit grayscale PNG."""
    t = prob.detach().float()
    if t.dim() == 2:
        t = t[None, None]
    elif t.dim() == 3:
        t = t[None]
    t = F.interpolate(t, size=tuple(original_size), mode="bilinear",
                      align_corners=False)
    arr = np.clip(t[0, 0].numpy(), 0.0, 1.0)
    Image.fromarray(np.round(arr * 255.0).astype(np.uint8)).save(path)


def load_model_from_checkpoint(ckpt_path, cfg: RunConfig = None):
    state, ckpt_cfg = load_checkpoint(ckpt_path)
    if cfg is not None:
        check_model_section(cfg, ckpt_cfg)
    model = build_model(ckpt_cfg.model)
    restore_model(model, state)
    model.eval()
    return model, ckpt_cfg


def evaluate_run(ckpt_path, cfg: RunConfig = None, data_root=None, split=None,
                 e_variant="mean", out_dir=None, quiet=False):
    """Predict every sample of a split, restore predictions to their
    original sizes as PNGs, and score them against the GT directory."""
    model, run_cfg = load_model_from_checkpoint(ckpt_path, cfg)
    root = data_root or run_cfg.data.root
    split = split or run_cfg.data.eval_split
    out_dir = out_dir or os.path.join(run_cfg.output_dir, "eval")
    pred_dir = os.path.join(out_dir, "predictions")
    os.makedirs(pred_dir, exist_ok=True)
    manifest = scan_dataset(root, split)
    with torch.no_grad():
        for batch in batches(manifest, run_cfg.optim.batch_size,
                             run_cfg.model.input_size, train=False,
                             rgb_mean=run_cfg.data.rgb_mean,
                             rgb_std=run_cfg.data.rgb_std):
            bundle, _ = model(batch.rgb, batch.depth)
            probs = torch.sigmoid(bundle.f_out_1)
            for i, stem in enumerate(batch.ids):
                save_prediction_png(probs[i, 0], batch.original_sizes[i],
                                    os.path.join(pred_dir, stem + ".png"))
    gt_dir = os.path.join(root, split, "GT")
    if not os.path.isdir(gt_dir):
        raise DataError(f"missing GT directory: {gt_dir}")
    report = evaluate_directory(pred_dir, gt_dir, e_variant=e_variant,
                                dataset=split)
    write_report_csv([report], os.path.join(out_dir, "report.csv"))
    if not quiet:
        print(format_report_table([report]))
    return report


def predict_single(ckpt_path, rgb_path, depth_path, out_path, panel=False):
    """Predict one RGB/depth pair and save the restored PNG; optionally
    emit a side-by-side (rgb | depth | prediction) panel figure."""
    model, run_cfg = load_model_from_checkpoint(ckpt_path)
    rgb, depth, original_size = load_rgb_depth(
        rgb_path, depth_path, run_cfg.model.input_size,
        rgb_mean=run_cfg.data.rgb_mean, rgb_std=run_cfg.data.rgb_std,
    )
    with torch.no_grad():
        bundle, _ = model(rgb[None], depth[None])
        prob = torch.sigmoid(bundle.f_out_1)[0, 0]
    save_prediction_png(prob, original_size, out_path)
    if panel:
        panel_path = os.path.splitext(out_path)[0] + ".panel.png"
        _save_panel(rgb_path, depth_path, out_path, panel_path)
        return out_path, panel_path
    return out_path, None


def _save_panel(rgb_path, depth_path, pred_path, panel_path):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, 3, figsize=(9, 3))
    for ax, (path, title) in zip(
        axes, [(rgb_path, "rgb"), (depth_path, "depth"), (pred_path, "prediction")]
    ):
        with Image.open(path) as im:
            ax.imshow(np.asarray(im), cmap=None if title == "rgb" else "gray")
        ax.set_title(title)
        ax.axis("off")
    fig.tight_layout()
    fig.savefig(panel_path, dpi=100)
    plt.close(fig)
