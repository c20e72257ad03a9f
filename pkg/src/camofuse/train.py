"""Training loop: decoupled-weight-decay Adam, stepwise lr decay, CSV
logging, best/last checkpoints, NaN abort with a batch diagnostic."""

import math
import os

import torch

from .checkpoint import save_checkpoint
from .config import RunConfig, save_config
from .data import batches, scan_dataset
from .errors import NumericError
from .losses import total_loss
from .model import build_model


def lr_at_epoch(base_lr, epoch, decay_epochs, factor):
    """Base lr scaled by `factor` once per completed `decay_epochs`."""
    return base_lr * (factor ** (epoch // decay_epochs))


def train(cfg: RunConfig, log_every=1, quiet=False):
    """Run training per the config; returns a summary dict with artifact
    paths, step count and first/last losses."""
    torch.manual_seed(cfg.seed)
    manifest = scan_dataset(cfg.data.root, cfg.data.train_split)
    model = build_model(cfg.model)
    opt = torch.optim.AdamW(
        model.parameters(), lr=cfg.optim.lr, weight_decay=cfg.optim.weight_decay
    )
    os.makedirs(cfg.output_dir, exist_ok=True)
    save_config(cfg, os.path.join(cfg.output_dir, "config.cfg"))
    log_path = os.path.join(cfg.output_dir, "log.csv")
    best_path = os.path.join(cfg.output_dir, "best.ckpt")
    last_path = os.path.join(cfg.output_dir, "last.ckpt")

    step = 0
    first_loss = None
    last_loss = None
    best_epoch_loss = math.inf
    stop = False
    with open(log_path, "w", encoding="utf-8") as log:
        log.write("step,epoch,loss,lr,loss_out1,loss_out2,loss_out3\n")
        for epoch in range(cfg.optim.epochs):
            lr = lr_at_epoch(cfg.optim.lr, epoch,
                             cfg.optim.lr_decay_epochs, cfg.optim.lr_decay_factor)
            for group in opt.param_groups:
                group["lr"] = lr
            epoch_losses = []
            for batch in batches(
                manifest, cfg.optim.batch_size, cfg.model.input_size,
                seed=cfg.seed, train=True, epoch=epoch,
                crop_frac=cfg.data.crop_frac,
                rgb_mean=cfg.data.rgb_mean, rgb_std=cfg.data.rgb_std,
            ):
                model.train()
                bundle, _ = model(batch.rgb, batch.depth)
                loss, parts = total_loss(bundle, batch.gt, cfg.optim.lambda_weights)
                if not torch.isfinite(loss):
                    dump = os.path.join(cfg.output_dir, "nan_batch.txt")
                    with open(dump, "w", encoding="utf-8") as fh:
                        fh.write(f"step {step} epoch {epoch}\n")
                        fh.write("batch ids: " + " ".join(batch.ids) + "\n")
                    raise NumericError(
                        f"non-finite loss at step {step}; offending batch "
                        f"{batch.ids} dumped to {dump}"
                    )
                opt.zero_grad()
                loss.backward()
                opt.step()
                value = loss.item()
                if first_loss is None:
                    first_loss = value
                last_loss = value
                epoch_losses.append(value)
                if step % log_every == 0:
                    log.write(
                        f"{step},{epoch},{value:.8f},{lr:.3e},"
                        + ",".join(f"{p.item():.8f}" for p in parts) + "\n"
                    )
                step += 1
                if cfg.optim.max_steps and step >= cfg.optim.max_steps:
                    stop = True
                    break
            if epoch_losses:
                mean_epoch = sum(epoch_losses) / len(epoch_losses)
                if mean_epoch < best_epoch_loss:
                    best_epoch_loss = mean_epoch
                    save_checkpoint(best_path, model, cfg)
                if not quiet:
                    print(f"epoch {epoch}: mean loss {mean_epoch:.5f} lr {lr:.2e}")
            if stop:
                break
    save_checkpoint(last_path, model, cfg)
    return {
        "steps": step,
        "first_loss": first_loss,
        "last_loss": last_loss,
        "best_checkpoint": best_path,
        "last_checkpoint": last_path,
        "log": log_path,
        "model": model,
    }
