"""Pixel-level BCE and region-level soft-IoU losses on logits, combined
per output and weighted across the three supervised outputs."""

import torch
import torch.nn.functional as F

DEFAULT_LAMBDAS = (1.0, 0.5, 0.25)  # final, mid, coarse output weights


def _check(logits, target):
    if logits.shape[-2:] != target.shape[-2:]:
        raise ValueError(
            f"logits {tuple(logits.shape)} vs target {tuple(target.shape)}"
        )
    if not torch.all((target == 0) | (target == 1)):
        raise ValueError("ground truth must be strictly binary")


def bce_loss(logits, target):
    """Mean per-pixel binary cross-entropy, computed in the numerically
    stable with-logits form."""
    _check(logits, target)
    return F.binary_cross_entropy_with_logits(
        logits.reshape(-1), target.reshape(-1).to(logits.dtype)
    )


def iou_loss(logits, target, eps=1.0):
    """Soft IoU loss: 1 - (sum p*G + eps) / (sum p + sum G - sum p*G + eps),
    averaged over the batch. eps keeps empty masks well defined."""
    _check(logits, target)
    p = torch.sigmoid(logits)
    flat_p = p.reshape(p.shape[0], -1)
    flat_g = target.reshape(target.shape[0], -1).to(p.dtype)
    inter = (flat_p * flat_g).sum(dim=1)
    union = flat_p.sum(dim=1) + flat_g.sum(dim=1) - inter
    return (1.0 - (inter + eps) / (union + eps)).mean()


def combined_loss(logits, target):
    return bce_loss(logits, target) + iou_loss(logits, target)


def total_loss(bundle, target, lambdas=DEFAULT_LAMBDAS):
    """Weighted sum of the combined loss over all three outputs; the first
    weight attaches to the final (finest) prediction."""
    parts = [combined_loss(out, target) for out in bundle.as_tuple()]
    lam = [torch.as_tensor(l) for l in lambdas]
    total = sum(l * p for l, p in zip(lam, parts))
    return total, parts
