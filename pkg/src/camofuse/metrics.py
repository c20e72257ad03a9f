"""Evaluation measures for camouflage/saliency maps: structure measure,
enhanced-alignment measure, weighted F-measure and MAE, plus a
directory-level batch evaluator.

Conventions (configurable where noted):
  * predictions are grayscale in [0, 1]; ground truth is binarized at 0.5;
  * structure measure uses alpha = 0.5 with the usual object/region split
    around the ground-truth centroid;
  * the enhanced-alignment measure averages over 256 midpoint thresholds
    (k + 0.5)/256 and normalizes by the pixel count, so a perfect
    prediction scores exactly 1; an adaptive-threshold variant
    (threshold = 2 * mean) is available;
  * the weighted F-measure uses beta^2 = 1, a 7x7 Gaussian with sigma = 5,
    and distance-based importance weighting; nearest-foreground ties are
    broken toward the smallest (row, col) coordinate.
"""

import math
import os
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .errors import DataError

REPORT_COLUMNS = ("dataset", "n", "s_alpha", "e_phi", "f_w_beta", "mae")


def _validate(pred, gt):
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs gt {gt.shape}")
    if not np.all((gt == 0) | (gt == 1)):
        raise ValueError("ground truth must be binary")
    return np.clip(pred, 0.0, 1.0), gt


def mae(pred, gt):
    """Mean absolute per-pixel error."""
    pred, gt = _validate(pred, gt)
    return float(np.abs(pred - gt).mean())


# ---------------------------------------------------------------- structure

def _object_score(values):
    if values.size == 0:
        return 0.0
    m = float(values.mean())
    s = float(values.std(ddof=1)) if values.size > 1 else 0.0
    return 2.0 * m / (m * m + 1.0 + s)


def _s_object(pred, gt):
    u = float(gt.mean())
    fg = pred[gt == 1]
    bg = 1.0 - pred[gt == 0]
    return u * _object_score(fg) + (1.0 - u) * _object_score(bg)


def _region_ssim(p, g):
    n = p.size
    if n == 0:
        return 1.0
    x = float(p.mean())
    y = float(g.mean())
    if n > 1:
        sx = float(((p - x) ** 2).sum()) / (n - 1)
        sy = float(((g - y) ** 2).sum()) / (n - 1)
        sxy = float(((p - x) * (g - y)).sum()) / (n - 1)
    else:
        sx = sy = sxy = 0.0
    a = 4.0 * x * y * sxy
    b = (x * x + y * y) * (sx + sy)
    if a != 0.0:
        return a / b
    return 1.0 if b == 0.0 else 0.0


def _centroid(gt):
    h, w = gt.shape
    ys, xs = np.nonzero(gt)
    cy = int(round(float(ys.mean())))
    cx = int(round(float(xs.mean())))
    # keep every quadrant non-empty
    return min(max(cy, 1), h - 1), min(max(cx, 1), w - 1)


def _s_region(pred, gt):
    h, w = gt.shape
    cy, cx = _centroid(gt)
    total = h * w
    score = 0.0
    for rs, cs in ((slice(0, cy), slice(0, cx)), (slice(0, cy), slice(cx, w)),
                   (slice(cy, h), slice(0, cx)), (slice(cy, h), slice(cx, w))):
        p, g = pred[rs, cs], gt[rs, cs]
        score += (p.size / total) * _region_ssim(p, g)
    return score


def s_measure(pred, gt, alpha=0.5):
    """Structural similarity between a prediction and a binary mask."""
    pred, gt = _validate(pred, gt)
    u = float(gt.mean())
    if u == 0.0:          # no foreground: reward empty predictions
        s = 1.0 - float(pred.mean())
    elif u == 1.0:        # all foreground
        s = float(pred.mean())
    else:
        s = alpha * _s_object(pred, gt) + (1.0 - alpha) * _s_region(pred, gt)
    return max(s, 0.0)


# ------------------------------------------------------- enhanced alignment

def _alignment_score(fm, gt):
    fm = fm.astype(np.float64)
    if not gt.any():
        enhanced = 1.0 - fm
    elif gt.all():
        enhanced = fm
    else:
        dfm = fm - fm.mean()
        dgt = gt - gt.mean()
        align = 2.0 * dfm * dgt / (dfm * dfm + dgt * dgt)
        enhanced = (align + 1.0) ** 2 / 4.0
    return float(enhanced.mean())


def e_measure(pred, gt, variant="mean", n_thresholds=256):
    """Enhanced-alignment measure of global/local agreement.

    variant 'mean' averages the score over midpoint thresholds of the
    prediction; 'adaptive' evaluates at threshold 2 * mean(pred).
    """
    pred, gt = _validate(pred, gt)
    if variant == "adaptive":
        thresholds = [min(2.0 * float(pred.mean()), 1.0)]
    elif variant == "mean":
        thresholds = (np.arange(n_thresholds) + 0.5) / n_thresholds
    else:
        raise ValueError(f"unknown e-measure variant {variant!r}")
    scores = [_alignment_score(pred >= t, gt) for t in thresholds]
    return float(math.fsum(scores) / len(scores))


# --------------------------------------------------------------- weighted F

def _gaussian_kernel(size, sigma):
    half = size // 2
    ax = np.arange(-half, half + 1, dtype=np.float64)
    xx, yy = np.meshgrid(ax, ax)
    k = np.exp(-(xx * xx + yy * yy) / (2.0 * sigma * sigma))
    return k / k.sum()


def _nearest_foreground(gt):
    """Distance to the nearest foreground pixel and that pixel's index.

    Ties are broken toward the smallest (row, col) coordinate so the
    assignment is uniquely defined.
    """
    h, w = gt.shape
    fg = np.argwhere(gt == 1)          # row-major scan: lexicographic order
    dist = np.zeros((h, w), dtype=np.float64)
    rows, cols = np.indices((h, w))
    nearest = np.stack([rows, cols])
    bg = np.argwhere(gt == 0)
    if bg.size == 0 or fg.size == 0:
        return dist, nearest
    tree = cKDTree(fg)
    d, _ = tree.query(bg, k=1)
    d2 = np.rint(d * d).astype(np.int64)
    radii = np.sqrt(d2.astype(np.float64)) + 1e-6
    balls = tree.query_ball_point(bg, radii)
    for (r, c), dd2, ids in zip(bg, d2, balls):
        pick = fg[min(ids)]            # every ball member attains the minimum
        dist[r, c] = math.sqrt(float(dd2))
        nearest[0, r, c] = pick[0]
        nearest[1, r, c] = pick[1]
    return dist, nearest


def weighted_f_beta(pred, gt, beta_sq=1.0, sigma=5.0, kernel_size=7):
    """Weighted precision/recall combination with error dependency via a
    Gaussian-weighted neighborhood and distance-decayed importance."""
    pred, gt = _validate(pred, gt)
    if not gt.any():
        return 0.0                      # no foreground to recall
    err = np.abs(pred - gt)
    dist, nearest = _nearest_foreground(gt)
    bg = gt == 0
    err_t = err.copy()
    err_t[bg] = err[nearest[0][bg], nearest[1][bg]]
    smoothed = ndimage.correlate(
        err_t, _gaussian_kernel(kernel_size, sigma), mode="constant", cval=0.0
    )
    min_err = err.copy()
    take = (gt == 1) & (smoothed < err)
    min_err[take] = smoothed[take]
    importance = np.ones_like(err)
    importance[bg] = 2.0 - np.exp(np.log(0.5) / 5.0 * dist[bg])
    weighted_err = min_err * importance
    fg = gt == 1
    tp_w = gt.sum() - weighted_err[fg].sum()
    fp_w = weighted_err[bg].sum()
    recall = 1.0 - float(weighted_err[fg].mean())
    precision = float(tp_w / (tp_w + fp_w)) if (tp_w + fp_w) > 0 else 0.0
    denom = recall + beta_sq * precision
    if denom <= 0:
        return 0.0
    return float((1.0 + beta_sq) * precision * recall / denom)


# ------------------------------------------------------------ batch evaluation

@dataclass
class MetricReport:
    dataset: str
    count: int
    s_alpha: float
    e_phi: float
    f_w_beta: float
    mae: float

    def row(self):
        return (self.dataset, str(self.count), f"{self.s_alpha:.4f}",
                f"{self.e_phi:.4f}", f"{self.f_w_beta:.4f}", f"{self.mae:.4f}")


def load_grayscale(path):
    """8-bit grayscale image as float64 in [0, 1]."""
    from PIL import Image

    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("L"), dtype=np.float64)
    except Exception as exc:
        raise DataError(f"cannot decode {path}: {exc}") from exc
    return arr / 255.0


def _stem_map(directory):
    files = {}
    for name in sorted(os.listdir(directory)):
        stem, ext = os.path.splitext(name)
        if ext.lower() in (".png", ".jpg", ".jpeg", ".bmp"):
            files[stem] = os.path.join(directory, name)
    return files


def evaluate_directory(pred_dir, gt_dir, e_variant="mean", dataset=None):
    """Average the four measures over filename-matched grayscale images.

    Predictions must already be at ground-truth resolution; a size
    mismatch is an error, not a resize. Averaging uses compensated
    summation so the result does not depend on reduction order.
    """
    preds = _stem_map(pred_dir)
    gts = _stem_map(gt_dir)
    orphans = sorted(set(preds) ^ set(gts))
    if orphans:
        raise DataError(f"unmatched files between {pred_dir} and {gt_dir}: {orphans}")
    if not preds:
        raise DataError(f"no image pairs found in {pred_dir} / {gt_dir}")
    per_metric = {"s": [], "e": [], "f": [], "m": []}
    for stem in sorted(preds):
        p = load_grayscale(preds[stem])
        g = (load_grayscale(gts[stem]) >= 0.5).astype(np.float64)
        if p.shape != g.shape:
            raise DataError(
                f"size mismatch for {stem!r}: prediction {p.shape} vs GT {g.shape}"
            )
        per_metric["s"].append(s_measure(p, g))
        per_metric["e"].append(e_measure(p, g, variant=e_variant))
        per_metric["f"].append(weighted_f_beta(p, g))
        per_metric["m"].append(mae(p, g))
    n = len(preds)
    return MetricReport(
        dataset=dataset or os.path.basename(os.path.normpath(gt_dir)),
        count=n,
        s_alpha=math.fsum(per_metric["s"]) / n,
        e_phi=math.fsum(per_metric["e"]) / n,
        f_w_beta=math.fsum(per_metric["f"]) / n,
        mae=math.fsum(per_metric["m"]) / n,
    )


def write_report_csv(reports, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(REPORT_COLUMNS) + "\n")
        for r in reports:
            fh.write(",".join(r.row()) + "\n")


def format_report_table(reports):
    """Aligned text table in the standard metric column order."""
    header = ("dataset", "n", "S_alpha", "E_phi", "F_w_beta", "MAE")
    rows = [header] + [r.row() for r in reports]
    widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
    lines = []
    for row in rows:
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)))
    return "\n".join(lines)
