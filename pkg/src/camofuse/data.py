"""Dataset ingestion: (RGB, depth, GT) triplets from a directory layout
<root>/<split>/{Imgs,Depth,GT}, resized/normalized/augmented into aligned
training samples, served as deterministic shuffled batches.

Augmentation (train only): horizontal flip with p=0.5 and a random border
crop of up to `crop_frac` per side with p=0.5, both applied with identical
geometry to RGB, depth and mask. RGB is channel-standardized with the
usual ImageNet constants; depth is min-max normalized per image; the mask
is binarized at 128/255.
"""

import os
import warnings
from dataclasses import dataclass, field

import numpy as np
import torch
from PIL import Image

from .errors import DataError

IMAGE_EXTS = (".png", ".jpg", ".jpeg", ".bmp")
RGB_MEAN = (0.485, 0.456, 0.406)
RGB_STD = (0.229, 0.224, 0.225)


@dataclass
class DatasetManifest:
    root: str
    split: str
    stems: list
    images: dict
    depths: dict
    gts: dict
    warnings: list = field(default_factory=list)

    @property
    def count(self):
        return len(self.stems)


@dataclass
class Sample:
    rgb: torch.Tensor          # (3, S, S) standardized
    depth: torch.Tensor        # (1, S, S) in [0, 1]
    gt: torch.Tensor           # (S, S) binary
    id: str
    original_size: tuple       # (H0, W0)


@dataclass
class Batch:
    rgb: torch.Tensor          # (B, 3, S, S)
    depth: torch.Tensor        # (B, 1, S, S)
    gt: torch.Tensor           # (B, S, S)
    ids: list
    original_sizes: list


def _list_stems(directory):
    out = {}
    for name in sorted(os.listdir(directory)):
        stem, ext = os.path.splitext(name)
        if ext.lower() in IMAGE_EXTS:
            out[stem] = os.path.join(directory, name)
    return out


def scan_dataset(root, split):
    """Manifest of stems present in all of Imgs/, Depth/ and GT/.

    Stems missing from any of the three are excluded with a warning;
    an empty intersection is an error.
    """
    base = os.path.join(root, split)
    dirs = {}
    for sub in ("Imgs", "Depth", "GT"):
        path = os.path.join(base, sub)
        if not os.path.isdir(path):
            raise DataError(f"missing dataset directory: {path}")
        dirs[sub] = _list_stems(path)
    common = sorted(set(dirs["Imgs"]) & set(dirs["Depth"]) & set(dirs["GT"]))
    warnings = []
    for sub, stems in dirs.items():
        for stem in sorted(set(stems) - set(common)):
            warnings.append(f"orphan: {sub}/{os.path.basename(stems[stem])}")
    if not common:
        raise DataError(f"no aligned (Imgs, Depth, GT) triplets under {base}")
    return DatasetManifest(
        root=root, split=split, stems=common,
        images={s: dirs["Imgs"][s] for s in common},
        depths={s: dirs["Depth"][s] for s in common},
        gts={s: dirs["GT"][s] for s in common},
        warnings=warnings,
    )


def _decode(path, mode, warn_on_convert=False):
    try:
        with Image.open(path) as im:
            if warn_on_convert and im.mode != "L":
                warnings.warn(f"{path}: {im.mode} depth map converted by luminance")
            return im.convert(mode)
    except DataError:
        raise
    except Exception as exc:
        raise DataError(f"cannot decode {path}: {exc}") from exc


def hflip_arrays(*arrays):
    """Mirror each (.., H, W) array along its last axis."""
    return tuple(np.ascontiguousarray(a[..., ::-1]) for a in arrays)


def _crop_box(size, fracs):
    left = int(round(fracs[0] * size))
    top = int(round(fracs[1] * size))
    right = size - int(round(fracs[2] * size))
    bottom = size - int(round(fracs[3] * size))
    return left, top, right, bottom


def rgb_tensor(rgb_im, rgb_mean=RGB_MEAN, rgb_std=RGB_STD):
    """Channel-standardized (3, H, W) tensor from a PIL RGB image."""
    rgb = np.asarray(rgb_im, dtype=np.float32) / 255.0          # (H, W, 3)
    rgb = (rgb - np.asarray(rgb_mean, np.float32)) / np.asarray(rgb_std, np.float32)
    return torch.from_numpy(np.transpose(rgb, (2, 0, 1)))


def depth_tensor(depth_im):
    """Per-image min-max normalized (1, H, W) tensor from a PIL L image."""
    depth = np.asarray(depth_im, dtype=np.float32) / 255.0
    lo, hi = float(depth.min()), float(depth.max())
    depth = (depth - lo) / (hi - lo) if hi > lo else np.zeros_like(depth)
    return torch.from_numpy(depth[None, :, :])


def load_sample(manifest, index, size, train=False, rng=None, crop_frac=0.03,
                rgb_mean=RGB_MEAN, rgb_std=RGB_STD):
    """Decode, resize and (optionally) augment one aligned triplet."""
    if index >= manifest.count:
        raise IndexError(index)
    stem = manifest.stems[index]
    rgb_im = _decode(manifest.images[stem], "RGB")
    depth_im = _decode(manifest.depths[stem], "L", warn_on_convert=True)
    gt_im = _decode(manifest.gts[stem], "L")
    original_size = (rgb_im.height, rgb_im.width)

    rgb_im = rgb_im.resize((size, size), Image.BILINEAR)
    depth_im = depth_im.resize((size, size), Image.BILINEAR)
    gt_im = gt_im.resize((size, size), Image.NEAREST)

    if train:
        if rng is None:
            rng = np.random.default_rng()
        if rng.random() < 0.5:
            rgb_im = rgb_im.transpose(Image.FLIP_LEFT_RIGHT)
            depth_im = depth_im.transpose(Image.FLIP_LEFT_RIGHT)
            gt_im = gt_im.transpose(Image.FLIP_LEFT_RIGHT)
        if rng.random() < 0.5:
            box = _crop_box(size, rng.uniform(0.0, crop_frac, size=4))
            rgb_im = rgb_im.crop(box).resize((size, size), Image.BILINEAR)
            depth_im = depth_im.crop(box).resize((size, size), Image.BILINEAR)
            gt_im = gt_im.crop(box).resize((size, size), Image.NEAREST)

    gt = (np.asarray(gt_im, dtype=np.float32) >= 128.0).astype(np.float32)

    return Sample(
        rgb=rgb_tensor(rgb_im, rgb_mean, rgb_std), depth=depth_tensor(depth_im),
        gt=torch.from_numpy(gt), id=stem, original_size=original_size,
    )


def load_rgb_depth(rgb_path, depth_path, size, rgb_mean=RGB_MEAN, rgb_std=RGB_STD):
    """Single inference pair (no mask, no augmentation).

    Returns (rgb (3,S,S), depth (1,S,S), original_size).
    """
    rgb_im = _decode(rgb_path, "RGB")
    depth_im = _decode(depth_path, "L", warn_on_convert=True)
    original_size = (rgb_im.height, rgb_im.width)
    rgb_im = rgb_im.resize((size, size), Image.BILINEAR)
    depth_im = depth_im.resize((size, size), Image.BILINEAR)
    return (rgb_tensor(rgb_im, rgb_mean, rgb_std), depth_tensor(depth_im),
            original_size)


def batches(manifest, batch_size, size, seed=0, train=False, epoch=0,
            crop_frac=0.03, rgb_mean=RGB_MEAN, rgb_std=RGB_STD):
    """Stream of stacked batches; shuffled per (seed, epoch) when training,
    manifest order otherwise. The final partial batch is emitted."""
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    order = list(range(manifest.count))
    rng = np.random.default_rng(np.random.SeedSequence([seed, epoch]))
    if train:
        order = list(rng.permutation(manifest.count))
    for start in range(0, len(order), batch_size):
        chunk = order[start:start + batch_size]
        samples = [
            load_sample(manifest, i, size, train=train, rng=rng,
                        crop_frac=crop_frac, rgb_mean=rgb_mean, rgb_std=rgb_std)
            for i in chunk
        ]
        yield Batch(
            rgb=torch.stack([s.rgb for s in samples]),
            depth=torch.stack([s.depth for s in samples]),
            gt=torch.stack([s.gt for s in samples]),
            ids=[s.id for s in samples],
            original_sizes=[s.original_size for s in samples],
        )
