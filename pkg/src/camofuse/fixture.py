"""Synthetic fixture triplets for tests and smoke runs.

Each sample hides an elliptical object inside a shared background texture
(nearly invisible in RGB) while the depth map makes it pop out, so a tiny
model can overfit the set and the depth branch carries real signal.
"""

import os

import numpy as np
from PIL import Image


def _texture(rng, h, w):
    base = rng.uniform(0.0, 1.0, size=(h // 8 + 2, w // 8 + 2))
    img = Image.fromarray((base * 255).astype(np.uint8)).resize((w, h), Image.BILINEAR)
    return np.asarray(img, dtype=np.float64) / 255.0


def _ellipse_mask(rng, h, w):
    cy = rng.uniform(0.3, 0.7) * h
    cx = rng.uniform(0.3, 0.7) * w
    ry = rng.uniform(0.15, 0.3) * h
    rx = rng.uniform(0.15, 0.3) * w
    yy, xx = np.mgrid[0:h, 0:w]
    return (((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0)


def make_fixture_dataset(root, split="train", count=12, seed=7,
                         min_size=48, max_size=96):
    """Write `count` aligned (RGB, depth, GT) PNG triplets under
    <root>/<split>/{Imgs,Depth,GT} and return the directory."""
    rng = np.random.default_rng(seed)
    base = os.path.join(root, split)
    for sub in ("Imgs", "Depth", "GT"):
        os.makedirs(os.path.join(base, sub), exist_ok=True)
    for i in range(count):
        h = int(rng.integers(min_size, max_size + 1))
        w = int(rng.integers(min_size, max_size + 1))
        mask = _ellipse_mask(rng, h, w)

        tex = _texture(rng, h, w)
        rgb = np.stack([tex, np.roll(tex, 3, axis=0), np.roll(tex, 3, axis=1)], axis=-1)
        shift = rng.uniform(-0.08, 0.08, size=3)
        rgb[mask] = np.clip(rgb[mask] + shift, 0.0, 1.0)
        rgb += rng.normal(0.0, 0.01, size=rgb.shape)
        rgb = np.clip(rgb, 0.0, 1.0)

        grad = np.linspace(0.25, 0.75, h)[:, None] * np.ones((1, w))
        depth = np.clip(grad + mask * rng.uniform(0.3, 0.45), 0.0, 1.0)

        stem = f"fix_{i:03d}"
        Image.fromarray((rgb * 255).astype(np.uint8)).save(
            os.path.join(base, "Imgs", stem + ".png"))
        Image.fromarray((depth * 255).astype(np.uint8)).save(
            os.path.join(base, "Depth", stem + ".png"))
        Image.fromarray((mask * 255).astype(np.uint8)).save(
            os.path.join(base, "GT", stem + ".png"))
    return base


def fixture_root():
    """Path of the bundled 12-sample fixture dataset (repo checkout)."""
    here = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
    return os.path.join(here, "fixtures", "cod12")
