"""Corpus loading, sketch extraction, augmentation and example assembly,
plus a procedural synthetic scenery generator used for desk-scale training
and as the self-contained default corpus.

All rasters here are numpy float32, images HxWx3 in [-1, 1], sketches HxW
binary {0, 1}.
"""

import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .blocks import binarize_sketch, derive_seed, position_channels, split_halves, to_hwc, to_nchw

log = logging.getLogger(__name__)

RASTER_EXTENSIONS = {".png", ".jpg", ".jpeg", ".bmp", ".gif", ".tif", ".tiff", ".webp"}


class CorpusError(Exception):
    """Raised when a corpus directory yields no usable images."""


@dataclass
class MaskingPolicy:
    """Right-sketch masking branch probabilities and patch size range.

    Patch sizes are stated at a reference half-resolution and scale linearly
    with the actual sketch height.
    """

    p_unchanged: float = 0.4
    p_top: float = 0.2
    p_bottom: float = 0.4
    patch_min: tuple = (48, 48)
    patch_max: tuple = (64, 128)
    reference_height: int = 128

    def __post_init__(self):
        total = self.p_unchanged + self.p_top + self.p_bottom
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"branch probabilities must sum to 1, got {total}")
        if min(self.p_unchanged, self.p_top, self.p_bottom) < 0:
            raise ValueError("branch probabilities must be nonnegative")
        if any(a > b for a, b in zip(self.patch_min, self.patch_max)):
            raise ValueError(f"patch_min {self.patch_min} exceeds patch_max {self.patch_max}")


@dataclass
class TrainingExample:
    """One augmented sample split into known-left and predicted-right halves."""

    image_left: np.ndarray
    image_right: np.ndarray
    sketch_left: np.ndarray
    sketch_right: np.ndarray
    pos_left: np.ndarray
    pos_right: np.ndarray
    full_image: np.ndarray
    full_sketch: np.ndarray


def extract_sketch(image, detector, threshold=0.6):
    """Binary edge sketch of an HxWx3 image via the frozen detector."""
    import torch

    with torch.no_grad():
        edges = detector(to_nchw(image))
    return to_hwc(binarize_sketch(edges, threshold))[..., 0]


def random_crop_flip(image, rng, target_hw=None):
    """Random crop to the target resolution plus a fair-coin horizontal flip.

    The crop offsets and the flip decision are always drawn, in that order,
    so the consumed random stream does not depend on the source size.
    """
    h, w = image.shape[:2]
    th, tw = (h, w) if target_hw is None else target_hw
    if h < th or w < tw:
        raise ValueError(f"source {h}x{w} smaller than target {th}x{tw}")
    top = int(rng.integers(0, h - th + 1))
    left = int(rng.integers(0, w - tw + 1))
    out = image[top:top + th, left:left + tw]
    if rng.random() < 0.5:
        out = out[:, ::-1]
    return np.ascontiguousarray(out)


def random_sketch_mask(sketch_right, policy, rng):
    """Zero a random patch of the right-half sketch, or leave it unchanged.

    Branches: unchanged / patch wholly inside the top half / wholly inside
    the bottom half, with the policy's probabilities. Patch dimensions are
    drawn uniformly in the policy range scaled by height relative to the
    reference resolution. Masked pixels become exactly 0.
    """
    h, w = sketch_right.shape[:2]
    out = np.array(sketch_right, copy=True)
    u = rng.random()
    if u < policy.p_unchanged:
        return out
    top_branch = u < policy.p_unchanged + policy.p_top
    s = h / policy.reference_height
    ph_lo = max(1, round(policy.patch_min[0] * s))
    ph_hi = max(ph_lo, min(round(policy.patch_max[0] * s), h // 2))
    pw_lo = max(1, round(policy.patch_min[1] * s))
    pw_hi = max(pw_lo, min(round(policy.patch_max[1] * s), w))
    ph = int(rng.integers(ph_lo, ph_hi + 1))
    pw = int(rng.integers(pw_lo, pw_hi + 1))
    half = h // 2
    if top_branch:
        r0 = int(rng.integers(0, half - ph + 1))
    else:
        r0 = int(rng.integers(half, h - ph + 1))
    c0 = int(rng.integers(0, w - pw + 1))
    out[r0:r0 + ph, c0:c0 + pw] = 0.0
    return out


def make_example(image, detector, rng, policy=None, target_hw=None):
    """Assemble one training example: crop/flip, sketch extraction, half
    split, right-sketch masking, position channels.

    The stored full sketch is the concatenation of the halves after masking,
    so halves always re-concatenate to fulls exactly.
    """
    policy = policy or MaskingPolicy()
    full = random_crop_flip(np.asarray(image, dtype=np.float32), rng, target_hw)
    h, w = full.shape[:2]
    if w % 2:
        raise ValueError(f"training width must be even, got {w}")
    sketch = extract_sketch(full, detector)
    img_l, img_r = split_halves(full, axis=1)
    sk_l, sk_r = split_halves(sketch, axis=1)
    sk_r = random_sketch_mask(sk_r, policy, rng)
    pos = position_channels(h, w)
    pos_l, pos_r = split_halves(pos, axis=1)
    return TrainingExample(
        image_left=img_l, image_right=img_r,
        sketch_left=sk_l, sketch_right=sk_r,
        pos_left=pos_l, pos_right=pos_r,
        full_image=full,
        full_sketch=np.concatenate([sk_l, sk_r], axis=1),
    )


def make_eval_example(image, detector):
    """Deterministic example: no crop jitter, flip, or sketch masking.

    Used by evaluation and by fixed-batch training runs.
    """
    full = np.ascontiguousarray(np.asarray(image, dtype=np.float32))
    h, w = full.shape[:2]
    if w % 2:
        raise ValueError(f"training width must be even, got {w}")
    sketch = extract_sketch(full, detector)
    img_l, img_r = split_halves(full, axis=1)
    sk_l, sk_r = split_halves(sketch, axis=1)
    pos = position_channels(h, w)
    pos_l, pos_r = split_halves(pos, axis=1)
    return TrainingExample(
        image_left=img_l, image_right=img_r,
        sketch_left=sk_l, sketch_right=sk_r,
        pos_left=pos_l, pos_right=pos_r,
        full_image=full,
        full_sketch=np.concatenate([sk_l, sk_r], axis=1),
    )


def _midpoint_profile(rng, width, roughness=0.55):
    """Fractal 1-D silhouette in [0, 1] by midpoint displacement."""
    n = 1
    while n < width:
        n *= 2
    pts = np.zeros(n + 1)
    pts[0] = rng.random()
    pts[n] = rng.random()
    step, amp = n, 1.0
    while step > 1:
        half = step // 2
        for i in range(half, n, step):
            pts[i] = 0.5 * (pts[i - half] + pts[i + half]) + (rng.random() - 0.5) * amp
        step = half
        amp *= roughness
    prof = pts[:width]
    lo, hi = float(prof.min()), float(prof.max())
    if hi - lo < 1e-9:
        return np.zeros(width)
    return (prof - lo) / (hi - lo)


def _render_scene(rng, height, width):
    """Procedural scenery in luminance space [0, 1] plus layout metadata.

    Palette contrast is deliberately strong (bright sky, near-black ridges)
    so silhouettes survive edge binarization.
    """
    rows = np.arange(height, dtype=np.float64)[:, None]
    cols = np.arange(width, dtype=np.float64)[None, :]

    horizon = int(round(height * rng.uniform(0.55, 0.75)))
    top_lum = rng.uniform(0.78, 0.95)
    horizon_lum = rng.uniform(0.62, 0.78)
    ground_lum = rng.uniform(0.15, 0.42)

    lum = np.empty((height, width), dtype=np.float64)
    sky_t = np.clip(rows / max(horizon, 1), 0.0, 1.0)
    lum[:] = top_lum + (horizon_lum - top_lum) * sky_t

    # ground band with a gentle darkening toward the bottom edge
    ground_t = np.clip((rows - horizon) / max(height - horizon, 1), 0.0, 1.0)
    ground = ground_lum * (1.0 - 0.3 * ground_t)
    below = rows >= horizon
    lum = np.where(below, ground, lum)

    has_sun = bool(rng.random() < 0.5)
    if has_sun:
        sr = rng.uniform(0.05, 0.11) * height
        sy = rng.uniform(0.08, 0.45) * horizon
        sx = rng.uniform(0.1, 0.9) * width
        d2 = (rows - sy) ** 2 + (cols - sx) ** 2
        lum = np.where(d2 <= sr * sr, np.minimum(lum + 0.25, 0.98), lum)

    n_clouds = int(rng.integers(0, 4))
    for _ in range(n_clouds):
        cy = rng.uniform(0.05, 0.5) * horizon
        cx = rng.uniform(0.0, 1.0) * width
        ry = rng.uniform(0.02, 0.05) * height
        rx = rng.uniform(0.08, 0.25) * width
        e = ((rows - cy) / ry) ** 2 + ((cols - cx) / rx) ** 2
        lum = np.where((e <= 1.0) & (rows < horizon), np.minimum(lum + 0.08, 0.98), lum)

    n_ridges = int(rng.integers(1, 4))
    for k in range(n_ridges):
        depth = (k + 1) / n_ridges  # 0 -> far, 1 -> near
        span = rng.uniform(0.2, 0.5) * horizon
        base = rng.uniform(0.0, 0.15) * horizon
        prof = _midpoint_profile(rng, width)
        silhouette = horizon - base - span * prof  # top row of the ridge per column
        ridge_lum = rng.uniform(0.02, 0.15) * (1.0 - 0.4 * depth) + 0.02
        inside = (rows >= silhouette[None, :]) & (rows < horizon)
        lum = np.where(inside, ridge_lum, lum)

    lum += rng.normal(0.0, 0.01, size=lum.shape)
    lum = np.clip(lum, 0.0, 1.0)

    # mild per-channel tinting that keeps the channel mean close to lum
    tint = np.where(below[..., None],
                    np.array([-0.03, 0.03, -0.02]), np.array([-0.04, 0.0, 0.04]))
    rgb = np.clip(lum[..., None] + tint, 0.0, 1.0)
    image = (rgb * 2.0 - 1.0).astype(np.float32)
    meta = {"n_ridges": n_ridges, "has_sun": has_sun,
            "label": (n_ridges - 1) * 2 + int(has_sun)}
    return image, meta


N_LAYOUT_CLASSES = 6  # ridge count {1,2,3} crossed with sun presence


def synth_scenery(rng, height, width):
    """Deterministic procedural scenery image, HxWx3 in [-1, 1]."""
    if height < 32 or width < 32:
        raise ValueError(f"scene dimensions must be at least 32, got {height}x{width}")
    image, _ = _render_scene(rng, height, width)
    return image


def scene_with_layout(rng, height, width):
    """Scenery image plus its layout metadata (ridge count, sun flag, label)."""
    if height < 32 or width < 32:
        raise ValueError(f"scene dimensions must be at least 32, got {height}x{width}")
    return _render_scene(rng, height, width)


def synth_corpus(count, height, width, seed=0):
    """List of procedural scenes with per-index derived seeds."""
    return [
        synth_scenery(np.random.default_rng(derive_seed(seed, "scene", i)), height, width)
        for i in range(count)
    ]


def _resize_cover(pil_image, target_hw):
    """Scale the shorter relative side to cover the target, then center-crop."""
    th, tw = target_hw
    w, h = pil_image.size
    if (h, w) == (th, tw):
        return pil_image
    scale = max(th / h, tw / w)
    nh = max(th, int(math.ceil(h * scale - 1e-9)))
    nw = max(tw, int(math.ceil(w * scale - 1e-9)))
    resized = pil_image.resize((nw, nh), Image.BICUBIC)
    left = (nw - tw) // 2
    top = (nh - th) // 2
    return resized.crop((left, top, left + tw, top + th))


def list_corpus_files(path):
    """Raster files under a directory; manifest.txt pins ordering when present."""
    if not os.path.isdir(path):
        raise CorpusError(f"corpus directory not found: {path}")
    manifest = os.path.join(path, "manifest.txt")
    if os.path.isfile(manifest):
        with open(manifest) as fh:
            names = [line.strip() for line in fh if line.strip()]
        return [os.path.join(path, name) for name in names]
    return [
        os.path.join(path, name)
        for name in sorted(os.listdir(path))
        if os.path.splitext(name)[1].lower() in RASTER_EXTENSIONS
    ]


def load_corpus(path, target_hw):
    """Decode every raster under `path` to HxWx3 in [-1, 1] at target_hw.

    Unreadable files are skipped with a warning; an empty result is fatal.
    """
    images = []
    for file_path in list_corpus_files(path):
        try:
            with Image.open(file_path) as img:
                rgb = _resize_cover(img.convert("RGB"), target_hw)
            arr = np.asarray(rgb, dtype=np.float32) / 255.0
        except (OSError, ValueError) as exc:
            log.warning("skipping unreadable corpus file %s: %s", file_path, exc)
            continue
        images.append(arr * 2.0 - 1.0)
    if not images:
        raise CorpusError(f"empty corpus: no readable images under {path}")
    return images


def save_corpus(images, out_dir, prefix="scene"):
    """Write [-1, 1] images as 8-bit PNG files, returning the paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for i, image in enumerate(images):
        arr = np.clip((np.asarray(image) + 1.0) * 0.5 * 255.0, 0, 255).astype(np.uint8)
        p = os.path.join(out_dir, f"{prefix}_{i:04d}.png")
        Image.fromarray(arr).save(p)
        paths.append(p)
    return paths
