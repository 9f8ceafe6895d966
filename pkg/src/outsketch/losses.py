"""Training objectives: masked reconstruction, Wasserstein adversarial terms
with gradient penalty, sketch alignment, and the weighted total.

Reconstruction-style losses use mean reduction over elements so the weights
are resolution-independent.
"""

from dataclasses import dataclass, replace

import numpy as np
import torch


@dataclass(frozen=True)
class LossWeights:
    lambda_r: float = 0.998   # masked reconstruction
    lambda_a: float = 0.002   # adversarial blend
    lambda_s: float = 1.0     # sketch alignment
    alpha: float = 0.9        # global vs local critic blend
    lambda_w: float = 10.0    # gradient penalty

    def __post_init__(self):
        for name in ("lambda_r", "lambda_a", "lambda_s", "alpha", "lambda_w"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and nonnegative, got {v}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")

    def scaled(self, c):
        """Scale the three aggregate weights by c (blend and penalty untouched)."""
        return replace(self, lambda_r=self.lambda_r * c,
                       lambda_a=self.lambda_a * c, lambda_s=self.lambda_s * c)


def build_loss_mask(height, width_full, floor=0.2, dtype=torch.float32):
    """Per-column reconstruction weights: 1 over the known left half, then a
    linear descent from 1 down to `floor` at the rightmost column.

    Returns an (height, width_full) tensor with values in (0, 1].
    """
    if height < 1 or width_full < 2 or width_full % 2:
        raise ValueError(f"need positive height and even width, got {height}x{width_full}")
    if not (0.0 < floor <= 1.0):
        raise ValueError(f"floor must lie in (0, 1], got {floor}")
    half = width_full // 2
    j = np.arange(width_full, dtype=np.float64)
    denom = width_full - 1 - half
    if denom > 0:
        ramp = 1.0 + (floor - 1.0) * (j - half) / denom
    else:
        ramp = np.full_like(j, floor)
    col = np.where(j < half, 1.0, ramp)
    return torch.as_tensor(np.tile(col, (height, 1)), dtype=dtype)


def masked_l1(image, image_hat, mask):
    """Mean over all elements of mask * |image - image_hat|.

    The mask is an (H, W) plane broadcast over batch and channels.
    """
    if image.shape != image_hat.shape:
        raise ValueError(f"shape mismatch: {tuple(image.shape)} vs {tuple(image_hat.shape)}")
    if not torch.is_tensor(mask):
        mask = torch.as_tensor(np.asarray(mask))
    if mask.shape[-2:] != image.shape[-2:]:
        raise ValueError(
            f"mask {tuple(mask.shape)} does not cover image plane {tuple(image.shape[-2:])}"
        )
    return (mask.to(image.dtype) * (image - image_hat).abs()).mean()


def gradient_penalty(critic, real_in, fake_in, sketch=None, lambda_w=10.0, generator=None):
    """Two-sided penalty pulling the critic's gradient norm to 1 on random
    per-sample interpolates between real and fake inputs.

    The sketch conditioning, when given, is passed through to the critic but
    excluded from both the interpolation and the gradient.
    """
    if real_in.shape != fake_in.shape:
        raise ValueError(f"shape mismatch: {tuple(real_in.shape)} vs {tuple(fake_in.shape)}")
    n = real_in.shape[0]
    eps = torch.rand((n,) + (1,) * (real_in.dim() - 1),
                     dtype=real_in.dtype, device=real_in.device, generator=generator)
    interp = (eps * real_in + (1.0 - eps) * fake_in).detach().requires_grad_(True)
    scores = critic(interp, sketch) if sketch is not None else critic(interp)
    grads = torch.autograd.grad(outputs=scores.sum(), inputs=interp,
                                create_graph=True, retain_graph=True)[0]
    norms = grads.flatten(1).norm(2, dim=1)
    return lambda_w * ((norms - 1.0) ** 2).mean()


def critic_loss(d_real, d_fake, gp=0.0):
    """Per-critic objective: mean fake score minus mean real score plus the
    gradient penalty. The two critics' losses are summed by the caller."""
    if not torch.is_tensor(d_real):
        d_real = torch.as_tensor(d_real, dtype=torch.float64)
    if not torch.is_tensor(d_fake):
        d_fake = torch.as_tensor(d_fake, dtype=torch.float64)
    return d_fake.mean() - d_real.mean() + gp


def generator_adv_loss(dg_fake, dl_fake, alpha=0.9):
    """Blend of the negated critic scores on generated output:
    alpha * (-mean global) + (1 - alpha) * (-mean local)."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    if not torch.is_tensor(dg_fake):
        dg_fake = torch.as_tensor(dg_fake, dtype=torch.float64)
    if not torch.is_tensor(dl_fake):
        dl_fake = torch.as_tensor(dl_fake, dtype=torch.float64)
    return alpha * (-dg_fake.mean()) + (1.0 - alpha) * (-dl_fake.mean())


def sketch_alignment_loss(image_hat, sketch, detector):
    """Mean squared difference between the frozen detector's edge response on
    the generated image and the target binary sketch."""
    if sketch.shape[-2:] != image_hat.shape[-2:]:
        raise ValueError(
            f"sketch plane {tuple(sketch.shape[-2:])} does not match image "
            f"plane {tuple(image_hat.shape[-2:])}"
        )
    edges = detector(image_hat)
    return ((edges - sketch.to(edges.dtype)) ** 2).mean()


def total_generator_loss(l1, ls, lg_adv, weights):
    """lambda_r * l1 + lambda_s * ls + lambda_a * lg_adv (lg_adv comes in
    already blended across the two critics)."""
    return weights.lambda_r * l1 + weights.lambda_s * ls + weights.lambda_a * lg_adv
