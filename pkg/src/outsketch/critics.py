"""Wasserstein critic pair: a global critic scoring the full-width image and
a local critic scoring only the synthesized right half, both conditioned on
the sketch by channel concatenation.
"""

import torch
from torch import nn

from .blocks import SamePadConv2d
from .generator import get_scale

CRITIC_CH = [64, 128, 256, 512, 512]


class Critic(nn.Module):
    """Five stride-2 convolutions with LeakyReLU then a linear head to one
    unbounded scalar per sample (no saturating output nonlinearity)."""

    def __init__(self, input_hw, in_channels=4, channel_div=1):
        super().__init__()
        h, w = input_hw
        if h % 32 or w % 32:
            raise ValueError(f"input resolution must be divisible by 32, got {input_hw}")
        self.input_hw = (h, w)
        self.in_channels = in_channels
        chans = [max(c // channel_div, 1) for c in CRITIC_CH]
        layers = []
        cur = in_channels
        for ch in chans:
            layers.append(SamePadConv2d(cur, ch, 5, stride=2))
            layers.append(nn.LeakyReLU(0.2))
            cur = ch
        self.stack = nn.Sequential(*layers)
        self.head = nn.Linear(cur * (h // 32) * (w // 32), 1)

    def forward(self, image, sketch=None):
        x = image if sketch is None else torch.cat([image, sketch.to(image.dtype)], dim=1)
        if x.dim() != 4 or x.shape[1] != self.in_channels or x.shape[-2:] != self.input_hw:
            raise ValueError(
                f"expected Nx{self.in_channels}x{self.input_hw[0]}x{self.input_hw[1]}, "
                f"got {tuple(x.shape)}"
            )
        return self.head(self.stack(x).flatten(1)).squeeze(-1)


def make_critic_pair(scale):
    """Global critic over the full width and local critic over the right half."""
    scale = get_scale(scale)
    h, w = scale.half_hw
    global_critic = Critic((h, 2 * w), in_channels=4, channel_div=scale.channel_div)
    local_critic = Critic((h, w), in_channels=4, channel_div=scale.channel_div)
    return global_critic, local_critic
