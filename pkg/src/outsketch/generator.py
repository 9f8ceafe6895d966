"""Encoder-LSTM-decoder outpainting generator.

The context encoder compresses the left half (image + sketch + coordinate
maps) to a bottleneck; an LSTM pair predicts the right-half bottleneck from
the width-slice sequence, fused with sketch/position guidance states; the
decoder rebuilds the full-width image, re-injecting guidance into the right
half of each scale through conditional skip connections.
"""

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .blocks import (
    GatedConv2d,
    GatedDeconv2d,
    GatedResBlock,
    SamePadConv2d,
    binarize_sketch,
    concat_width,
    position_channels,
    split_halves,
    to_hwc,
    to_nchw,
)

# Channel widths at full scale; desk scale divides these by ArchitectureScale.channel_div.
STEM_CH = 64
ENCODER_CH = [128, 256, 512, 1024]
BOTTLENECK_CH = 512
DECODER_CH = [512, 256, 128, 64]
GUIDE_CH = [64, 128, 256, 512, 512]
RESBLOCKS_DOWN = [3, 4, 5]   # after the 256, 512 and 1024 channel encoder convs
RESBLOCKS_UP = [2, 3, 4]     # before each conditional-skip + deconv stage


@dataclass(frozen=True)
class ArchitectureScale:
    """Spatial/channel schedule of one model size.

    `half_hw` is the resolution of the left half; the full output is
    (H, 2*W). The bottleneck is 32x smaller spatially and the LSTM hidden
    width equals one bottleneck width-slice (h_b * c_b).
    """

    name: str
    half_hw: tuple
    channel_div: int = 1

    def __post_init__(self):
        h, w = self.half_hw
        if h % 32 or w % 32:
            raise ValueError(f"half resolution must be divisible by 32, got {self.half_hw}")

    def ch(self, full_width):
        return max(full_width // self.channel_div, 1)

    @property
    def bottleneck(self):
        h, w = self.half_hw
        return (h // 32, w // 32, self.ch(BOTTLENECK_CH))

    @property
    def hidden_size(self):
        h_b, _, c_b = self.bottleneck
        return h_b * c_b

    @property
    def full_hw(self):
        h, w = self.half_hw
        return (h, 2 * w)


SCALES = {
    "full": ArchitectureScale("full", (128, 128), 1),
    "desk": ArchitectureScale("desk", (64, 64), 4),
}


def get_scale(name):
    if isinstance(name, ArchitectureScale):
        return name
    try:
        return SCALES[name]
    except KeyError:
        raise ValueError(f"unknown scale {name!r}, expected one of {sorted(SCALES)}") from None


class ContextEncoder(nn.Module):
    """Left-half encoder: gated stack over image+sketch, plain conv over the
    coordinate maps, concatenated and compressed to the bottleneck."""

    def __init__(self, scale):
        super().__init__()
        c = scale.ch
        self.image_stem = GatedConv2d(4, c(STEM_CH), 4, stride=2)
        self.position_stem = SamePadConv2d(2, c(STEM_CH), 4, stride=2)
        self.down1 = GatedConv2d(c(ENCODER_CH[0]), c(ENCODER_CH[0]), 3, stride=2)
        self.down2 = GatedConv2d(c(ENCODER_CH[0]), c(ENCODER_CH[1]), 1, stride=2)
        self.res2 = nn.Sequential(*[GatedResBlock(c(ENCODER_CH[1])) for _ in range(RESBLOCKS_DOWN[0])])
        self.down3 = GatedConv2d(c(ENCODER_CH[1]), c(ENCODER_CH[2]), 3, stride=2)
        self.res3 = nn.Sequential(*[GatedResBlock(c(ENCODER_CH[2])) for _ in range(RESBLOCKS_DOWN[1])])
        # table says stride 1 here, but the declared 8x8->4x4 shape needs stride 2
        self.down4 = GatedConv2d(c(ENCODER_CH[2]), c(ENCODER_CH[3]), 3, stride=2)
        self.res4 = nn.Sequential(*[GatedResBlock(c(ENCODER_CH[3])) for _ in range(RESBLOCKS_DOWN[2])])
        self.out = SamePadConv2d(c(ENCODER_CH[3]), c(BOTTLENECK_CH), 3, stride=1)

    def forward(self, image_left, sketch_left, pos_left):
        x = self.image_stem(torch.cat([image_left, sketch_left], dim=1))
        p = F.elu(self.position_stem(pos_left))
        x = torch.cat([x, p], dim=1)
        x = self.down1(x)
        x = self.res2(self.down2(x))
        x = self.res3(self.down3(x))
        x = self.res4(self.down4(x))
        return F.elu(self.out(x))


class GuidanceEncoder(nn.Module):
    """Stride-2 conv stack compressing a right-half raster to one bottleneck
    slice, tapping the three scales the decoder's skip connections consume."""

    def __init__(self, scale, in_channels):
        super().__init__()
        h, w = scale.half_hw
        h_b, w_b, _ = scale.bottleneck
        chans = [scale.ch(c) for c in GUIDE_CH]
        downs = []
        cur = in_channels
        for ch in chans:
            downs.append(SamePadConv2d(cur, ch, 4, stride=2))
            cur = ch
        self.downs = nn.ModuleList(downs)
        # collapse the width axis to a single column, keeping the channel width
        self.collapse = nn.ModuleList(
            [SamePadConv2d(cur, cur, 4, stride=(1, 2)) for _ in range(int(np.log2(w_b)))]
        )
        self.tap_heights = {h_b, 2 * h_b, 4 * h_b}

    def forward(self, raster):
        taps = {}
        x = raster
        for conv in self.downs:
            x = F.elu(conv(x))
            if x.shape[-2] in self.tap_heights:
                taps[x.shape[-2]] = x
        for conv in self.collapse:
            x = F.elu(conv(x))
        state = x.flatten(1)  # N x (h_b * c_b)
        return state, taps


@dataclass
class GuidancePyramid:
    """Sketch/position encoder taps keyed by spatial size, bottleneck first."""

    s_levels: list
    p_levels: list


class SequenceBridge(nn.Module):
    """LSTM encoder over the left bottleneck's width slices; the final state is
    summed element-wise with the sketch and position states and seeds an LSTM
    decoder that unrolls the right bottleneck slice by slice."""

    def __init__(self, scale):
        super().__init__()
        d = scale.hidden_size
        self.encoder = nn.LSTM(d, d, batch_first=True)
        self.decoder = nn.LSTMCell(d, d)

    def forward(self, left_bottleneck, s_state, p_state):
        n, c, h, w = left_bottleneck.shape
        seq = left_bottleneck.permute(0, 3, 1, 2).reshape(n, w, c * h)
        _, (h_n, c_n) = self.encoder(seq)
        hidden = h_n[0] + s_state + p_state
        cell = c_n[0]
        step_in = seq[:, -1]
        slices = []
        for _ in range(w):
            hidden, cell = self.decoder(step_in, (hidden, cell))
            slices.append(hidden)
            step_in = hidden
        right = torch.stack(slices, dim=1).reshape(n, w, c, h).permute(0, 2, 3, 1)
        return right.contiguous()


class ConditionalSkip(nn.Module):
    """Residual fusion of decoder right-half features with guidance taps:
    concat -> 1x1 -> 3x3 -> 1x1 -> add. The last conv is zero-initialized so
    the connection starts as an exact identity."""

    def __init__(self, dec_channels, sketch_channels, pos_channels):
        super().__init__()
        total = dec_channels + sketch_channels + pos_channels
        self.reduce = SamePadConv2d(total, dec_channels, 1)
        self.mix = SamePadConv2d(dec_channels, dec_channels, 3)
        self.out = SamePadConv2d(dec_channels, dec_channels, 1)
        self.out.conv.zero_init = True
        nn.init.zeros_(self.out.conv.weight)
        nn.init.zeros_(self.out.conv.bias)

    def forward(self, d_right, s_i, p_i):
        if d_right.shape[-2:] != s_i.shape[-2:] or d_right.shape[-2:] != p_i.shape[-2:]:
            raise ValueError(
                f"spatial mismatch: decoder {tuple(d_right.shape[-2:])}, "
                f"sketch {tuple(s_i.shape[-2:])}, position {tuple(p_i.shape[-2:])}"
            )
        x = torch.cat([d_right, s_i, p_i], dim=1)
        x = F.elu(self.reduce(x))
        x = F.elu(self.mix(x))
        return d_right + self.out(x)


class Decoder(nn.Module):
    """Width-concatenated bottlenecks through resblock / skip+deconv stages up
    to the full-width image; only the right half is touched by the skips."""

    def __init__(self, scale):
        super().__init__()
        c = scale.ch
        chans = [c(x) for x in DECODER_CH]
        # stage channel walk: 512 -> 512 -> 256 -> 128 (full scale)
        self.res_stages = nn.ModuleList()
        self.skips = nn.ModuleList()
        self.ups = nn.ModuleList()
        cur = c(BOTTLENECK_CH)
        for i, n_blocks in enumerate(RESBLOCKS_UP):
            self.res_stages.append(nn.Sequential(*[GatedResBlock(cur) for _ in range(n_blocks)]))
            tap_ch = c(GUIDE_CH[4 - i])  # guidance tap at this stage's spatial size
            self.skips.append(ConditionalSkip(cur, tap_ch, tap_ch))
            nxt = chans[i]
            self.ups.append(GatedDeconv2d(cur, nxt))
            cur = nxt
        self.up_tail1 = GatedDeconv2d(cur, chans[3])
        self.up_tail2 = GatedDeconv2d(chans[3], 3)

    def forward(self, left_bottleneck, right_bottleneck, pyramid):
        if left_bottleneck.shape != right_bottleneck.shape:
            raise ValueError("bottleneck halves must share a shape")
        x = torch.cat([left_bottleneck, right_bottleneck], dim=-1)
        for res, skip, up in zip(self.res_stages, self.skips, self.ups):
            x = res(x)
            left, right = split_halves(x)
            size = right.shape[-2]
            right = skip(right, pyramid.s_levels[size], pyramid.p_levels[size])
            x = torch.cat([left, right], dim=-1)
            x = up(x)
        x = self.up_tail1(x)
        return torch.tanh(self.up_tail2(x))


class Generator(nn.Module):
    """Full sketch-guided outpainting generator at a given scale."""

    def __init__(self, scale="full"):
        super().__init__()
        self.scale = get_scale(scale)
        self.context_encoder = ContextEncoder(self.scale)
        self.sketch_encoder = GuidanceEncoder(self.scale, 1)
        self.position_encoder = GuidanceEncoder(self.scale, 2)
        self.bridge = SequenceBridge(self.scale)
        self.decoder = Decoder(self.scale)

    def canonical_positions(self, batch=1, dtype=torch.float32, device=None):
        """Left/right halves of the coordinate maps for this scale's full width."""
        h, w = self.scale.full_hw
        pos = to_nchw(position_channels(h, w, dtype=np.float64), dtype=dtype)
        if device is not None:
            pos = pos.to(device)
        left, right = split_halves(pos)
        return left.expand(batch, -1, -1, -1), right.expand(batch, -1, -1, -1)

    def encode_context(self, image_left, sketch_left, pos_left):
        self._check_half(image_left, 3, "image_left")
        self._check_half(sketch_left, 1, "sketch_left")
        self._check_half(pos_left, 2, "pos_left")
        return self.context_encoder(image_left, sketch_left, pos_left)

    def encode_guidance(self, sketch_right, pos_right):
        self._check_half(sketch_right, 1, "sketch_right")
        self._check_half(pos_right, 2, "pos_right")
        s_state, s_taps = self.sketch_encoder(sketch_right)
        p_state, p_taps = self.position_encoder(pos_right)
        return s_state, p_state, GuidancePyramid(s_taps, p_taps)

    def predict_hidden_sequence(self, left_bottleneck, s_state, p_state):
        return self.bridge(left_bottleneck, s_state, p_state)

    def decode_full(self, left_bottleneck, right_bottleneck, pyramid):
        return self.decoder(left_bottleneck, right_bottleneck, pyramid)

    def forward(self, image_left, sketch_left, sketch_right, pos_left=None, pos_right=None):
        if pos_left is None or pos_right is None:
            pos_left, pos_right = self.canonical_positions(
                batch=image_left.shape[0], dtype=image_left.dtype, device=image_left.device
            )
        left_b = self.encode_context(image_left, sketch_left, pos_left)
        s_state, p_state, pyramid = self.encode_guidance(sketch_right, pos_right)
        right_b = self.predict_hidden_sequence(left_b, s_state, p_state)
        return self.decode_full(left_b, right_b, pyramid)

    def _check_half(self, x, channels, name):
        h, w = self.scale.half_hw
        if x.dim() != 4 or x.shape[1] != channels or x.shape[-2:] != (h, w):
            raise ValueError(
                f"{name}: expected Nx{channels}x{h}x{w}, got {tuple(x.shape)}"
            )


def outpaint_steps(generator, image, sketches, detector, threshold=0.6):
    """Iterated rightward extension on numpy rasters.

    `image` is HxWx3 in [-1, 1] at the generator's half resolution; each
    sketch in `sketches` is an HxW binary raster guiding one extension step.
    The current rightmost window's own sketch is re-extracted with the frozen
    detector. Returns an Hx(W*(k+1))x3 panorama whose first block is the
    untouched input.
    """
    if len(sketches) == 0:
        raise ValueError("need at least one guiding sketch")
    h, w = generator.scale.half_hw
    if image.shape[:2] != (h, w):
        raise ValueError(f"expected {h}x{w} input window, got {image.shape[:2]}")
    panorama = np.asarray(image, dtype=np.float32)
    window = panorama
    was_training = generator.training
    generator.eval()
    try:
        with torch.no_grad():
            for sketch in sketches:
                window_t = to_nchw(window)
                sketch_left = binarize_sketch(detector(window_t), threshold)
                sketch_t = to_nchw(np.asarray(sketch, dtype=np.float32))
                full = generator(window_t, sketch_left, sketch_t)
                _, right_t = split_halves(full)
                right = to_hwc(right_t)
                panorama = concat_width(panorama, right, axis=1)
                window = right
    finally:
        generator.train(was_training)
    return panorama
