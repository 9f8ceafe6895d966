"""Differentiable building blocks and raster utilities shared by the generator,
critics and losses: gated convolutions, coordinate maps, sketch binarization and
a frozen differentiable edge operator.

Raster conventions: numpy arrays are HxWxC float32, images live in [-1, 1],
sketches are {0, 1}. Torch tensors are NCHW.
"""

import hashlib
import math

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

EDGE_NORM = 4.0 * math.sqrt(2.0)  # max Sobel magnitude for inputs in [0, 1]


def position_channels(height, width, dtype=np.float32):
    """Coordinate maps x(i,j) = (2j - W)/H, y(i,j) = (2i - H)/H as HxWx2.

    Channel 0 is the width map, channel 1 the height map. Both are computed
    with integer grids divided exactly once, so the values are the correctly
    rounded mathematical ones.
    """
    if height < 1 or width < 1:
        raise ValueError(f"dimensions must be positive, got {height}x{width}")
    j = np.arange(width, dtype=np.int64)
    i = np.arange(height, dtype=np.int64)
    x_row = (2 * j - width).astype(dtype) / dtype(height)
    y_col = (2 * i - height).astype(dtype) / dtype(height)
    x_map = np.broadcast_to(x_row[None, :], (height, width))
    y_map = np.broadcast_to(y_col[:, None], (height, width))
    return np.stack([x_map, y_map], axis=-1)


def binarize_sketch(edge_map, threshold=0.6):
    """Hard-threshold an edge map in [0, 1] to a {0, 1} sketch (strictly above)."""
    if isinstance(edge_map, torch.Tensor):
        lo, hi = edge_map.min().item(), edge_map.max().item()
        if lo < 0.0 or hi > 1.0:
            raise ValueError(f"edge map values must lie in [0, 1], got [{lo}, {hi}]")
        return (edge_map > threshold).to(edge_map.dtype)
    edge_map = np.asarray(edge_map)
    if edge_map.size and (edge_map.min() < 0.0 or edge_map.max() > 1.0):
        raise ValueError(
            f"edge map values must lie in [0, 1], got [{edge_map.min()}, {edge_map.max()}]"
        )
    return (edge_map > threshold).astype(edge_map.dtype if edge_map.dtype.kind == "f" else np.float32)


def split_halves(plane, axis=-1):
    """Split a raster into (left, right) halves along the width axis."""
    w = plane.shape[axis]
    if w % 2 != 0:
        raise ValueError(f"width must be even to split, got {w}")
    if isinstance(plane, torch.Tensor):
        return torch.split(plane, w // 2, dim=axis)
    return np.split(plane, 2, axis=axis)


def concat_width(left, right, axis=-1):
    if isinstance(left, torch.Tensor):
        return torch.cat([left, right], dim=axis)
    return np.concatenate([left, right], axis=axis)


def to_nchw(array, dtype=torch.float32):
    """HxWxC (or HxW) numpy raster -> 1xCxHxW tensor."""
    arr = np.asarray(array)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    t = torch.from_numpy(np.ascontiguousarray(arr)).to(dtype)
    return t.permute(2, 0, 1).unsqueeze(0)


def to_hwc(tensor):
    """1xCxHxW (or CxHxW) tensor -> HxWxC numpy array."""
    t = tensor.detach()
    if t.dim() == 4:
        t = t.squeeze(0)
    return t.permute(1, 2, 0).contiguous().cpu().numpy()


def _pair(v):
    return (v, v) if isinstance(v, int) else tuple(v)


class SamePadConv2d(nn.Module):
    """Conv2d with TF-style SAME padding: output spatial dims = ceil(in / stride)."""

    def __init__(self, in_channels, out_channels, kernel_size, stride=1):
        super().__init__()
        self.kernel_size = _pair(kernel_size)
        self.stride = _pair(stride)
        self.conv = nn.Conv2d(in_channels, out_channels, self.kernel_size,
                              stride=self.stride, padding=0)

    def forward(self, x):
        ih, iw = x.shape[-2:]
        kh, kw = self.kernel_size
        sh, sw = self.stride
        ph = max((math.ceil(ih / sh) - 1) * sh + kh - ih, 0)
        pw = max((math.ceil(iw / sw) - 1) * sw + kw - iw, 0)
        if ph or pw:
            x = F.pad(x, (pw // 2, pw - pw // 2, ph // 2, ph - ph // 2))
        return self.conv(x)


class GatedConv2d(nn.Module):
    """Feature path modulated by a learned sigmoid gate from a parallel conv:
    out = elu(conv_f(x)) * sigmoid(conv_g(x)).
    """

    def __init__(self, in_channels, out_channels, kernel_size, stride=1):
        super().__init__()
        if in_channels < 1 or out_channels < 1:
            raise ValueError("channel counts must be positive")
        self.feature = SamePadConv2d(in_channels, out_channels, kernel_size, stride)
        self.gate = SamePadConv2d(in_channels, out_channels, kernel_size, stride)

    def forward(self, x):
        return F.elu(self.feature(x)) * torch.sigmoid(self.gate(x))


class GatedDeconv2d(nn.Module):
    """Nearest-neighbor 2x upsample followed by a stride-1 gated convolution."""

    def __init__(self, in_channels, out_channels, kernel_size=3):
        super().__init__()
        self.conv = GatedConv2d(in_channels, out_channels, kernel_size, stride=1)

    def forward(self, x):
        x = F.interpolate(x, scale_factor=2, mode="nearest")
        return self.conv(x)


class GatedResBlock(nn.Module):
    """x + g_1x1(g_3x3(g_1x1(x))); identity when the inner path is zeroed."""

    def __init__(self, channels):
        super().__init__()
        self.inner = nn.Sequential(
            GatedConv2d(channels, channels, 1),
            GatedConv2d(channels, channels, 3),
            GatedConv2d(channels, channels, 1),
        )

    def forward(self, x):
        return x + self.inner(x)


class SobelEdgeDetector(nn.Module):
    """Fixed-kernel differentiable edge operator.

    Grayscale Sobel magnitude, normalized by the maximum attainable response,
    then sharpened through the smooth ramp t -> 1 - (1-t)^3. Kernels are
    buffers, never parameters, so the operator is frozen by construction.
    Input images are NCHW in [-1, 1]; output is Nx1xHxW in [0, 1] with a
    constant image mapping to exactly zero.
    """

    kind = "sobel_surrogate"
    eps = 1e-3

    def __init__(self):
        super().__init__()
        kx = torch.tensor([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
        self.register_buffer("kernel_x", kx.view(1, 1, 3, 3))
        self.register_buffer("kernel_y", kx.t().contiguous().view(1, 1, 3, 3))

    def forward(self, images):
        gray = (images.mean(dim=1, keepdim=True) + 1.0) * 0.5
        gray = F.pad(gray, (1, 1, 1, 1), mode="replicate")  # constant image stays edge-free
        gx = F.conv2d(gray, self.kernel_x.to(images.dtype))
        gy = F.conv2d(gray, self.kernel_y.to(images.dtype))
        mag = torch.sqrt(gx * gx + gy * gy + self.eps ** 2) - self.eps
        t = mag / EDGE_NORM
        return 1.0 - (1.0 - t) ** 3


class FrozenEdgeDetector(nn.Module):
    """Adapter freezing an external edge network behind the same interface."""

    kind = "external_pretrained"

    def __init__(self, module):
        super().__init__()
        self.module = module
        for p in self.module.parameters():
            p.requires_grad_(False)

    def forward(self, images):
        return self.module(images)


def make_edge_detector(kind="sobel_surrogate", module=None):
    if kind == "sobel_surrogate":
        return SobelEdgeDetector()
    if kind == "external_pretrained":
        if module is None:
            raise ValueError("external_pretrained needs a module to wrap")
        return FrozenEdgeDetector(module)
    raise ValueError(f"unknown edge detector kind: {kind!r}")


def derive_seed(*parts):
    """Stable 63-bit seed hashed from the string forms of the parts.

    Used to give every (run seed, epoch, index) its own independent stream so
    parallel and serial example preparation agree.
    """
    text = ":".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def init_parameters(module, seed=None):
    """Truncated normal (std 0.02, +-2 sigma) weights, zero biases.

    Convs flagged with `zero_init` keep all-zero weights (used by the
    conditional skip connections so training starts at exact identity).
    """
    gen = None
    if seed is not None:
        gen = torch.Generator().manual_seed(seed)
    for m in module.modules():
        if isinstance(m, (nn.Conv2d, nn.Linear)):
            if getattr(m, "zero_init", False):
                nn.init.zeros_(m.weight)
            else:
                nn.init.trunc_normal_(m.weight, std=0.02, a=-0.04, b=0.04, generator=gen)
            if m.bias is not None:
                nn.init.zeros_(m.bias)
        elif isinstance(m, (nn.LSTM, nn.LSTMCell)):
            for name, p in m.named_parameters():
                if "weight" in name:
                    nn.init.trunc_normal_(p, std=0.02, a=-0.04, b=0.04, generator=gen)
                else:
                    nn.init.zeros_(p)
    return module
