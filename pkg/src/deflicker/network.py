"""Convolutional generator: an encoder-decoder with skip connections.

Fixed architecture: ``depth`` levels of two 3x3 convolutions with leaky-ReLU
(slope 0.2) and 2x average-pool downsampling, widths doubling from
``base_width`` and capped at the deepest level, a bottleneck block at the
deepest width, bilinear 2x upsampling with skip concatenation on the way up,
and a final linear 1x1 convolution.  No normalization layers.  The output is
raw (unclamped); ``out_heads == 2`` stacks a main and a minor prediction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

LEAKY_SLOPE = 0.2


@dataclass(frozen=True)
class GeneratorConfig:
    in_channels: int = 3
    out_heads: int = 1
    base_width: int = 32
    depth: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.in_channels not in (1, 3):
            raise ValueError(f"in_channels must be 1 or 3, got {self.in_channels}")
        if self.out_heads not in (1, 2):
            raise ValueError(f"out_heads must be 1 or 2, got {self.out_heads}")
        if self.base_width < 1:
            raise ValueError(f"base_width must be positive, got {self.base_width}")
        if self.depth < 1:
            raise ValueError(f"depth must be positive, got {self.depth}")

    @property
    def out_channels(self) -> int:
        return self.out_heads * self.in_channels

    def level_widths(self) -> list:
        return [self.base_width * 2 ** i for i in range(self.depth)]


def _block(c_in: int, c_out: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(c_in, c_out, 3, padding=1),
        nn.LeakyReLU(LEAKY_SLOPE),
        nn.Conv2d(c_out, c_out, 3, padding=1),
        nn.LeakyReLU(LEAKY_SLOPE),
    )


class Generator(nn.Module):
    """Frame-to-frame generator; purely functional in parameters and input."""

    def __init__(self, config: GeneratorConfig, dtype: torch.dtype = torch.float32):
        super().__init__()
        self.config = config
        widths = config.level_widths()
        self.encoders = nn.ModuleList()
        c_prev = config.in_channels
        for w in widths:
            self.encoders.append(_block(c_prev, w))
            c_prev = w
        self.bottleneck = _block(widths[-1], widths[-1])
        self.decoders = nn.ModuleList()
        c_prev = widths[-1]
        for w in reversed(widths):
            self.decoders.append(_block(c_prev + w, w))
            c_prev = w
        self.head = nn.Conv2d(widths[0], config.out_channels, 1)
        self.to(dtype)
        self._reset_parameters()

    @property
    def dtype(self) -> torch.dtype:
        return self.head.weight.dtype

    def _reset_parameters(self) -> None:
        # Fan-in-scaled zero-mean normals, biases zero; deterministic per seed.
        gen = torch.Generator().manual_seed(self.config.seed)
        gain = 2.0 / (1.0 + LEAKY_SLOPE ** 2)
        for module in self.modules():
            if isinstance(module, nn.Conv2d):
                fan_in = module.in_channels * module.kernel_size[0] * module.kernel_size[1]
                scale = 1.0 if module is self.head else gain
                std = (scale / fan_in) ** 0.5
                init = torch.randn(
                    module.weight.shape, generator=gen, dtype=torch.float64
                ) * std
                with torch.no_grad():
                    module.weight.copy_(init.to(module.weight.dtype))
                    module.bias.zero_()

    def _pad_amounts(self, h: int, w: int):
        factor = 2 ** self.config.depth
        pad_h = (factor - h % factor) % factor
        pad_w = (factor - w % factor) % factor
        return pad_h, pad_w

    def forward(self, x: torch.Tensor):
        """x: (N, C, H, W) -> (main, minor-or-None), raw values, input size."""
        if x.shape[1] != self.config.in_channels:
            raise ValueError(
                f"input has {x.shape[1]} channels, config expects "
                f"{self.config.in_channels}"
            )
        h, w = x.shape[2], x.shape[3]
        pad_h, pad_w = self._pad_amounts(h, w)
        top, left = pad_h // 2, pad_w // 2
        if pad_h or pad_w:
            if pad_h >= h or pad_w >= w:
                raise ValueError(
                    f"input {h}x{w} too small to reflect-pad to a multiple of "
                    f"{2 ** self.config.depth}"
                )
            x = F.pad(x, (left, pad_w - left, top, pad_h - top), mode="reflect")

        skips = []
        for enc in self.encoders:
            x = enc(x)
            skips.append(x)
            x = F.avg_pool2d(x, 2)
        x = self.bottleneck(x)
        for dec, skip in zip(self.decoders, reversed(skips)):
            x = F.interpolate(x, scale_factor=2, mode="bilinear", align_corners=False)
            x = dec(torch.cat([x, skip], dim=1))
        out = self.head(x)
        if pad_h or pad_w:
            out = out[:, :, top:top + h, left:left + w]

        c = self.config.in_channels
        if self.config.out_heads == 2:
            return out[:, :c], out[:, c:]
        return out, None


def init_generator(config: GeneratorConfig, dtype: torch.dtype = torch.float32) -> Generator:
    """Build a generator with deterministic seeded weights."""
    return Generator(config, dtype=dtype)


def parameter_count(gen: Generator) -> int:
    return sum(p.numel() for p in gen.parameters())


def _frame_to_tensor(gen: Generator, frame: np.ndarray) -> torch.Tensor:
    arr = np.asarray(frame, dtype=np.float64)
    if arr.ndim != 3:
        raise ValueError(f"frame must have shape (H, W, C), got {arr.shape}")
    if arr.shape[2] != gen.config.in_channels:
        raise ValueError(
            f"frame has {arr.shape[2]} channels, config expects "
            f"{gen.config.in_channels}"
        )
    return torch.from_numpy(arr.copy()).permute(2, 0, 1).unsqueeze(0).to(gen.dtype)


def _tensor_to_frame(t: torch.Tensor) -> np.ndarray:
    return t.detach()[0].permute(1, 2, 0).numpy().astype(np.float64)


def forward_frame(gen: Generator, frame: np.ndarray):
    """Run one frame through the generator.

    Returns (main, minor) as (H, W, C) float arrays of raw values; minor is
    None for single-head configs.
    """
    with torch.no_grad():
        main, minor = gen(_frame_to_tensor(gen, frame))
    return _tensor_to_frame(main), None if minor is None else _tensor_to_frame(minor)


def loss_gradient(gen: Generator, frame: np.ndarray, loss_fn) -> dict:
    """Gradient of loss_fn(main, minor) with respect to every parameter.

    loss_fn receives the raw forward tensors and must return a finite scalar
    tensor.  The result maps parameter names to arrays shaped like the
    parameters; a loss that does not depend on them yields zero gradients.
    """
    gen.zero_grad(set_to_none=True)
    main, minor = gen(_frame_to_tensor(gen, frame))
    loss = loss_fn(main, minor)
    if not torch.is_tensor(loss) or loss.dim() != 0:
        raise ValueError("loss_fn must return a scalar tensor")
    if not torch.isfinite(loss):
        raise ValueError(f"loss is non-finite: {loss.item()}")
    if loss.grad_fn is not None:
        loss.backward()
    grads = {}
    for name, param in gen.named_parameters():
        if param.grad is None:
            grads[name] = np.zeros(tuple(param.shape), dtype=np.float64)
        else:
            grads[name] = param.grad.detach().numpy().astype(np.float64)
    gen.zero_grad(set_to_none=True)
    return grads


def save_checkpoint(gen: Generator, path) -> None:
    """Self-describing container: layer-name arrays plus the config as JSON.

    Written as an npz with zeroed zip timestamps so identical parameters
    produce byte-identical files.
    """
    import io
    import zipfile

    arrays = {name: t.detach().numpy() for name, t in gen.state_dict().items()}
    arrays["__config__"] = np.frombuffer(
        json.dumps(asdict(gen.config)).encode("utf-8"), dtype=np.uint8
    )
    path = str(path)
    if not path.endswith(".npz"):
        path += ".npz"
    with zipfile.ZipFile(path, "w", zipfile.ZIP_STORED) as zf:
        for name, arr in arrays.items():
            buf = io.BytesIO()
            np.save(buf, arr)
            info = zipfile.ZipInfo(name + ".npy", date_time=(1980, 1, 1, 0, 0, 0))
            zf.writestr(info, buf.getvalue())


def load_checkpoint(path) -> Generator:
    with np.load(path) as data:
        config = GeneratorConfig(**json.loads(bytes(data["__config__"]).decode("utf-8")))
        state = {k: torch.from_numpy(data[k]) for k in data.files if k != "__config__"}
    gen = Generator(config, dtype=state["head.weight"].dtype)
    gen.load_state_dict(state)
    return gen
