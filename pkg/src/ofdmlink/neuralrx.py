"""Convolutional residual receiver mapping the post-DFT grid to bit LLRs.

Input conv -> 4 pre-activation residual blocks of separable dilated
convolutions -> 1x1 output conv with one channel per bit. Zero padding keeps
spatial dimensions; dilations widen the receptive field across subcarriers
and OFDM symbols. Blocks use ReLU and no normalization layers.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import numgrad as ng


@dataclass(frozen=True)
class NeuralRxConfig:
    width: int = 32  # 256 reproduces the full-scale receiver
    bits_per_re: int = 4
    input_kernel: tuple = (3, 3)
    input_dilation: tuple = (1, 1)
    block_kernel: tuple = (3, 3)
    block_dilations: tuple = ((3, 1), (6, 2), (6, 2), (3, 1))

    def to_dict(self):
        d = asdict(self)
        d["block_dilations"] = [list(b) for b in self.block_dilations]
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        for key in ("input_kernel", "input_dilation", "block_kernel"):
            if key in d:
                d[key] = tuple(d[key])
        if "block_dilations" in d:
            d["block_dilations"] = tuple(tuple(b) for b in d["block_dilations"])
        return cls(**d)


def _he_uniform(rng, shape, fan_in):
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape)


def init_params(cfg: NeuralRxConfig, seed, zero_output=True, trainable=True):
    """He-uniform kernels, zero biases; the output conv kernel starts at zero
    so an untrained receiver emits all-zero (uninformative) LLRs."""
    rng = np.random.default_rng(seed)
    kh, kw = cfg.input_kernel
    bh, bw = cfg.block_kernel
    w = cfg.width
    params = {
        "input.kernel": _he_uniform(rng, (kh, kw, 2, w), kh * kw * 2),
        "input.bias": np.zeros(w),
    }
    for i in range(len(cfg.block_dilations)):
        for j in (1, 2):
            params[f"block{i}.conv{j}.depthwise"] = _he_uniform(rng, (bh, bw, w), bh * bw)
            params[f"block{i}.conv{j}.pointwise"] = _he_uniform(rng, (w, w), w)
            params[f"block{i}.conv{j}.bias"] = np.zeros(w)
    params["output.kernel"] = (np.zeros((w, cfg.bits_per_re)) if zero_output
                               else _he_uniform(rng, (w, cfg.bits_per_re), w))
    params["output.bias"] = np.zeros(cfg.bits_per_re)
    return {name: ng.leaf(v, requires_grad=trainable) for name, v in params.items()}


def forward(grid_2ch: ng.DiffArray, params, cfg: NeuralRxConfig) -> ng.DiffArray:
    """Receiver forward pass: (B, n_S, n_T, 2) -> (B, n_S, n_T, m) LLRs."""
    if grid_2ch.ndim != 4 or grid_2ch.shape[-1] != 2:
        raise ng.ShapeError(f"expected (batch, n_S, n_T, 2) input, got {grid_2ch.shape}")
    x = ng.conv2d(grid_2ch, params["input.kernel"], cfg.input_dilation, bias=params["input.bias"])
    for i, dilation in enumerate(cfg.block_dilations):
        h = ng.relu(x)
        h = ng.conv2d_separable(h, params[f"block{i}.conv1.depthwise"],
                                params[f"block{i}.conv1.pointwise"], dilation,
                                bias=params[f"block{i}.conv1.bias"])
        h = ng.relu(h)
        h = ng.conv2d_separable(h, params[f"block{i}.conv2.depthwise"],
                                params[f"block{i}.conv2.pointwise"], dilation,
                                bias=params[f"block{i}.conv2.bias"])
        x = ng.add(x, h)
    return ng.pointwise_mix(x, params["output.kernel"], bias=params["output.bias"])


def c2r(grid):
    """Complex grid -> trailing real/imag channel pair."""
    grid = np.asarray(grid)
    return np.stack([grid.real, grid.imag], axis=-1)


def r2c(grid_2ch):
    grid_2ch = np.asarray(grid_2ch)
    return grid_2ch[..., 0] + 1j * grid_2ch[..., 1]


def run_inference(grid, params, cfg: NeuralRxConfig):
    """LLRs for one complex grid (n_S, n_T) or a batch (B, n_S, n_T); no graph."""
    grid = np.asarray(grid)
    single = grid.ndim == 2
    x = c2r(grid[None] if single else grid)
    frozen = {name: ng.constant(p.values) for name, p in params.items()}
    out = forward(ng.constant(x), frozen, cfg).values
    return out[0] if single else out
