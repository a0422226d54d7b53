"""Resource-grid algebra: CP insertion/removal, unitary (I)DFT modulation,
time-domain channel application, and the effective frequency-domain channel
matrix with its single-tap/interference split.

Vectorization convention: vec() stacks grid columns (OFDM symbols), so the
resource element on subcarrier i of symbol t has flat index t*n_subcarriers+i.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np


class ResourceLimitError(RuntimeError):
    """Dense effective-channel construction refused for oversized frames."""


@dataclass(frozen=True)
class GridConfig:
    n_subcarriers: int = 72
    n_symbols: int = 14
    cp_length: int = 6

    def __post_init__(self):
        if self.n_subcarriers < 1 or self.n_symbols < 1:
            raise ValueError(f"grid dimensions must be positive, got {self}")
        if not 0 <= self.cp_length < self.n_subcarriers:
            raise ValueError(f"cp_length must be in [0, n_subcarriers), got {self}")

    @property
    def n_elements(self):
        return self.n_subcarriers * self.n_symbols

    @property
    def samples_per_symbol(self):
        return self.n_subcarriers + self.cp_length

    @property
    def n_samples(self):
        return self.n_symbols * self.samples_per_symbol


@dataclass
class ResourceGrid:
    """Complex n_S x n_T symbol matrix with a per-entry data/pilot flag."""

    symbols: np.ndarray
    data_mask: np.ndarray  # True where the RE carries data

    def __post_init__(self):
        self.symbols = np.asarray(self.symbols, dtype=np.complex128)
        self.data_mask = np.asarray(self.data_mask, dtype=bool)
        if self.symbols.shape != self.data_mask.shape:
            raise ValueError(f"symbols {self.symbols.shape} and mask {self.data_mask.shape} differ")


def vec(grid_values):
    """Column-stack an (n_S, n_T) matrix into a length-n vector."""
    return np.asarray(grid_values).flatten(order="F")


def unvec(v, cfg: GridConfig):
    return np.asarray(v).reshape((cfg.n_subcarriers, cfg.n_symbols), order="F")


@lru_cache(maxsize=None)
def dft_matrix(n):
    """Unitary DFT matrix of size n."""
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n) / np.sqrt(n)


def cp_insert_matrix(cfg: GridConfig):
    """(n_S+n_CP) x n_S operator prepending the last n_CP samples."""
    n_s, n_cp = cfg.n_subcarriers, cfg.cp_length
    top = np.zeros((n_cp, n_s))
    top[:, n_s - n_cp:] = np.eye(n_cp)
    return np.vstack([top, np.eye(n_s)])


def cp_remove_matrix(cfg: GridConfig):
    """n_S x (n_S+n_CP) operator dropping the first n_CP samples."""
    n_s, n_cp = cfg.n_subcarriers, cfg.cp_length
    return np.hstack([np.zeros((n_s, n_cp)), np.eye(n_s)])


def modulate(grid: ResourceGrid, cfg: GridConfig):
    """Unitary IDFT per OFDM symbol, then CP insertion; columns concatenated."""
    s = grid.symbols
    if s.shape != (cfg.n_subcarriers, cfg.n_symbols):
        raise ValueError(f"grid shape {s.shape} does not match {cfg}")
    x = np.fft.ifft(s, axis=0, norm="ortho")
    if cfg.cp_length:
        x = np.vstack([x[-cfg.cp_length:], x])
    return x.flatten(order="F")


def demodulate(samples, cfg: GridConfig):
    """CP removal and unitary DFT per OFDM symbol; inverse of modulate."""
    samples = np.asarray(samples)
    if samples.shape != (cfg.n_samples,):
        raise ValueError(f"expected {cfg.n_samples} samples, got {samples.shape}")
    y = samples.reshape((cfg.samples_per_symbol, cfg.n_symbols), order="F")
    return np.fft.fft(y[cfg.cp_length:], axis=0, norm="ortho")


def apply_channel(samples, taps, noise_variance=0.0, rng=None):
    """Tapped-delay-line channel: y_t = sum_i x_{t-i} h_{i,t} + w_t.

    taps has shape (n_samples, n_taps) with h_{i,t} = taps[t, i]; samples
    before t=0 are zero (frame-initial transient). Noise is circularly
    symmetric complex Gaussian with total variance noise_variance, drawn
    from the caller's random stream.
    """
    x = np.asarray(samples, dtype=np.complex128)
    taps = np.asarray(taps, dtype=np.complex128)
    if taps.ndim != 2 or taps.shape[0] < x.shape[0]:
        raise ValueError(f"tap matrix {taps.shape} shorter than sample stream {x.shape}")
    n = x.shape[0]
    y = np.zeros(n, dtype=np.complex128)
    for i in range(taps.shape[1]):
        y[i:] += x[: n - i] * taps[i:n, i]
    if noise_variance > 0.0:
        if rng is None:
            raise ValueError("noise requested but no random stream supplied")
        w = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        y += np.sqrt(noise_variance / 2.0) * w
    return y


def time_domain_matrix(taps, n_total):
    """Banded n_total-square matrix with y = H x for the tapped-delay channel."""
    taps = np.asarray(taps, dtype=np.complex128)
    h = np.zeros((n_total, n_total), dtype=np.complex128)
    for i in range(taps.shape[1]):
        t = np.arange(i, n_total)
        h[t, t - i] = taps[t, i]
    return h


@dataclass
class EffectiveChannel:
    """Frequency-domain channel matrix with its diagonal/interference split."""

    matrix: np.ndarray
    diagonal: np.ndarray = field(init=False)
    interference: np.ndarray = field(init=False)

    def __post_init__(self):
        self.diagonal = np.diagonal(self.matrix).copy()
        self.interference = self.matrix - np.diag(self.diagonal)

    def off_diagonal_fraction(self):
        total = np.linalg.norm(self.matrix)
        return float(np.linalg.norm(self.interference) / total) if total else 0.0


MAX_DENSE_ELEMENTS = 4096


def build_effective_channel(taps, cfg: GridConfig) -> EffectiveChannel:
    """Dense effective channel: demodulate . time-channel . modulate.

    Built blockwise from the banded time-domain matrix; intended for
    verification and covariance fitting, not the simulation fast path.
    """
    n = cfg.n_elements
    if n > MAX_DENSE_ELEMENTS:
        raise ResourceLimitError(f"dense channel for n={n} exceeds the {MAX_DENSE_ELEMENTS} guard")
    taps = np.asarray(taps, dtype=np.complex128)
    if taps.shape[0] < cfg.n_samples:
        raise ValueError(f"taps cover {taps.shape[0]} samples, frame needs {cfg.n_samples}")
    blk = cfg.samples_per_symbol
    n_sym = cfg.n_symbols
    front = dft_matrix(cfg.n_subcarriers) @ cp_remove_matrix(cfg)  # n_S x blk
    back = cp_insert_matrix(cfg) @ dft_matrix(cfg.n_subcarriers).conj().T  # blk x n_S
    h_time = time_domain_matrix(taps, cfg.n_samples)
    h_blocks = h_time.reshape(n_sym, blk, n_sym, blk)
    # taps reach back at most one symbol block, so H is block lower bidiagonal
    reach = -(-(taps.shape[1] - 1) // blk) if taps.shape[1] > 1 else 0
    g = np.zeros((n_sym, cfg.n_subcarriers, n_sym, cfg.n_subcarriers), dtype=np.complex128)
    for t_out in range(n_sym):
        for t_in in range(max(0, t_out - reach), t_out + 1):
            g[t_out, :, t_in, :] = front @ h_blocks[t_out, :, t_in, :] @ back
    return EffectiveChannel(np.ascontiguousarray(g.reshape(n, n)))


def effective_channel_diagonal(taps, cfg: GridConfig):
    """Single-tap coefficients (the diagonal of the effective channel) only.

    Much cheaper than the dense build: the diagonal involves only the
    block-diagonal portion of the time-domain matrix.
    """
    taps = np.asarray(taps, dtype=np.complex128)
    if taps.shape[0] < cfg.n_samples:
        raise ValueError(f"taps cover {taps.shape[0]} samples, frame needs {cfg.n_samples}")
    blk = cfg.samples_per_symbol
    front = dft_matrix(cfg.n_subcarriers) @ cp_remove_matrix(cfg)
    back = cp_insert_matrix(cfg) @ dft_matrix(cfg.n_subcarriers).conj().T
    out = np.empty(cfg.n_elements, dtype=np.complex128)
    for t in range(cfg.n_symbols):
        block = time_domain_matrix(taps[t * blk:(t + 1) * blk], blk)
        out[t * cfg.n_subcarriers:(t + 1) * cfg.n_subcarriers] = np.einsum(
            "aj,jk,ka->a", front, block, back, optimize=True
        )
    return out
