"""Differentiable transmit/channel/receive chain over the autodiff engine.

Mirrors the plain-numpy operations in ofdm.py with complex values carried as
a trailing real/imag pair, so end-to-end training can backpropagate through
modulation, the tapped-delay channel, and demodulation. Running it on
constant inputs builds no graph and doubles as the evaluation fast path.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from . import numgrad as ng
from .constellation import bits_to_indices
from .neuralrx import c2r
from .ofdm import GridConfig, cp_insert_matrix, cp_remove_matrix, dft_matrix
from .pilots import PilotPattern


@lru_cache(maxsize=None)
def _chain_matrices(cfg: GridConfig):
    idft = dft_matrix(cfg.n_subcarriers).conj().T
    tx = cp_insert_matrix(cfg) @ idft  # (blk, n_S): IDFT then CP insertion
    rx = dft_matrix(cfg.n_subcarriers) @ cp_remove_matrix(cfg)  # (n_S, blk)
    return tx.astype(np.complex128), rx.astype(np.complex128)


def map_symbols(bits, constellation_view: ng.DiffArray):
    """bits (B, n_D, m) -> symbols (B, n_D, 2) via table lookup."""
    bits = np.asarray(bits)
    idx = bits_to_indices(bits.reshape(bits.shape[0], -1), bits.shape[-1])
    return ng.gather_rows(constellation_view, idx)


def assemble_grid(symbols: ng.DiffArray, pattern: PilotPattern, cfg: GridConfig):
    """Lay data symbols and constant pilots onto the grid: (B, n_S, n_T, 2)."""
    template = c2r(pattern.values.flatten(order="F"))  # (n, 2) pilots, zero on data
    placed = ng.place_rows(symbols, pattern.data_indices, ng.constant(template))
    grid = ng.reshape(placed, (symbols.shape[0], cfg.n_symbols, cfg.n_subcarriers, 2))
    return ng.transpose(grid, (0, 2, 1, 3))


def modulate(grid: ng.DiffArray, cfg: GridConfig):
    """(B, n_S, n_T, 2) -> time-domain samples (B, n_samples, 2)."""
    x = ng.cmatmul(_chain_matrices(cfg)[0], grid)  # (B, blk, n_T, 2)
    x = ng.transpose(x, (0, 2, 1, 3))
    return ng.reshape(x, (grid.shape[0], cfg.n_samples, 2))


def apply_channel(x: ng.DiffArray, taps, noise=None):
    """y_t = sum_i x_{t-i} h_{i,t} (+ noise); taps (B, T, n_taps) complex."""
    taps = np.asarray(taps)
    y = None
    for i in range(taps.shape[2]):
        term = ng.cmul(ng.delay(x, i, axis=1), ng.constant(c2r(taps[:, :, i])))
        y = term if y is None else ng.add(y, term)
    if noise is not None:
        y = ng.add(y, ng.constant(c2r(np.asarray(noise))))
    return y


def demodulate(y: ng.DiffArray, cfg: GridConfig):
    """(B, n_samples, 2) -> post-DFT grid (B, n_S, n_T, 2)."""
    blocks = ng.reshape(y, (y.shape[0], cfg.n_symbols, cfg.samples_per_symbol, 2))
    blocks = ng.transpose(blocks, (0, 2, 1, 3))
    return ng.cmatmul(_chain_matrices(cfg)[1], blocks)


def bit_sign_grid(bits, pattern: PilotPattern, cfg: GridConfig):
    """Per-RE, per-bit +/-1 targets on data REs, 0 elsewhere: (B, n_S, n_T, m)."""
    bits = np.asarray(bits)
    batch, _, m = bits.shape
    signs = np.zeros((batch, cfg.n_elements, m))
    signs[:, pattern.data_indices, :] = 2.0 * bits - 1.0
    signs = signs.reshape(batch, cfg.n_symbols, cfg.n_subcarriers, m)
    return signs.transpose(0, 2, 1, 3)


def total_bce(llrs: ng.DiffArray, bits, pattern: PilotPattern, cfg: GridConfig):
    """Total binary cross-entropy in bits per frame, batch-averaged."""
    signs = bit_sign_grid(bits, pattern, cfg)
    if not np.isfinite(llrs.values[signs != 0.0]).all():
        raise ValueError("non-finite LLR on a data RE")
    per_bit = ng.bce_bits(llrs, signs)
    return ng.div_scalar(ng.array_sum(per_bit), signs.shape[0])


def transmit_frames(bits, constellation_view, pattern, cfg, taps, noise):
    """Full differentiable chain from bits to the post-DFT grid."""
    symbols = map_symbols(bits, constellation_view)
    grid = assemble_grid(symbols, pattern, cfg)
    x = modulate(grid, cfg)
    y = apply_channel(x, taps, noise)
    return demodulate(y, cfg)
