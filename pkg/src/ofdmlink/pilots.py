"""Pilot patterns: NR-style DMRS layouts on one or two OFDM symbols."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ofdm import GridConfig

PATTERN_SYMBOLS = {"1P": (2,), "2P": (2, 11), "none": ()}
PILOT_VALUE_SEED = 0x0FD5


@dataclass(frozen=True)
class PilotPattern:
    pattern_id: str
    values: np.ndarray  # (n_S, n_T) complex, zero on data REs

    def __post_init__(self):
        nonzero = self.values != 0
        mags = np.abs(self.values[nonzero])
        if mags.size and not np.allclose(mags, 1.0, atol=1e-12):
            raise ValueError("pilot values must have unit modulus")

    @property
    def pilot_mask(self):
        return self.values != 0

    @property
    def data_mask(self):
        return self.values == 0

    @property
    def n_pilots(self):
        return int(np.count_nonzero(self.values))

    @property
    def pilot_indices(self):
        """Flat vec-order (column-stacked) indices of pilot REs, sorted."""
        return np.flatnonzero(self.pilot_mask.flatten(order="F"))

    @property
    def data_indices(self):
        return np.flatnonzero(self.data_mask.flatten(order="F"))

    @property
    def pilot_values_vec(self):
        return self.values.flatten(order="F")[self.pilot_indices]


def make_pattern(pattern_id, cfg: GridConfig, stride=2, offset=0, seed=PILOT_VALUE_SEED) -> PilotPattern:
    """Build a pilot pattern: every `stride`-th subcarrier (from `offset`) on
    the pattern's OFDM symbols, filled with seeded unit-modulus QPSK."""
    if pattern_id not in PATTERN_SYMBOLS:
        raise ValueError(f"unknown pilot pattern {pattern_id!r}; expected one of {sorted(PATTERN_SYMBOLS)}")
    values = np.zeros((cfg.n_subcarriers, cfg.n_symbols), dtype=np.complex128)
    symbols = [s for s in PATTERN_SYMBOLS[pattern_id] if s < cfg.n_symbols]
    rng = np.random.default_rng(seed)
    for sym in symbols:
        rows = np.arange(offset, cfg.n_subcarriers, stride)
        phases = rng.integers(0, 4, size=rows.size)
        values[rows, sym] = np.exp(1j * (np.pi / 4.0 + np.pi / 2.0 * phases))
    return PilotPattern(pattern_id=pattern_id, values=values)
