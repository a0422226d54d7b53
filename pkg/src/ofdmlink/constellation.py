"""Constellation geometry, bit labels, and bit-to-symbol mapping.

A constellation is an array of 2^m complex points; the bit label of point p
is the m-bit big-endian binary representation of its index. Geometry moves
during training while the index-to-label map stays fixed, which is
equivalent to learning geometry and labeling jointly (any labeling can be
realized by permuting point positions).
"""

from __future__ import annotations

import numpy as np

from . import numgrad as ng


class DegenerateConstellationError(ValueError):
    """All raw points (nearly) identical; normalization undefined."""


def point_labels(m):
    """(2^m, m) array of bit labels, MSB first."""
    idx = np.arange(2 ** m)
    shifts = np.arange(m - 1, -1, -1)
    return ((idx[:, None] >> shifts[None, :]) & 1).astype(np.uint8)


def _gray_to_position(codes):
    """Inverse binary-reflected Gray code."""
    pos = np.asarray(codes).copy()
    shift = 1
    while True:
        shifted = pos >> shift
        if not shifted.any():
            return pos
        pos = pos ^ shifted
        shift *= 2


def qam_points(m):
    """Gray-labeled square QAM with unit average power.

    The first m/2 index bits select the in-phase level, the rest the
    quadrature level; bits are the Gray code of the level position, so
    neighboring levels differ in exactly one bit.
    """
    if m == 1:
        return np.array([1.0 + 0.0j, -1.0 + 0.0j])
    if m % 2:
        raise ValueError(f"square QAM needs an even number of bits, got m={m}")
    half = m // 2
    n_levels = 2 ** half
    idx = np.arange(2 ** m)
    i_pos = _gray_to_position(idx >> half)
    q_pos = _gray_to_position(idx & (n_levels - 1))
    levels = 2.0 * np.arange(n_levels) - (n_levels - 1)
    pts = levels[i_pos] + 1j * levels[q_pos]
    return pts / np.sqrt(np.mean(np.abs(pts) ** 2))


def normalize_points(points):
    """Center to zero mean and scale to unit average power (plain ndarray)."""
    points = np.asarray(points, dtype=np.complex128)
    mean = points.mean()
    spread = np.mean(np.abs(points) ** 2) - np.abs(mean) ** 2
    if np.sqrt(max(spread, 0.0)) < 1e-12:
        raise DegenerateConstellationError("constellation points are (nearly) identical")
    return (points - mean) / np.sqrt(spread)


def normalize_raw(raw: ng.DiffArray) -> ng.DiffArray:
    """Differentiable centering + unit-power normalization of raw points.

    raw has shape (2^m, 2); the output is the constellation actually used on
    the air interface. Centering forces zero mean, so no superimposed pilot
    can be learned.
    """
    spread = float(np.mean(np.sum(raw.values ** 2, axis=1)) - np.sum(np.mean(raw.values, axis=0) ** 2))
    if np.sqrt(max(spread, 0.0)) < 1e-12:
        raise DegenerateConstellationError("constellation points are (nearly) identical")
    mean = ng.mean_axis0(raw)
    centered = ng.sub(raw, mean)
    power = ng.mean(ng.cabs2(centered))
    inv_std = ng.exp(ng.scale(ng.log(power), -0.5))
    return ng.mul(centered, inv_std)


def points_to_raw(points):
    """Complex points -> (2^m, 2) real array (training parameter layout)."""
    points = np.asarray(points, dtype=np.complex128)
    return np.stack([points.real, points.imag], axis=-1)


def raw_to_points(raw_values):
    raw_values = np.asarray(raw_values)
    return raw_values[..., 0] + 1j * raw_values[..., 1]


class Constellation:
    """Trainable raw points plus their normalized (transmitted) view."""

    def __init__(self, raw_points, trainable=False):
        raw = points_to_raw(raw_points) if np.iscomplexobj(raw_points) else np.asarray(raw_points, float)
        if raw.ndim != 2 or raw.shape[1] != 2 or raw.shape[0] & (raw.shape[0] - 1):
            raise ValueError(f"need (2^m, 2) raw points, got shape {raw.shape}")
        self.raw = ng.leaf(raw, requires_grad=trainable)
        self.bits_per_symbol = int(np.log2(raw.shape[0]))

    @classmethod
    def qam(cls, m, trainable=False):
        return cls(qam_points(m), trainable=trainable)

    @property
    def trainable(self):
        return self.raw.requires_grad

    def normalized(self) -> ng.DiffArray:
        return normalize_raw(self.raw)

    def points(self):
        """Normalized points as a plain complex array (no graph)."""
        return raw_to_points(normalize_raw(ng.constant(self.raw.values)).values)

    @property
    def labels(self):
        return point_labels(self.bits_per_symbol)


def bits_to_indices(bits, m):
    """Group consecutive m-bit words (MSB first) into point indices."""
    bits = np.asarray(bits)
    if bits.shape[-1] % m:
        raise ValueError(f"bit count {bits.shape[-1]} not a multiple of m={m}")
    words = bits.reshape(bits.shape[:-1] + (-1, m))
    weights = 1 << np.arange(m - 1, -1, -1)
    return (words * weights).sum(axis=-1)


def map_bits(bits, points):
    """Map a flat bit vector onto constellation symbols (numpy path)."""
    points = np.asarray(points)
    m = int(np.log2(points.shape[0]))
    return points[bits_to_indices(bits, m)]
