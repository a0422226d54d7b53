"""Gaussian soft demapper: exact log-sum-exp bit LLRs per data RE.

Sign convention used throughout the repo: a positive LLR favors bit = 1
(the numerator sums over the points whose label has that bit set).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .constellation import point_labels
from .ofdm import vec


@dataclass
class LlrTensor:
    """Per-RE, per-bit LLRs with a mask of the REs where they are defined."""

    values: np.ndarray  # (n_S, n_T, m) float64, zero where undefined
    data_mask: np.ndarray  # (n_S, n_T) bool

    def __post_init__(self):
        if self.values.shape[:2] != self.data_mask.shape:
            raise ValueError(f"LLR shape {self.values.shape} vs mask {self.data_mask.shape}")
        if not np.isfinite(self.values[self.data_mask]).all():
            raise ValueError("non-finite LLR on a data RE")

    def data_llrs(self):
        """LLRs of data REs flattened in vec (column-stacked) order."""
        flat = self.values.reshape(-1, self.values.shape[2], order="F")
        mask = self.data_mask.flatten(order="F")
        return flat[mask]


def gaussian_demap(z_grid, g_hat, error_var, noise_variance, points, data_mask) -> LlrTensor:
    """Exact soft demapping under a Gaussian residual assumption.

    z_grid: received (n_S, n_T) grid after the DFT; g_hat: length-n estimated
    single-tap coefficients (vec order); error_var: per-RE estimation-error
    variance (diagonal of the error covariance; scalar 0 for perfect CSI).
    The effective noise power per RE is error_var + noise_variance.
    """
    z_grid = np.asarray(z_grid)
    n_s, n_t = z_grid.shape
    points = np.asarray(points)
    m = int(np.log2(points.size))
    labels = point_labels(m).astype(bool)

    z = vec(z_grid)
    g = np.asarray(g_hat, dtype=np.complex128).reshape(-1)
    ev = np.broadcast_to(np.asarray(error_var, dtype=np.float64), z.shape)
    mask_vec = np.asarray(data_mask, dtype=bool).flatten(order="F")

    sigma_eff = ev[mask_vec] + noise_variance
    if np.any(sigma_eff <= 0.0):
        k = int(np.flatnonzero(sigma_eff <= 0.0)[0])
        raise ValueError(f"effective noise power must be positive, got {sigma_eff[k]!r} on a data RE")

    dist = np.abs(z[mask_vec, None] - g[mask_vec, None] * points[None, :]) ** 2
    metric = -dist / sigma_eff[:, None]
    llrs = np.empty((metric.shape[0], m))
    for i in range(m):
        llrs[:, i] = logsumexp(metric[:, labels[:, i]], axis=1) - logsumexp(metric[:, ~labels[:, i]], axis=1)

    full = np.zeros((n_s * n_t, m))
    full[mask_vec] = llrs
    values = full.reshape((n_s, n_t, m), order="F")
    return LlrTensor(values=values, data_mask=np.asarray(data_mask, dtype=bool))
