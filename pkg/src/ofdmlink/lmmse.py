"""Whole-frame LMMSE estimation of the single-tap channel coefficients.

The estimator treats the frequency-domain channel as diagonal (no ICI),
estimates the full-frame coefficient vector from pilot observations using an
empirically fitted covariance, and reports the estimation-error covariance
alongside the estimate.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .numgrad import load_complex, save_complex
from .ofdm import GridConfig, effective_channel_diagonal, vec
from .pilots import PilotPattern


class EstimationError(RuntimeError):
    """Estimator linear system could not be solved; message carries conditioning info."""


@dataclass
class CovarianceModel:
    """Empirical covariance of the single-tap coefficient vector (zero mean)."""

    matrix: np.ndarray
    frames_used: int

    def __post_init__(self):
        asym = np.abs(self.matrix - self.matrix.conj().T).max()
        if asym > 1e-9:
            raise ValueError(f"covariance not Hermitian (max asymmetry {asym:.2e})")

    def eigenvalue_floor(self):
        return float(np.linalg.eigvalsh(self.matrix).min())


def fit_covariance(realizations, cfg: GridConfig) -> CovarianceModel:
    """Average g g^H over exact channel diagonals extracted per frame.

    Rayleigh taps make g zero-mean, so no mean term is subtracted. Fewer
    frames than matrix dimension yields a rank-deficient estimate; warn.
    """
    n = cfg.n_elements
    acc = np.zeros((n, n), dtype=np.complex128)
    count = 0
    for real in realizations:
        g = effective_channel_diagonal(real.taps, cfg)
        acc += np.outer(g, g.conj())
        count += 1
    if count == 0:
        raise ValueError("fit_covariance needs at least one frame")
    if count < n:
        warnings.warn(f"covariance fit from {count} frames for dimension {n}; "
                      "estimate will be rank deficient", stacklevel=2)
    matrix = acc / count
    matrix = 0.5 * (matrix + matrix.conj().T)
    return CovarianceModel(matrix=matrix, frames_used=count)


def save_covariance(path, model: CovarianceModel):
    save_complex(path, {"covariance": model.matrix, "frames_used": np.array(float(model.frames_used))})


def load_covariance(path) -> CovarianceModel:
    data = load_complex(path)
    return CovarianceModel(matrix=data["covariance"], frames_used=int(data["frames_used"].item()))


class LmmseEstimator:
    """Precomputed LMMSE gain and error covariance for one (pattern, noise) pair.

    Solves are done through a Cholesky factorization of the pilot-domain
    system; no explicit inverse is formed.
    """

    def __init__(self, model: CovarianceModel, pattern: PilotPattern, noise_variance: float):
        if pattern.n_pilots < 1:
            raise ValueError("LMMSE estimation needs at least one pilot")
        pil = pattern.pilot_indices
        p = pattern.pilot_values_vec
        r = model.matrix
        cross = r[:, pil] * p.conj()[None, :]  # R D^H Pi^H
        inner = (p[:, None] * r[np.ix_(pil, pil)] * p.conj()[None, :]
                 + noise_variance * np.eye(pil.size))
        try:
            cho = scipy.linalg.cho_factor(inner)
            self.gain = scipy.linalg.cho_solve(cho, cross.conj().T).conj().T
        except (scipy.linalg.LinAlgError, np.linalg.LinAlgError) as exc:
            cond = np.linalg.cond(inner)
            raise EstimationError(
                f"pilot-domain system singular (condition number {cond:.3e}, "
                f"noise variance {noise_variance:.3e}); covariance may be rank deficient"
            ) from exc
        self.error_cov = r - self.gain @ cross.conj().T
        self.noise_variance = noise_variance
        self.pattern = pattern

    def estimate(self, z_grid):
        """Estimate the full-frame coefficient vector from the received grid."""
        z_p = vec(z_grid)[self.pattern.pilot_indices]
        return self.gain @ z_p


def lmmse_estimate(z_grid, pattern: PilotPattern, model: CovarianceModel, noise_variance: float):
    """One-shot interface returning (estimate, error covariance)."""
    est = LmmseEstimator(model, pattern, noise_variance)
    return est.estimate(z_grid), est.error_cov
