"""Monte Carlo evaluation: run a scheme's full chain over an SNR/speed grid
and emit BER/goodput rows.

Seeding is hierarchical (root seed, grid-point index, frame index), so error
counts are reproducible and independent of evaluation order.
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, ofdm
from .channel import MobilityProfile, generate_batch, load_trace
from .constellation import bits_to_indices, qam_points
from .demapper import LlrTensor, gaussian_demap
from .fec import FrameLayout, LdpcCode, bp_decode, frame_pack, frame_unpack
from .lmmse import CovarianceModel, LmmseEstimator
from .metrics import (ResultRow, SchemeConfig, ebn0_db_to_esn0_db, ebn0_db_to_sigma2,
                      esn0_db_to_ebn0_db, esn0_db_to_sigma2, goodput, rows_to_csv)
from .neuralrx import c2r, forward as rx_forward
from .numgrad import constant
from .training import load_checkpoint


class EvaluationSetupError(RuntimeError):
    """Scheme configuration cannot be resolved into runnable components."""


@dataclass
class EvaluationPoint:
    speed_kmh: float
    ebn0_db: float
    esn0_db: float
    noise_variance: float


@dataclass
class Evaluator:
    """Bound components for one scheme: code, layout, constellation, receiver."""

    scheme: SchemeConfig
    code: LdpcCode
    covariance: CovarianceModel | None = None
    profile: MobilityProfile | None = None
    n_taps: int = 5
    channel_kind: str = "jakes"  # "jakes" | "awgn" | path to a tap-trace file
    _rx: tuple | None = field(default=None, repr=False)
    _points: np.ndarray | None = field(default=None, repr=False)
    _trace: list | None = field(default=None, repr=False)

    def __post_init__(self):
        s = self.scheme
        if self.profile is None:
            self.profile = MobilityProfile(n_subcarriers=s.n_subcarriers)
        if self.channel_kind not in ("jakes", "awgn"):
            path = Path(self.channel_kind)
            if not path.exists():
                raise EvaluationSetupError(f"channel trace not found: {path}")
            self._trace = load_trace(path, expected_n_taps=self.n_taps)
            short = [r for r in self._trace if r.n_samples < s.grid.n_samples]
            if short:
                raise EvaluationSetupError(
                    f"trace frames cover {short[0].n_samples} samples, "
                    f"frame needs {s.grid.n_samples}")
        if s.receiver == "lmmse":
            if self.covariance is None:
                raise EvaluationSetupError("LMMSE receiver needs a fitted covariance model")
            if self.covariance.matrix.shape[0] != s.grid.n_elements:
                raise EvaluationSetupError(
                    f"covariance dimension {self.covariance.matrix.shape[0]} does not match "
                    f"frame size {s.grid.n_elements}")
        elif s.receiver == "perfect-csi":
            pass
        elif s.receiver == "checkpoint":
            raise EvaluationSetupError(
                f"scheme {s.scheme_id!r} needs a receiver checkpoint path")
        else:
            path = Path(s.receiver)
            if not path.exists():
                raise EvaluationSetupError(f"receiver checkpoint not found: {path}")
            constellation, params, rx_cfg, meta = load_checkpoint(path)
            if rx_cfg.bits_per_re != s.bits_per_re:
                raise EvaluationSetupError(
                    f"checkpoint emits {rx_cfg.bits_per_re} bits per RE, scheme wants {s.bits_per_re}")
            self._rx = (params, rx_cfg)
            if s.constellation_source == "checkpoint":
                self._points = constellation.points()
        if self._points is None:
            if s.constellation_source != "qam":
                path = Path(s.constellation_source)
                if not path.exists():
                    raise EvaluationSetupError(f"constellation checkpoint not found: {path}")
                self._points = load_checkpoint(path)[0].points()
            else:
                self._points = qam_points(s.bits_per_re)
        self.layout = FrameLayout(code=self.code, n_data_re=s.n_data_re,
                                  bits_per_re=s.bits_per_re)

    @property
    def constellation_points(self):
        return self._points

    def frame_llrs(self, z_grid, g_true, noise_variance, estimator):
        """Receiver front end: per-data-RE LLR vector in frame bit order."""
        s = self.scheme
        pattern = s.pattern()
        if self._rx is not None:
            params, rx_cfg = self._rx
            out = rx_forward(constant(c2r(z_grid)[None]), params, rx_cfg).values[0]
            llrs = LlrTensor(values=out, data_mask=pattern.data_mask)
        elif s.receiver == "perfect-csi":
            llrs = gaussian_demap(z_grid, g_true, 0.0, noise_variance,
                                  self._points, pattern.data_mask)
        else:
            g_hat = estimator.estimate(z_grid)
            llrs = gaussian_demap(z_grid, g_hat, np.real(np.diag(estimator.error_cov)),
                                  noise_variance, self._points, pattern.data_mask)
        return llrs.data_llrs().reshape(-1)

    def run_point(self, point: EvaluationPoint, frames, seed, max_frame_errors=200,
                  point_index=0):
        """Monte Carlo at one (speed, SNR) point; returns a ResultRow.

        Frame seeds derive from (root seed, point index, frame index), so any
        partition of the frames over workers reproduces the same counts.
        """
        s = self.scheme
        grid_cfg = s.grid
        pattern = s.pattern()
        estimator = None
        if s.receiver == "lmmse":
            estimator = LmmseEstimator(self.covariance, pattern, point.noise_variance)

        profile = MobilityProfile(point.speed_kmh, point.speed_kmh, self.profile.carrier_hz,
                                  self.profile.subcarrier_spacing_hz, s.n_subcarriers)
        bit_errors = 0
        frame_errors = 0
        frames_run = 0
        root = np.random.SeedSequence([seed, point_index])
        frame_seeds = root.spawn(frames)
        for f in range(frames):
            rng = np.random.default_rng(frame_seeds[f])
            if self._trace is not None:
                taps = self._trace[f % len(self._trace)].taps  # replayed in file order
            elif self.channel_kind == "awgn":
                taps = np.ones((grid_cfg.n_samples, 1), dtype=np.complex128)
            else:
                taps, _ = generate_batch(profile, grid_cfg.n_samples, 1,
                                         frame_seeds[f].spawn(1)[0], self.n_taps)
                taps = taps[0]
            info = rng.integers(0, 2, size=(self.layout.codewords_per_frame, self.code.k),
                                dtype=np.uint8)
            tx_bits = frame_pack(info, self.layout, rng)
            vec_grid = pattern.values.flatten(order="F").copy()
            symbols = self._points[bits_to_indices(tx_bits, s.bits_per_re)]
            vec_grid[pattern.data_indices] = symbols
            grid = ofdm.ResourceGrid(ofdm.unvec(vec_grid, grid_cfg), pattern.data_mask)
            x = ofdm.modulate(grid, grid_cfg)
            y = ofdm.apply_channel(x, taps, point.noise_variance, rng=rng)
            z = ofdm.demodulate(y, grid_cfg)
            g_true = None
            if s.receiver == "perfect-csi":
                g_true = ofdm.effective_channel_diagonal(taps, grid_cfg)
            llrs = self.frame_llrs(z, g_true, point.noise_variance, estimator)
            per_cw = frame_unpack(llrs, self.layout)
            frame_bad = False
            for c in range(self.layout.codewords_per_frame):
                decoded = bp_decode(self.code, per_cw[c])
                errs = int((self.code.extract_info(decoded.bits) != info[c]).sum())
                bit_errors += errs
                frame_bad = frame_bad or errs > 0
            frames_run += 1
            frame_errors += int(frame_bad)
            if max_frame_errors and frame_errors >= max_frame_errors:
                break
        total_bits = frames_run * self.layout.info_bits_per_frame
        ber = bit_errors / total_bits if total_bits else 0.0
        return ResultRow(
            scheme=s.scheme_id, speed_kmh=point.speed_kmh, esn0_db=point.esn0_db,
            ebn0_db=point.ebn0_db, frames=frames_run, bit_errors=bit_errors,
            ber=ber, goodput=goodput(ber, s), seed=seed,
        )


def make_points(scheme: SchemeConfig, speeds, ebn0_grid_db=None, esn0_grid_db=None):
    if (ebn0_grid_db is None) == (esn0_grid_db is None):
        raise EvaluationSetupError("specify exactly one of the Eb/N0 or Es/N0 grids")
    points = []
    rho, m, r = scheme.data_ratio, scheme.bits_per_re, scheme.code_rate
    for v in speeds:
        if ebn0_grid_db is not None:
            for eb in ebn0_grid_db:
                es = ebn0_db_to_esn0_db(eb, rho, m, r)
                points.append(EvaluationPoint(v, eb, es, ebn0_db_to_sigma2(eb, rho, m, r)))
        else:
            for es in esn0_grid_db:
                points.append(EvaluationPoint(v, esn0_db_to_ebn0_db(es, rho, m, r), es,
                                              esn0_db_to_sigma2(es)))
    return points


def evaluate(evaluator: Evaluator, speeds, frames, seed, ebn0_grid_db=None,
             esn0_grid_db=None, max_frame_errors=200, progress=None):
    """Run the grid and return rows (deterministic for a fixed seed)."""
    rows = []
    for idx, point in enumerate(make_points(evaluator.scheme, speeds, ebn0_grid_db, esn0_grid_db)):
        row = evaluator.run_point(point, frames, seed, max_frame_errors, point_index=idx)
        rows.append(row)
        if progress:
            progress(f"{row.scheme} v={row.speed_kmh:g} km/h Eb/N0={row.ebn0_db:.1f} dB "
                     f"BER={row.ber:.3e} ({row.frames} frames)")
    return rows


def config_hash(payload):
    return hashlib.sha256(json.dumps(payload, sort_keys=True, default=str).encode()).hexdigest()


def write_results(out_path, rows, manifest_payload):
    """CSV rows plus a JSON run manifest (config hash, seed, versions)."""
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(rows_to_csv(rows))
    manifest = {
        "config_hash": config_hash(manifest_payload),
        "config": manifest_payload,
        "versions": {
            "ofdmlink": __version__,
            "numpy": np.__version__,
            "python": sys.version.split()[0],
        },
    }
    manifest_path = out_path.with_suffix(out_path.suffix + ".manifest.json")
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return manifest_path
