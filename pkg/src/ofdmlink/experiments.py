"""Desk-scale trend experiment: LMMSE mobility degradation and the goodput
gain of the pilot/CP-free scheme at matched BER operating points.

This is the long-running study (hours: two 20k-iteration trainings plus
Monte Carlo evaluation). The runnable entry point is scripts/run_trend.py;
the acceptance suite calls the same function under the `slow` marker.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .channel import ChannelRealization, MobilityProfile, generate_batch
from .fec import load_builtin_code
from .harness import Evaluator, evaluate, write_results
from .lmmse import fit_covariance, load_covariance, save_covariance
from .metrics import scheme_preset
from .training import TrainingConfig, train


@dataclass
class TrendConfig:
    out_dir: str = "trend_out"
    iterations: int = 20000
    batch_frames: int = 32
    width: int = 32
    pilot_pattern: str = "1P"
    train_seed: int = 11
    covariance_frames: int = 1500
    covariance_seed: int = 21
    eval_frames: int = 300
    eval_seed: int = 77
    max_frame_errors: int = 150
    lmmse_speeds_kmh: tuple = (3.6, 108.0)
    lmmse_ebn0_grid_db: tuple = (6.0, 8.0, 10.0, 12.0)
    matched_speed_kmh: float = 36.0
    esn0_grid_db: tuple = (4.0, 6.0, 8.0, 10.0, 12.0, 14.0, 16.0)
    gs_checkpoint: str | None = None   # reuse an existing training run
    nrx_checkpoint: str | None = None


@dataclass
class TrendReport:
    lmmse_rows: list
    gs_rows: list
    nrx_rows: list
    matched_ber: float | None
    goodput_gain: float | None
    structural_gain: float
    lmmse_degrades_with_speed: bool
    gain_meets_structural: bool
    elapsed_s: float
    gs_esn0_db: float | None = None
    nrx_esn0_db: float | None = None
    paths: dict = field(default_factory=dict)

    @property
    def passed(self):
        return self.lmmse_degrades_with_speed and self.gain_meets_structural


def trend_training_config(cfg: TrendConfig, scheme) -> TrainingConfig:
    return TrainingConfig(
        scheme=scheme, iterations=cfg.iterations, batch_frames=cfg.batch_frames,
        width=cfg.width, pilot_pattern=cfg.pilot_pattern if scheme != "gs" else None,
        seed=cfg.train_seed, checkpoint_every=2000,
        out_dir=str(Path(cfg.out_dir) / f"train-{scheme}"),
    )


def _train_scheme(cfg: TrendConfig, scheme, printer):
    training = trend_training_config(cfg, scheme)
    printer(f"training {scheme}: {cfg.iterations} iterations, batch {cfg.batch_frames}")
    return str(train(training, printer=printer).checkpoint_path)


def _interp_crossing(esn0, ber, target):
    """Es/N0 where the (monotone-smoothed) log-BER curve crosses target."""
    esn0 = np.asarray(esn0, dtype=float)
    ber = np.maximum.accumulate(np.asarray(ber, dtype=float)[::-1])[::-1]  # enforce monotone
    ber = np.maximum(ber, 1e-12)
    logt = np.log(target)
    logb = np.log(ber)
    for i in range(len(esn0) - 1):
        lo, hi = logb[i + 1], logb[i]
        if hi >= logt >= lo:
            if hi == lo:
                return float(esn0[i])
            frac = (hi - logt) / (hi - lo)
            return float(esn0[i] + frac * (esn0[i + 1] - esn0[i]))
    return None


def matched_ber_comparison(gs_rows, nrx_rows, gs_scheme, nrx_scheme):
    """Pick a BER level both schemes reach and compare goodput there.

    At exactly matched BER the goodput ratio is the data-ratio ratio; the
    measurement checks that both curves actually reach a common level and
    that interpolation confirms the structural gain.
    """
    gs_ber = np.array([r.ber for r in gs_rows])
    nrx_ber = np.array([r.ber for r in nrx_rows])
    lo = max(gs_ber.min(), nrx_ber.min(), 1e-4)
    hi = min(gs_ber.max(), nrx_ber.max(), 0.2)
    if lo >= hi:
        return None, None, None, None
    target = float(np.sqrt(lo * hi))  # geometric midpoint of the common range
    gs_esn0 = _interp_crossing([r.esn0_db for r in gs_rows], gs_ber, target)
    nrx_esn0 = _interp_crossing([r.esn0_db for r in nrx_rows], nrx_ber, target)
    if gs_esn0 is None or nrx_esn0 is None:
        return None, None, None, None
    gp_gs = gs_scheme.code_rate * gs_scheme.data_ratio * gs_scheme.bits_per_re * (1 - target)
    gp_nrx = nrx_scheme.code_rate * nrx_scheme.data_ratio * nrx_scheme.bits_per_re * (1 - target)
    return target, gp_gs / gp_nrx - 1.0, gs_esn0, nrx_esn0


def run_trend_experiment(cfg: TrendConfig, printer=print) -> TrendReport:
    started = time.time()
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    code = load_builtin_code()
    paths = {}

    # LMMSE baseline: fitted covariance, BER vs speed at fixed Eb/N0
    cov_path = out / "covariance.ngrad"
    lmmse_scheme = scheme_preset("lmmse", pattern_id=cfg.pilot_pattern)
    if cov_path.exists():
        model = load_covariance(cov_path)
        printer(f"reusing covariance {cov_path} ({model.frames_used} frames)")
    else:
        printer(f"fitting covariance over {cfg.covariance_frames} frames")
        profile = MobilityProfile(n_subcarriers=lmmse_scheme.n_subcarriers)
        taps, _ = generate_batch(profile, lmmse_scheme.grid.n_samples,
                                 cfg.covariance_frames, cfg.covariance_seed)
        model = fit_covariance(
            (ChannelRealization(taps=taps[i]) for i in range(cfg.covariance_frames)),
            lmmse_scheme.grid)
        save_covariance(cov_path, model)
    paths["covariance"] = str(cov_path)

    lmmse_eval = Evaluator(scheme=lmmse_scheme, code=code, covariance=model)
    lmmse_rows = evaluate(lmmse_eval, cfg.lmmse_speeds_kmh, cfg.eval_frames, cfg.eval_seed,
                          ebn0_grid_db=list(cfg.lmmse_ebn0_grid_db),
                          max_frame_errors=cfg.max_frame_errors, progress=printer)
    paths["lmmse_rows"] = str(out / "lmmse.csv")
    write_results(paths["lmmse_rows"], lmmse_rows, {"experiment": "trend", "part": "lmmse",
                                                    "config": asdict(cfg)})
    low, high = cfg.lmmse_speeds_kmh
    by_speed = {v: sorted([r for r in lmmse_rows if r.speed_kmh == v], key=lambda r: r.ebn0_db)
                for v in (low, high)}
    degrades = all(h.ber > l.ber for l, h in zip(by_speed[low], by_speed[high]))
    printer(f"LMMSE degradation with speed at fixed Eb/N0: {degrades}")

    # end-to-end schemes
    gs_ckpt = cfg.gs_checkpoint or _train_scheme(cfg, "gs", printer)
    nrx_ckpt = cfg.nrx_checkpoint or _train_scheme(cfg, "nrx-cp", printer)
    paths["gs_checkpoint"], paths["nrx_checkpoint"] = gs_ckpt, nrx_ckpt

    gs_scheme = scheme_preset("gs", receiver=gs_ckpt)
    nrx_scheme = scheme_preset("nrx-cp", pattern_id=cfg.pilot_pattern, receiver=nrx_ckpt)
    gs_rows = evaluate(Evaluator(scheme=gs_scheme, code=code),
                       [cfg.matched_speed_kmh], cfg.eval_frames, cfg.eval_seed,
                       esn0_grid_db=list(cfg.esn0_grid_db),
                       max_frame_errors=cfg.max_frame_errors, progress=printer)
    nrx_rows = evaluate(Evaluator(scheme=nrx_scheme, code=code),
                        [cfg.matched_speed_kmh], cfg.eval_frames, cfg.eval_seed,
                        esn0_grid_db=list(cfg.esn0_grid_db),
                        max_frame_errors=cfg.max_frame_errors, progress=printer)
    paths["gs_rows"], paths["nrx_rows"] = str(out / "gs.csv"), str(out / "nrx-cp.csv")
    write_results(paths["gs_rows"], gs_rows, {"experiment": "trend", "part": "gs",
                                              "config": asdict(cfg)})
    write_results(paths["nrx_rows"], nrx_rows, {"experiment": "trend", "part": "nrx-cp",
                                                "config": asdict(cfg)})

    structural = gs_scheme.data_ratio / nrx_scheme.data_ratio - 1.0
    matched, gain, gs_esn0, nrx_esn0 = matched_ber_comparison(gs_rows, nrx_rows,
                                                              gs_scheme, nrx_scheme)
    meets = gain is not None and gain >= structural - 0.02
    printer(f"structural gain {structural:.4f}; matched BER {matched}; gain {gain}; "
            f"operating Es/N0 gs={gs_esn0} nrx-cp={nrx_esn0}")

    report = TrendReport(
        lmmse_rows=lmmse_rows, gs_rows=gs_rows, nrx_rows=nrx_rows,
        matched_ber=matched, goodput_gain=gain, structural_gain=structural,
        lmmse_degrades_with_speed=degrades, gain_meets_structural=meets,
        elapsed_s=time.time() - started, gs_esn0_db=gs_esn0, nrx_esn0_db=nrx_esn0,
        paths=paths,
    )
    summary = {k: v for k, v in asdict(report).items()
               if k not in ("lmmse_rows", "gs_rows", "nrx_rows")}
    (out / "trend_report.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    return report
