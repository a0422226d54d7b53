"""Joint training of the constellation and the neural receiver.

Each iteration draws a batch of frames (fresh speeds, SNRs, bits, channel
realizations), runs the differentiable chain, and applies one Adam step to
the receiver parameters and, for the pilotless scheme, the raw constellation
points. The loss is the batch-averaged total binary cross-entropy in bits
per frame.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import diffpipe, numgrad as ng
from .channel import MobilityProfile, generate_batch
from .constellation import Constellation
from .metrics import DEFAULT_CODE_RATE, ebn0_db_to_sigma2, esn0_db_to_sigma2
from .neuralrx import NeuralRxConfig, forward, init_params
from .ofdm import GridConfig
from .pilots import make_pattern

CHECKPOINT_VERSION = 1

TRAINABLE_SCHEMES = {
    # scheme id: (default pilot pattern, cp length, constellation trainable)
    "gs": ("none", 0, True),
    "nrx-cp": ("1P", 6, False),
    "nrx-nocp": ("1P", 0, False),
}


class TrainingDivergedError(RuntimeError):
    """Loss became non-finite; carries the last good checkpoint path."""

    def __init__(self, message, checkpoint_path):
        super().__init__(message)
        self.checkpoint_path = checkpoint_path


@dataclass
class TrainingConfig:
    scheme: str = "gs"
    iterations: int = 1000
    batch_frames: int = 100
    learning_rate: float = 1e-3
    ebn0_min_db: float = 0.0
    ebn0_max_db: float = 15.0
    esn0_db: float | None = None  # fixed Es/N0 instead of the Eb/N0 range
    speed_min_kmh: float = 0.0
    speed_max_kmh: float = 130.0
    pilot_pattern: str | None = None  # scheme default when None
    width: int = 32
    bits_per_re: int = 4
    n_subcarriers: int = 72
    n_symbols: int = 14
    carrier_hz: float = 3.5e9
    subcarrier_spacing_hz: float = 30e3
    n_taps: int = 5
    channel: str = "jakes"  # "jakes" | "awgn"
    code_rate: float = DEFAULT_CODE_RATE  # enters only the Eb/N0 conversion
    constellation_init: str = "qam"  # "qam" | "random"
    optimizer: str = "adam"
    seed: int = 1
    checkpoint_every: int = 1000
    out_dir: str = "train_out"

    def __post_init__(self):
        if self.scheme not in TRAINABLE_SCHEMES:
            raise ValueError(f"unknown trainable scheme {self.scheme!r}; "
                             f"expected one of {sorted(TRAINABLE_SCHEMES)}")
        if self.iterations < 1 or self.batch_frames < 1:
            raise ValueError("iterations and batch_frames must be positive")

    @property
    def cp_length(self):
        return TRAINABLE_SCHEMES[self.scheme][1]

    @property
    def pattern_id(self):
        return self.pilot_pattern or TRAINABLE_SCHEMES[self.scheme][0]

    @property
    def constellation_trainable(self):
        return TRAINABLE_SCHEMES[self.scheme][2]

    def grid(self) -> GridConfig:
        return GridConfig(self.n_subcarriers, self.n_symbols, self.cp_length)

    def rx_config(self) -> NeuralRxConfig:
        return NeuralRxConfig(width=self.width, bits_per_re=self.bits_per_re)

    def data_ratio(self, n_data_re):
        g = self.grid()
        return n_data_re * g.n_subcarriers / (g.n_elements * g.samples_per_symbol)


@dataclass
class TrainResult:
    checkpoint_path: Path
    trace_path: Path
    losses: list = field(default_factory=list)
    iterations_run: int = 0


def save_checkpoint(path, constellation, rx_params, meta):
    path = Path(path)
    arrays = {name: p.values for name, p in rx_params.items()}
    arrays["constellation.raw"] = constellation.raw.values
    ng.save_arrays(path, arrays)
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(meta, indent=2, sort_keys=True))


def load_checkpoint(path):
    """Returns (constellation, receiver params as constants, rx config, meta)."""
    path = Path(path)
    arrays = ng.load_arrays(path)
    meta = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    if meta.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {meta.get('version')!r}")
    raw = arrays.pop("constellation.raw")
    constellation = Constellation(raw, trainable=False)
    params = {name: ng.constant(values) for name, values in arrays.items()}
    return constellation, params, NeuralRxConfig.from_dict(meta["rx_config"]), meta


def _draw_constellation(cfg: TrainingConfig, rng):
    if cfg.constellation_init == "qam":
        return Constellation.qam(cfg.bits_per_re, trainable=cfg.constellation_trainable)
    pts = (rng.standard_normal(2 ** cfg.bits_per_re)
           + 1j * rng.standard_normal(2 ** cfg.bits_per_re)) / np.sqrt(2)
    return Constellation(pts, trainable=cfg.constellation_trainable)


def _batch_noise_variances(cfg: TrainingConfig, data_ratio, rng):
    if cfg.esn0_db is not None:
        return np.full(cfg.batch_frames, esn0_db_to_sigma2(cfg.esn0_db))
    ebn0 = rng.uniform(cfg.ebn0_min_db, cfg.ebn0_max_db, size=cfg.batch_frames)
    return np.array([ebn0_db_to_sigma2(v, data_ratio, cfg.bits_per_re, cfg.code_rate)
                     for v in ebn0])


def _batch_taps(cfg: TrainingConfig, grid, seed):
    if cfg.channel == "awgn":
        taps = np.ones((cfg.batch_frames, grid.n_samples, 1), dtype=np.complex128)
        return taps
    profile = MobilityProfile(cfg.speed_min_kmh, cfg.speed_max_kmh, cfg.carrier_hz,
                              cfg.subcarrier_spacing_hz, cfg.n_subcarriers)
    taps, _ = generate_batch(profile, grid.n_samples, cfg.batch_frames, seed, cfg.n_taps)
    return taps


def training_step(cfg: TrainingConfig, constellation, rx_params, pattern, grid, step_seed):
    """One forward/backward pass; returns the loss node (gradients populated)."""
    rng = np.random.default_rng(step_seed)
    taps = _batch_taps(cfg, grid, int(rng.integers(2 ** 63)))
    n_data = pattern.data_indices.size
    sigma2 = _batch_noise_variances(cfg, cfg.data_ratio(n_data), rng)
    noise = (rng.standard_normal((cfg.batch_frames, grid.n_samples))
             + 1j * rng.standard_normal((cfg.batch_frames, grid.n_samples)))
    noise *= np.sqrt(sigma2 / 2.0)[:, None]
    bits = rng.integers(0, 2, size=(cfg.batch_frames, n_data, cfg.bits_per_re))

    view = constellation.normalized()
    mean_offset = np.hypot(*view.values.mean(axis=0))
    if mean_offset > 1e-9:
        raise AssertionError(f"normalized constellation mean {mean_offset:.2e} exceeds 1e-9")
    z = diffpipe.transmit_frames(bits, view, pattern, grid, taps, noise)
    llrs = forward(z, rx_params, cfg.rx_config())
    return diffpipe.total_bce(llrs, bits, pattern, grid)


def train(cfg: TrainingConfig, log_every=100, printer=None) -> TrainResult:
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ckpt_path = out_dir / f"{cfg.scheme}.ckpt"
    trace_path = out_dir / f"{cfg.scheme}.trace.csv"

    root = np.random.SeedSequence(cfg.seed)
    init_seed, *_ = root.spawn(1)
    rng = np.random.default_rng(init_seed)
    constellation = _draw_constellation(cfg, rng)
    rx_params = init_params(cfg.rx_config(), seed=int(rng.integers(2 ** 63)), zero_output=True)
    grid = cfg.grid()
    pattern = make_pattern(cfg.pattern_id, grid)

    params = dict(rx_params)
    if cfg.constellation_trainable:
        params["constellation.raw"] = constellation.raw

    if cfg.optimizer == "adam":
        state, step_fn = ng.AdamState(learning_rate=cfg.learning_rate), ng.adam_step
    elif cfg.optimizer == "sgd":
        state, step_fn = ng.SgdState(learning_rate=cfg.learning_rate), ng.sgd_step
    else:
        raise ValueError(f"unknown optimizer {cfg.optimizer!r}")

    meta = {
        "version": CHECKPOINT_VERSION,
        "scheme": cfg.scheme,
        "pattern": cfg.pattern_id,
        "rx_config": cfg.rx_config().to_dict(),
        "grid": {"n_subcarriers": grid.n_subcarriers, "n_symbols": grid.n_symbols,
                 "cp_length": grid.cp_length},
        "training": asdict(cfg),
        "iteration": 0,
    }

    losses = []
    step_seeds = root.spawn(cfg.iterations)
    with open(trace_path, "w") as trace:
        trace.write("iteration,loss,lr,seed\n")
        started = time.time()
        for it in range(cfg.iterations):
            loss = training_step(cfg, constellation, rx_params, pattern, grid, step_seeds[it])
            value = float(loss.values)
            if not np.isfinite(value):
                meta["iteration"] = it
                save_checkpoint(ckpt_path, constellation, rx_params, meta)
                raise TrainingDivergedError(
                    f"loss became non-finite at iteration {it}", ckpt_path)
            ng.zero_grads(params)
            ng.backward(loss)
            step_fn(params, state)
            losses.append(value)
            trace.write(f"{it},{value!r},{cfg.learning_rate!r},{cfg.seed}\n")
            if printer and (it % log_every == 0 or it == cfg.iterations - 1):
                rate = (it + 1) / (time.time() - started)
                printer(f"iter {it:6d} loss {value:10.2f} ({rate:.2f} it/s)")
            if cfg.checkpoint_every and (it + 1) % cfg.checkpoint_every == 0:
                meta["iteration"] = it + 1
                save_checkpoint(ckpt_path, constellation, rx_params, meta)
    meta["iteration"] = cfg.iterations
    save_checkpoint(ckpt_path, constellation, rx_params, meta)
    return TrainResult(checkpoint_path=ckpt_path, trace_path=trace_path,
                       losses=losses, iterations_run=cfg.iterations)
