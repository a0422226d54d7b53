"""Time-varying multipath tap generation and trace file ingestion.

Each tap is an independent sum-of-sinusoids Rayleigh process (random arrival
angles and phases) whose ensemble autocorrelation follows J0(2 pi f_d tau);
tap powers follow an exponential power-delay profile normalized to unit
total power. Terminal speed sets the maximum Doppler f_d = v f_c / c.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass, field

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0
DEFAULT_N_TAPS = 5
DEFAULT_N_SINUSOIDS = 16

TRACE_MAGIC = b"TAPTRACE"
TRACE_VERSION = 1
_TRACE_HEADER = struct.Struct("<8sIIIIdd")  # magic, version, n_taps, samples/frame, frames, f_c, speed


class TraceFormatError(ValueError):
    """Trace file violates the documented layout."""


@dataclass(frozen=True)
class MobilityProfile:
    speed_min_kmh: float = 0.0
    speed_max_kmh: float = 130.0
    carrier_hz: float = 3.5e9
    subcarrier_spacing_hz: float = 30e3
    n_subcarriers: int = 72

    def __post_init__(self):
        if not 0.0 <= self.speed_min_kmh <= self.speed_max_kmh:
            raise ValueError(f"need 0 <= v_min <= v_max, got {self}")
        if self.sample_rate_hz <= 0.0:
            raise ValueError(f"sample rate must be positive, got {self}")

    @property
    def sample_rate_hz(self):
        return self.n_subcarriers * self.subcarrier_spacing_hz

    def max_doppler_hz(self, speed_kmh):
        return (speed_kmh / 3.6) * self.carrier_hz / SPEED_OF_LIGHT


@dataclass
class ChannelRealization:
    taps: np.ndarray  # complex (n_samples, n_taps), h_{i,t} = taps[t, i]
    noise_variance: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def n_taps(self):
        return self.taps.shape[1]

    @property
    def n_samples(self):
        return self.taps.shape[0]


def exponential_power_profile(n_taps):
    """Per-tap powers with ratio e^-1 between consecutive taps, summing to 1."""
    p = np.exp(-np.arange(n_taps, dtype=np.float64))
    return p / p.sum()


def generate_batch(profile: MobilityProfile, n_samples, count, seed,
                   n_taps=DEFAULT_N_TAPS, n_sinusoids=DEFAULT_N_SINUSOIDS):
    """Draw `count` independent realizations; returns (taps, speeds).

    taps has shape (count, n_samples, n_taps); each realization draws its own
    speed uniformly from the profile range. Same seed, same output, bit for
    bit.
    """
    rng = np.random.default_rng(seed)
    speeds = rng.uniform(profile.speed_min_kmh, profile.speed_max_kmh, size=count)
    doppler = profile.max_doppler_hz(speeds)  # (count,)
    angles = rng.uniform(0.0, 2.0 * np.pi, size=(count, n_taps, n_sinusoids))
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(count, n_taps, n_sinusoids))
    # per-sinusoid angular rate (count, n_taps, n_sinusoids)
    omega = 2.0 * np.pi * doppler[:, None, None] * np.cos(angles)
    # evaluate e^{j(omega t + phi)} on the uniform sample grid as a cumulative
    # product of per-step rotations: one exp per sinusoid instead of per sample
    waves = np.broadcast_to(
        np.exp(1j * omega / profile.sample_rate_hz)[..., None],
        (count, n_taps, n_sinusoids, n_samples),
    ).copy()
    waves[..., 0] = np.exp(1j * phases)
    np.cumprod(waves, axis=-1, out=waves)
    powers = exponential_power_profile(n_taps)
    taps = np.einsum("ctkn,t->cnt", waves, np.sqrt(powers / n_sinusoids))
    return taps, speeds


def generate(profile: MobilityProfile, n_samples, seed,
             n_taps=DEFAULT_N_TAPS, n_sinusoids=DEFAULT_N_SINUSOIDS) -> ChannelRealization:
    """One tap realization with speed drawn uniformly from the profile range."""
    taps, speeds = generate_batch(profile, n_samples, 1, seed, n_taps, n_sinusoids)
    meta = {"speed_kmh": float(speeds[0]), "seed": seed, "generator": "jakes"}
    return ChannelRealization(taps=taps[0], meta=meta)


def identity_realization(n_samples, n_taps=1) -> ChannelRealization:
    """Time-invariant single-tap unit channel (AWGN once noise is added)."""
    taps = np.zeros((n_samples, n_taps), dtype=np.complex128)
    taps[:, 0] = 1.0
    return ChannelRealization(taps=taps, meta={"speed_kmh": 0.0, "generator": "awgn"})


# ---------------------------------------------------------------------------
# trace files
#
# Layout (little-endian):
#   8 bytes  magic  b"TAPTRACE"
#   u32      version (1)
#   u32      n_taps
#   u32      samples per frame
#   u32      frame count
#   f64      carrier frequency [Hz]
#   f64      speed [km/h]
# followed by frame_count frames of samples*taps complex64 values,
# row-major over (time, tap).

def write_trace(path, frames, carrier_hz, speed_kmh):
    """Write a list of (n_samples, n_taps) complex tap arrays."""
    frames = [np.asarray(f, dtype=np.complex64) for f in frames]
    if not frames:
        raise ValueError("refusing to write an empty trace")
    n_samples, n_taps = frames[0].shape
    for f in frames:
        if f.shape != (n_samples, n_taps):
            raise ValueError(f"inconsistent frame shapes: {f.shape} vs {(n_samples, n_taps)}")
    with open(path, "wb") as fh:
        fh.write(_TRACE_HEADER.pack(TRACE_MAGIC, TRACE_VERSION, n_taps, n_samples,
                                    len(frames), float(carrier_hz), float(speed_kmh)))
        for f in frames:
            fh.write(np.ascontiguousarray(f, dtype="<c8").tobytes())


def load_trace(path, expected_n_taps=None):
    """Load all realizations from a trace file, in file order.

    If the stored tap count differs from expected_n_taps, the file's value
    wins and a warning is recorded.
    """
    with open(path, "rb") as fh:
        header = fh.read(_TRACE_HEADER.size)
        if len(header) < _TRACE_HEADER.size:
            raise TraceFormatError(f"{path}: header truncated")
        magic, version, n_taps, n_samples, n_frames, carrier_hz, speed_kmh = _TRACE_HEADER.unpack(header)
        if magic != TRACE_MAGIC:
            raise TraceFormatError(f"{path}: bad magic {magic!r}")
        if version != TRACE_VERSION:
            raise TraceFormatError(f"{path}: unsupported version {version}")
        if expected_n_taps is not None and n_taps != expected_n_taps:
            warnings.warn(
                f"{path}: trace has {n_taps} taps, overriding configured {expected_n_taps}",
                stacklevel=2,
            )
        payload = fh.read()
    frame_bytes = n_samples * n_taps * 8
    if len(payload) != n_frames * frame_bytes:
        found = len(payload) // frame_bytes
        raise TraceFormatError(
            f"{path}: expected {n_frames} frames ({n_frames * frame_bytes} payload bytes), "
            f"found {found} complete frames ({len(payload)} bytes)"
        )
    out = []
    for k in range(n_frames):
        raw = payload[k * frame_bytes:(k + 1) * frame_bytes]
        taps = np.frombuffer(raw, dtype="<c8").reshape(n_samples, n_taps).astype(np.complex128)
        meta = {"speed_kmh": speed_kmh, "carrier_hz": carrier_hz, "generator": "trace", "frame": k}
        out.append(ChannelRealization(taps=taps, meta=meta))
    return out
