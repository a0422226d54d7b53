"""Scheme bookkeeping: data-symbol ratio, Eb/Es conversions, goodput, rows.

The data-symbol ratio rho is the fraction of transmitted samples carrying
data once CP samples are counted: rho = n_D * n_S / (n * (n_S + n_CP)).
Energy per bit then satisfies Eb/sigma^2 = 1 / (rho * m * r * sigma^2) under
unit average symbol energy, while Es/sigma^2 = 1/sigma^2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ofdm import GridConfig
from .pilots import make_pattern

DEFAULT_CODE_RATE = 683 / 1024  # shipped length-1024 code (nominal 2/3)


def ebn0_db_to_sigma2(ebn0_db, data_ratio, bits_per_re, code_rate):
    if data_ratio <= 0 or bits_per_re <= 0 or code_rate <= 0:
        raise ValueError("data ratio, bits per RE, and code rate must be positive")
    return 1.0 / (data_ratio * bits_per_re * code_rate * 10.0 ** (ebn0_db / 10.0))


def esn0_db_to_sigma2(esn0_db):
    return 1.0 / 10.0 ** (esn0_db / 10.0)


def sigma2_to_esn0_db(sigma2):
    if sigma2 <= 0:
        raise ValueError("noise variance must be positive")
    return -10.0 * np.log10(sigma2)


def ebn0_db_to_esn0_db(ebn0_db, data_ratio, bits_per_re, code_rate):
    return ebn0_db + 10.0 * np.log10(data_ratio * bits_per_re * code_rate)


def esn0_db_to_ebn0_db(esn0_db, data_ratio, bits_per_re, code_rate):
    return esn0_db - 10.0 * np.log10(data_ratio * bits_per_re * code_rate)


SCHEME_PRESETS = {
    # scheme id: (pilot pattern, cp_length, receiver kind, constellation source)
    "gs": ("none", 0, "checkpoint", "checkpoint"),
    "nrx-cp": ("1P", 6, "checkpoint", "qam"),
    "nrx-nocp": ("1P", 0, "checkpoint", "qam"),
    "lmmse": ("1P", 6, "lmmse", "qam"),
    "perfect-csi": ("1P", 6, "perfect-csi", "qam"),
}


@dataclass(frozen=True)
class SchemeConfig:
    scheme_id: str
    pattern_id: str
    cp_length: int
    bits_per_re: int = 4
    code_rate: float = DEFAULT_CODE_RATE
    n_subcarriers: int = 72
    n_symbols: int = 14
    receiver: str = "lmmse"  # "lmmse" | "perfect-csi" | checkpoint path
    constellation_source: str = "qam"  # "qam" | checkpoint path

    def __post_init__(self):
        if not 0.0 < self.data_ratio <= 1.0:
            raise ValueError(f"data ratio {self.data_ratio} outside (0, 1]")

    @property
    def grid(self) -> GridConfig:
        return GridConfig(self.n_subcarriers, self.n_symbols, self.cp_length)

    def pattern(self):
        return make_pattern(self.pattern_id, self.grid)

    @property
    def n_data_re(self):
        return self.grid.n_elements - self.pattern().n_pilots

    @property
    def data_ratio(self):
        g = self.grid
        return self.n_data_re * g.n_subcarriers / (g.n_elements * g.samples_per_symbol)


def scheme_preset(scheme_id, pattern_id=None, **overrides) -> SchemeConfig:
    if scheme_id not in SCHEME_PRESETS:
        raise ValueError(f"unknown scheme {scheme_id!r}; expected one of {sorted(SCHEME_PRESETS)}")
    default_pattern, cp, receiver, source = SCHEME_PRESETS[scheme_id]
    return SchemeConfig(
        scheme_id=scheme_id,
        pattern_id=pattern_id or default_pattern,
        cp_length=overrides.pop("cp_length", cp),
        receiver=overrides.pop("receiver", receiver),
        constellation_source=overrides.pop("constellation_source", source),
        **overrides,
    )


def goodput(ber, scheme: SchemeConfig):
    """Average information bits successfully received per transmitted symbol."""
    if not 0.0 <= ber <= 1.0:
        raise ValueError(f"BER must lie in [0, 1], got {ber}")
    return scheme.code_rate * scheme.data_ratio * scheme.bits_per_re * (1.0 - ber)


@dataclass
class ResultRow:
    scheme: str
    speed_kmh: float
    esn0_db: float
    ebn0_db: float
    frames: int
    bit_errors: int
    ber: float
    goodput: float
    seed: int

    FIELDS = ("scheme", "speed_kmh", "esn0_db", "ebn0_db", "frames",
              "bit_errors", "ber", "goodput", "seed")

    def check_identity(self, scheme: SchemeConfig):
        """goodput must re-derive bit-exactly from the stored BER."""
        return self.goodput == goodput(self.ber, scheme)

    def as_csv(self):
        parts = []
        for name in self.FIELDS:
            value = getattr(self, name)
            parts.append(repr(float(value)) if isinstance(value, (float, np.floating)) else str(value))
        return ",".join(parts)


def rows_to_csv(rows):
    lines = [",".join(ResultRow.FIELDS)]
    lines += [r.as_csv() for r in rows]
    return "\n".join(lines) + "\n"


def rows_from_csv(text):
    lines = [ln for ln in text.strip().splitlines() if ln]
    header = lines[0].split(",")
    if tuple(header) != ResultRow.FIELDS:
        raise ValueError(f"unexpected result header {header}")
    out = []
    for ln in lines[1:]:
        parts = ln.split(",")
        out.append(ResultRow(
            scheme=parts[0], speed_kmh=float(parts[1]), esn0_db=float(parts[2]),
            ebn0_db=float(parts[3]), frames=int(parts[4]), bit_errors=int(parts[5]),
            ber=float(parts[6]), goodput=float(parts[7]), seed=int(parts[8]),
        ))
    return out
