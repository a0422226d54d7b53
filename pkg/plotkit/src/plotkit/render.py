"""Panel rendering: BER vs Eb/N0 and goodput vs Es/N0, one panel per speed."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .tables import TableError, load_tables, saturation_level

MARKERS = "osD^vPX*"
METRICS = ("ber", "goodput")


@dataclass(frozen=True)
class PlotSpec:
    table_paths: tuple
    metric: str = "ber"
    output_path: str = "panels.png"
    schemes: tuple = ()          # required scheme ids; empty = everything found
    group_label: str = ""        # e.g. the pilot pattern the tables belong to
    x_limits: tuple = ()
    y_limits: tuple = ()

    def __post_init__(self):
        if self.metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}, got {self.metric!r}")
        if not self.table_paths:
            raise ValueError("at least one input table is required")


def _panel_path(output_path, speed):
    path = Path(output_path)
    return path.with_name(f"{path.stem}-v{speed:g}kmh{path.suffix or '.png'}")


def render(spec: PlotSpec):
    """Render one image per speed found in the tables; returns written paths.

    BER panels use a log scale (exact zeros appear as gaps); goodput panels
    include each scheme's r*rho*m saturation line recovered from the table.
    """
    rows = load_tables(spec.table_paths)
    found_schemes = sorted({r.scheme for r in rows})
    missing = [s for s in spec.schemes if s not in found_schemes]
    if missing:
        raise TableError(f"scheme id(s) not present in tables: {', '.join(missing)}")
    keep = list(spec.schemes) if spec.schemes else found_schemes
    rows = [r for r in rows if r.scheme in keep]

    written = []
    for speed in sorted({r.speed_kmh for r in rows}):
        at_speed = [r for r in rows if r.speed_kmh == speed]
        fig, ax = plt.subplots(figsize=(5.0, 3.8), dpi=150)
        for k, scheme in enumerate(s for s in keep if any(r.scheme == s for r in at_speed)):
            series = sorted((r for r in at_speed if r.scheme == scheme),
                            key=lambda r: r.esn0_db)
            marker = MARKERS[k % len(MARKERS)]
            color = f"C{k}"
            if spec.metric == "ber":
                x = [r.ebn0_db for r in series]
                y = [r.ber if r.ber > 0 else np.nan for r in series]
                ax.semilogy(x, y, marker=marker, color=color, label=scheme)
            else:
                x = [r.esn0_db for r in series]
                y = [r.goodput for r in series]
                ax.plot(x, y, marker=marker, color=color, label=scheme)
                level = saturation_level(series)
                ax.axhline(level, color=color, linestyle="--", linewidth=0.8, alpha=0.6)
        if spec.metric == "ber":
            ax.set_xlabel("Eb/N0 [dB]")
            ax.set_ylabel("BER")
        else:
            ax.set_xlabel("Es/N0 [dB]")
            ax.set_ylabel("goodput [bit/symbol]")
        title = f"{spec.metric.upper() if spec.metric == 'ber' else 'Goodput'} at {speed:g} km/h"
        if spec.group_label:
            title = f"{spec.group_label}: {title}"
        ax.set_title(title)
        ax.grid(True, which="both", alpha=0.3)
        ax.legend()
        if spec.x_limits:
            ax.set_xlim(*spec.x_limits)
        if spec.y_limits:
            ax.set_ylim(*spec.y_limits)
        fig.tight_layout()
        out = _panel_path(spec.output_path, speed)
        out.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(out, metadata={"Software": "plotkit"})
        plt.close(fig)
        written.append(out)
    return written
