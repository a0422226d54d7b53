"""Result-table ingestion.

The simulator writes comma-separated text with this exact header:

    scheme,speed_kmh,esn0_db,ebn0_db,frames,bit_errors,ber,goodput,seed

and the per-row identity goodput = r*rho*m*(1-ber), which lets the
saturation level r*rho*m be recovered from any row with ber < 1.
"""

from __future__ import annotations

from dataclasses import dataclass

EXPECTED_HEADER = ("scheme", "speed_kmh", "esn0_db", "ebn0_db",
                   "frames", "bit_errors", "ber", "goodput", "seed")


class TableError(ValueError):
    """Result table is malformed."""


@dataclass(frozen=True)
class Row:
    scheme: str
    speed_kmh: float
    esn0_db: float
    ebn0_db: float
    frames: int
    bit_errors: int
    ber: float
    goodput: float
    seed: int


def parse_table(text, source="<table>"):
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    if not lines:
        raise TableError(f"{source}: empty table")
    header = tuple(lines[0].split(","))
    if header != EXPECTED_HEADER:
        missing = [c for c in EXPECTED_HEADER if c not in header]
        if missing:
            raise TableError(f"{source}: missing column(s) {', '.join(missing)}")
        raise TableError(f"{source}: unexpected column order {header}")
    if len(lines) == 1:
        raise TableError(f"{source}: table has a header but no rows")
    rows = []
    for n, ln in enumerate(lines[1:], start=2):
        parts = ln.split(",")
        if len(parts) != len(EXPECTED_HEADER):
            raise TableError(f"{source}:{n}: expected {len(EXPECTED_HEADER)} fields, got {len(parts)}")
        try:
            rows.append(Row(
                scheme=parts[0], speed_kmh=float(parts[1]), esn0_db=float(parts[2]),
                ebn0_db=float(parts[3]), frames=int(parts[4]), bit_errors=int(parts[5]),
                ber=float(parts[6]), goodput=float(parts[7]), seed=int(parts[8]),
            ))
        except ValueError as exc:
            raise TableError(f"{source}:{n}: {exc}") from None
    return rows


def load_tables(paths):
    rows = []
    for path in paths:
        with open(path, "r", encoding="utf-8") as fh:
            rows.extend(parse_table(fh.read(), source=str(path)))
    return rows


def saturation_level(rows):
    """r*rho*m recovered from goodput/(1-ber); rows must agree."""
    levels = [r.goodput / (1.0 - r.ber) for r in rows if r.ber < 1.0]
    if not levels:
        raise TableError("cannot derive the saturation level: every row has ber = 1")
    spread = max(levels) - min(levels)
    if spread > 1e-9:
        raise TableError(f"inconsistent goodput identity across rows (spread {spread:.2e})")
    return levels[0]
