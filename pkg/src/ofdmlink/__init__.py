"""Link-level OFDM simulator: LMMSE baseline, neural receivers, and
pilot/CP-free geometric shaping, with a Monte Carlo evaluation harness."""

__version__ = "0.1.0"
