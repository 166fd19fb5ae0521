"""Link-level MIMO-OFDM simulation with conventional and hybrid neural receivers."""

__version__ = "0.1.0"
