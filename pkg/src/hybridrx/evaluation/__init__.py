"""BER sweeps, FLOPs accounting, spectral efficiency and the command-line interface."""

from .flops import FlopsDims, FlopsReport, LayerCost, count_flops, layer_inventory, layer_macs
from .se import SeParams, compute_spectral_efficiency
from .sweep import (
    CSV_COLUMNS,
    RECEIVERS,
    BinRow,
    SlotMetrics,
    SweepSpec,
    bin_by_sinr,
    equal_population_edges,
    format_csv,
    make_receiver,
    run_ber_sweep,
    slot_metrics,
    sweep_batches,
)
