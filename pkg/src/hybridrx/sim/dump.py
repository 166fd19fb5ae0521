"""Slot dumps for regression fixtures (same container as checkpoints)."""

from __future__ import annotations

import numpy as np

from ..tensor import checkpoint
from .channel import ChannelRealization
from .slot import ResourceGrid, Slot, SlotConfig, TxSlot

SCHEMA = "hybridrx.slot/1"


def save_slot(path, slot: Slot) -> None:
    arrays = {
        "y": slot.grid.y,
        "x": slot.tx.x,
        "bits": slot.tx.bits,
        "h": slot.channel.h,
        "interferer_h": slot.channel.interferer_h,
        "impairment": slot.grid.impairment,
    }
    meta = {
        "schema": SCHEMA,
        "config": slot.cfg.to_dict(),
        "noise_var": slot.grid.noise_var,
        "inr_db": slot.grid.inr_db,
        "interference_power": slot.grid.interference_power,
        "sinr_db": slot.grid.sinr_db,
        "channel_meta": slot.channel.meta,
    }
    checkpoint.save(path, arrays, meta)


def load_slot(path) -> Slot:
    arrays, meta = checkpoint.load(path)
    if meta.get("schema") != SCHEMA:
        raise checkpoint.CheckpointError(f"{path}: not a slot dump")
    cfg = SlotConfig(**meta["config"])
    tx = TxSlot(arrays["bits"], arrays["x"], cfg.pattern())
    ch = ChannelRealization(arrays["h"], arrays["interferer_h"], meta["channel_meta"])
    grid = ResourceGrid(y=arrays["y"], noise_var=meta["noise_var"], inr_db=meta["inr_db"],
                        interference_power=meta["interference_power"], impairment=arrays["impairment"],
                        sinr_db=meta["sinr_db"])
    return Slot(cfg, tx, ch, grid)
