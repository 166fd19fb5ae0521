"""Link-level slot simulator."""

from .channel import ChannelRealization, ar1_coefficient, generate_channel, tap_profile, tapped_delay_response
from .pilots import PilotPattern, build_pilot_pattern
from .qam import bit_labels, constellation, map_qam, modulate
from .scenario import Scenario
from .slot import (
    ResourceGrid,
    Slot,
    SlotBatch,
    SlotConfig,
    TxSlot,
    generate_batch,
    generate_slot,
    make_tx,
    stack_slots,
    synthesize_received,
)
