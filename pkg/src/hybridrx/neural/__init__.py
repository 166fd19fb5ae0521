"""Neural blocks of the hybrid receiver and the full forward pass."""

from .blocks import CoordinateMaps, Module, ResBlock, SeparableConv, build_coordinate_maps
from .config import PRESETS, ArchConfig, DemapperConfig, DenoiseConfig, DetectorConfig, EqualizerConfig, preset
from .denoise import DenoiseNet, TimeMixer, denoise_forward
from .detector import DemapperNet, DetectorNet, demapper_forward, detector_forward, detector_input
from .model import (
    EqDeepRx,
    ForwardOutput,
    StageError,
    eqdeeprx_forward,
    interpolate_pilots,
    lmmse_equalize,
    rzf_equalize,
)
