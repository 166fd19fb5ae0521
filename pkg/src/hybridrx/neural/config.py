"""Architecture configuration with named size presets and TOML loading."""

from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@dataclass(frozen=True)
class DenoiseConfig:
    enabled: bool = True
    filters: tuple[int, ...] = (64, 64, 64, 2)
    subsample: tuple[int, ...] = (1, 4, 2, 1)
    kernel: int = 13
    mixer_channels: int = 8


@dataclass(frozen=True)
class DetectorConfig:
    channels: int = 64
    sections: int = 4
    subsample: tuple[int, ...] = (1, 8)
    kernel_freq: int = 13
    kernel_time: int = 13
    input_channels: int = 6


@dataclass(frozen=True)
class DemapperConfig:
    filters: tuple[int, ...] = (32, 32, 32, 8)

    @property
    def n_bits(self) -> int:
        return self.filters[-1]


@dataclass(frozen=True)
class EqualizerConfig:
    lmmse: bool = True
    rzf: bool = True
    alpha: float = 1e-4
    band_size: int = 24


@dataclass(frozen=True)
class ArchConfig:
    """Neural receiver architecture; defaults are the 1x model."""

    denoise: DenoiseConfig = field(default_factory=DenoiseConfig)
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    demapper: DemapperConfig = field(default_factory=DemapperConfig)
    equalizer: EqualizerConfig = field(default_factory=EqualizerConfig)
    dtype: str = "float32"

    def __post_init__(self):
        dn, dt, dm = self.denoise, self.detector, self.demapper
        if len(dn.filters) != len(dn.subsample):
            raise ValueError("denoise filters and subsample factors differ in length")
        if dn.filters[-1] != 2:
            raise ValueError("the last denoise block must output 2 channels")
        if dm.n_bits < 8:
            raise ValueError("demapper must output at least 8 LLR channels")
        for k in (dn.kernel, dt.kernel_freq, dt.kernel_time):
            if k < 1 or k % 2 == 0:
                raise ValueError(f"kernel sizes must be odd and positive, got {k}")
        if min(dn.subsample + dt.subsample) < 1:
            raise ValueError("subsampling factors must be >= 1")
        if not (self.equalizer.lmmse or self.equalizer.rzf):
            raise ValueError("at least one equalizer branch must be enabled")
        if dt.input_channels != 6:
            raise ValueError("detector input is two equalized streams plus two coordinate maps (6 channels)")
        if self.dtype not in ("float32", "float64"):
            raise ValueError(f"unsupported dtype {self.dtype!r}")

    def replace(self, **sections) -> "ArchConfig":
        """Copy with per-section overrides, e.g. ``replace(detector={"channels": 16})``."""
        kw = {}
        for name, value in sections.items():
            cur = getattr(self, name)
            kw[name] = dataclasses.replace(cur, **value) if isinstance(value, dict) else value
        return dataclasses.replace(self, **kw)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ArchConfig":
        base = preset(d["preset"]) if "preset" in d else cls()
        known = {"denoise", "detector", "demapper", "equalizer"}
        kw = {}
        for key, value in d.items():
            if key in known:
                cur = getattr(base, key)
                names = {f.name for f in dataclasses.fields(cur)}
                bad = set(value) - names
                if bad:
                    raise ValueError(f"unknown keys in [{key}]: {sorted(bad)}")
                kw[key] = dataclasses.replace(cur, **{k: tuple(v) if isinstance(v, list) else v
                                                      for k, v in value.items()})
            elif key == "dtype":
                kw[key] = value
            elif key != "preset":
                raise ValueError(f"unknown architecture section {key!r}")
        return dataclasses.replace(base, **kw) if kw else base

    @classmethod
    def from_toml(cls, path: str | Path) -> "ArchConfig":
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
        return cls.from_dict(data.get("arch", data))


def _scaled(c: int, dm: int, dn: int) -> ArchConfig:
    return ArchConfig(
        denoise=DenoiseConfig(filters=(dn, dn, dn, 2)),
        detector=DetectorConfig(channels=c),
        demapper=DemapperConfig(filters=(dm, dm, dm, 8)),
    )


PRESETS = {
    "0.25x": _scaled(32, 16, 32),
    "0.5x": _scaled(44, 24, 44),
    "1x": ArchConfig(),
    "4x": _scaled(128, 64, 128),
    # desk-scale model used for CPU training
    "desk": _scaled(16, 16, 16),
}


def preset(name: str) -> ArchConfig:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
