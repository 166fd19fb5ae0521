"""Full hybrid receiver: LS pilots -> DenoiseNN -> interpolation -> LMMSE/RZF -> per-layer detector/demapper."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..classic.estimation import interpolate_and_smooth, interpolation_operators, raw_ls_estimate
from ..classic.equalizer import inverse_incm
from ..classic.incm import band_index_map, estimate_incm_bands
from ..classic.receiver import load_incm
from ..sim.pilots import PilotPattern
from ..tensor import (
    Tensor,
    as_tensor,
    cast,
    checkpoint,
    diagonal,
    div,
    einsum,
    expand_dims,
    getitem,
    matmul,
    no_grad,
    reshape,
    solve,
    stack,
    transpose,
)
from .blocks import Module, build_coordinate_maps
from .config import ArchConfig
from .denoise import DenoiseNet, denoise_forward
from .detector import DemapperNet, DetectorNet, demapper_forward, detector_forward

CHECKPOINT_SCHEMA = "hybridrx.model/1"


class StageError(FloatingPointError):
    """A non-finite value appeared in a named pipeline stage."""

    def __init__(self, stage: str, detail: str = ""):
        self.stage = stage
        super().__init__(f"non-finite values in stage '{stage}'" + (f": {detail}" if detail else ""))


def _check(t, stage: str):
    data = t.data if isinstance(t, Tensor) else np.asarray(t)
    if not np.all(np.isfinite(data)):
        raise StageError(stage, f"{int(np.sum(~np.isfinite(data)))} of {data.size} entries")
    return t


def _mH(t: Tensor) -> Tensor:
    return t.mH


# -- differentiable chain pieces ---------------------------------------------

def interpolate_pilots(h_pilot: Tensor, pattern: PilotPattern) -> Tensor:
    """Pilot grids ``(B, F_P, S_P, N_R, N_T)`` to the full grid ``(B, N_F, N_S, N_R, N_T)`` (no smoothing)."""
    freq, time = interpolation_operators(pattern, smooth=False)
    h = einsum("kfm,...mnrk->...fnrk", np.asarray(freq, dtype=complex), h_pilot)
    return einsum("sn,...fnrk->...fsrk", np.asarray(time, dtype=complex), h)


def rzf_equalize(y: Tensor, h: Tensor, alpha: float) -> Tensor:
    """Unit-gain RZF estimates ``(..., N_T)``; ``y`` is ``(..., N_R)``, ``h`` ``(..., N_R, N_T)``."""
    n_t = h.shape[-1]
    hH = _mH(h)
    w = solve(matmul(hH, h) + alpha * np.eye(n_t), hH)
    return _apply_unit_gain(w, h, y)


def lmmse_equalize(y: Tensor, h: Tensor, r_inv: np.ndarray) -> Tensor:
    """Unit-gain LMMSE in the ``(H^H R^-1 H + I)^-1 H^H R^-1`` form with a fixed ``R^-1``."""
    n_t = h.shape[-1]
    q = matmul(r_inv, h)
    w = solve(matmul(_mH(h), q) + np.eye(n_t), _mH(q))
    return _apply_unit_gain(w, h, y)


def _apply_unit_gain(w: Tensor, h: Tensor, y) -> Tensor:
    gain = diagonal(matmul(w, h))
    x = getitem(matmul(w, expand_dims(as_tensor(y), -1)), (Ellipsis, 0))
    return div(x, gain)


# -- model ---------------------------------------------------------------------

@dataclass
class ForwardOutput:
    llr: Tensor  # (B, N_F, N_S, N_T, n_bits)
    section_symbols: list  # per section, complex (B, N_F, N_S, N_T)
    activations: list = field(default_factory=list)
    h_hat: Tensor | None = None  # full-grid channel estimate
    x_lmmse: Tensor | None = None
    x_rzf: Tensor | None = None


class EqDeepRx(Module):
    """Parameter container and forward pass of the hybrid receiver.

    Parameters
    ----------
    arch : ArchConfig
        Architecture; ``arch.denoise.enabled`` and the equalizer switches select
        ablations.  A disabled equalizer branch is replaced by the other one.
    seed : int
        Seed for weight initialization.
    zero_final : bool
        Zero the last kernel of every residual branch so blocks start as
        identities.  ``False`` draws all kernels at random.
    """

    def __init__(self, arch: ArchConfig | None = None, seed: int = 0, zero_final: bool = True):
        self.arch = arch or ArchConfig()
        dtype = np.dtype(self.arch.dtype)
        rng = np.random.default_rng(seed)
        self.denoise = DenoiseNet(self.arch.denoise, rng, dtype, zero_final) if self.arch.denoise.enabled else None
        self.detector = DetectorNet(self.arch.detector, rng, dtype, zero_final)
        self.demapper = DemapperNet(self.arch.demapper, self.arch.detector.channels, rng, dtype, zero_final)

    def named_parameters(self, prefix: str = ""):
        for key in ("denoise", "detector", "demapper"):
            mod = getattr(self, key)
            if mod is not None:
                yield from mod.named_parameters(prefix=f"{prefix}{key}.")

    @property
    def n_bits(self) -> int:
        return self.arch.demapper.n_bits

    # -- stages ----------------------------------------------------------------
    def channel_estimate(self, y: np.ndarray, pattern: PilotPattern, activations: list | None = None) -> Tensor:
        raw = raw_ls_estimate(y, pattern)
        if self.denoise is None:
            return Tensor(interpolate_and_smooth(raw, "baseline_static").h_hat)
        h = raw.h_hat  # (B, F_P, S_P, N_R, N_T)
        grids = Tensor(np.ascontiguousarray(np.moveaxis(h, (-2, -1), (-4, -3))))  # (B, N_R, N_T, F_P, S_P)
        den = _check(denoise_forward(grids, self.denoise, activations), "denoise")
        den = transpose(den, tuple(range(den.ndim - 4)) + (den.ndim - 2, den.ndim - 1, den.ndim - 4, den.ndim - 3))
        return _check(interpolate_pilots(den, pattern), "interpolation")

    def equalize(self, y: np.ndarray, h: Tensor, pattern: PilotPattern) -> tuple[Tensor, Tensor]:
        eq = self.arch.equalizer
        x_l = x_r = None
        if eq.lmmse:
            R, _ = estimate_incm_bands(y, h.data, pattern, eq.band_size)  # gradient stopped
            r_inv = inverse_incm(load_incm(R))
            r_inv = np.take(r_inv, band_index_map(pattern.n_subcarriers, eq.band_size), axis=-3)[..., :, None, :, :]
            x_l = _check(lmmse_equalize(y, h, r_inv), "lmmse")
        if eq.rzf:
            x_r = _check(rzf_equalize(y, h, eq.alpha), "rzf")
        return (x_l if x_l is not None else x_r), (x_r if x_r is not None else x_l)

    def detect(self, x_lmmse: Tensor, x_rzf: Tensor, activations: list | None = None):
        """Run detector and demapper on equalized streams ``(B, N_F, N_S, N_T)``, one layer at a time.

        Returns LLRs ``(B, N_F, N_S, N_T, n_bits)`` and per-section symbols.
        """
        x_lmmse, x_rzf = as_tensor(x_lmmse), as_tensor(x_rzf)
        if x_lmmse.shape != x_rzf.shape:
            raise ValueError(f"equalizer streams differ in shape: {x_lmmse.shape} vs {x_rzf.shape}")
        maps = build_coordinate_maps(*x_lmmse.shape[-3:-1])
        llrs, syms = [], []
        for t in range(x_lmmse.shape[-1]):
            a = getitem(x_lmmse, (Ellipsis, t))
            b = getitem(x_rzf, (Ellipsis, t))
            feats, sec = detector_forward(a, b, maps, self.detector, activations)
            _check(feats, "detector")
            llrs.append(_check(demapper_forward(feats, self.demapper, activations), "demapper"))
            syms.append(sec)
        llr = stack(llrs, axis=-2)
        section_symbols = [stack([s[i] for s in syms], axis=-1) for i in range(len(syms[0]))]
        return llr, section_symbols

    def forward(self, y: np.ndarray, pattern: PilotPattern, collect_activations: bool = False) -> ForwardOutput:
        """``y`` ``(B, N_F, N_S, N_R)`` or a single grid ``(N_F, N_S, N_R)``."""
        y = np.asarray(y)
        single = y.ndim == 3
        if single:
            y = y[None]
        _check(y, "input")
        acts = [] if collect_activations else None
        h = self.channel_estimate(y, pattern, acts)
        x_l, x_r = self.equalize(y, h, pattern)
        llr, syms = self.detect(x_l, x_r, acts)
        llr = cast(llr, np.float64)
        out = ForwardOutput(llr, syms, acts or [], h, x_l, x_r)
        if single:
            out.llr = getitem(out.llr, 0)
            out.section_symbols = [getitem(s, 0) for s in out.section_symbols]
        return out

    __call__ = forward

    def infer_llrs(self, y: np.ndarray, pattern: PilotPattern) -> np.ndarray:
        with no_grad():
            return np.asarray(self.forward(y, pattern).llr.data, dtype=np.float64)

    # -- persistence -------------------------------------------------------------
    def state(self) -> dict[str, np.ndarray]:
        return {name: t.data for name, t in self.named_parameters()}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        params = dict(self.named_parameters())
        missing = set(params) - set(state)
        extra = set(state) - set(params)
        if missing or extra:
            raise ValueError(f"state mismatch: missing {sorted(missing)}, unexpected {sorted(extra)}")
        for name, t in params.items():
            if state[name].shape != t.shape:
                raise ValueError(f"shape mismatch for {name}: {state[name].shape} vs {t.shape}")
            t.data[...] = state[name]

    def save(self, path: str | Path, extra_meta: dict | None = None) -> None:
        meta = {"schema": CHECKPOINT_SCHEMA, "arch": self.arch.to_dict(), **(extra_meta or {})}
        checkpoint.save(path, self.state(), meta)

    @classmethod
    def load(cls, path: str | Path) -> "EqDeepRx":
        tensors, meta = checkpoint.load(path)
        if meta.get("schema") != CHECKPOINT_SCHEMA:
            raise checkpoint.CheckpointError(f"{path}: not a model checkpoint")
        model = cls(ArchConfig.from_dict(meta["arch"]))
        model.load_state({k: v for k, v in tensors.items() if not k.startswith("opt.")})
        return model


def eqdeeprx_forward(y, pattern: PilotPattern, model: EqDeepRx, collect_activations: bool = False):
    """Functional entry point; returns ``(llr, diagnostics)``."""
    out = model.forward(y, pattern, collect_activations)
    return out.llr, out
