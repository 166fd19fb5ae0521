"""Adam and LAMB optimizers with a linear-decay learning-rate schedule."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..tensor import Tensor


def linear_decay(step: int, total_steps: int, lr0: float) -> float:
    """Learning rate at ``step`` (0-based), falling linearly to zero after ``total_steps``."""
    if total_steps <= 0:
        return lr0
    return lr0 * max(0.0, 1.0 - step / total_steps)


@dataclass
class OptimizerState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0


class Adam:
    """Adam over named parameters; ``kind="lamb"`` rescales each update by the trust ratio."""

    def __init__(self, params: dict[str, Tensor], kind: str = "adam", beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8, weight_decay: float = 0.0):
        if kind not in ("adam", "lamb"):
            raise ValueError(f"unknown optimizer {kind!r}")
        self.params = params
        self.kind = kind
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.weight_decay = weight_decay
        self.state = OptimizerState(
            m={k: np.zeros_like(p.data, dtype=np.float64) for k, p in params.items()},
            v={k: np.zeros_like(p.data, dtype=np.float64) for k, p in params.items()},
        )

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def step(self, lr: float) -> None:
        st = self.state
        st.step += 1
        t = st.step
        c1 = 1.0 - self.beta1 ** t
        c2 = 1.0 - self.beta2 ** t
        for name, p in self.params.items():
            if p.grad is None:
                continue
            g = p.grad.astype(np.float64)
            m, v = st.m[name], st.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            update = (m / c1) / (np.sqrt(v / c2) + self.eps)
            if self.weight_decay:
                update = update + self.weight_decay * p.data
            if self.kind == "lamb":
                wn = float(np.linalg.norm(p.data))
                un = float(np.linalg.norm(update))
                update = update * (wn / un if wn > 0 and un > 0 else 1.0)
            if lr != 0.0:
                p.data -= (lr * update).astype(p.data.dtype)

    def state_tensors(self) -> dict[str, np.ndarray]:
        out = {}
        for name in self.params:
            out[f"opt.m.{name}"] = self.state.m[name]
            out[f"opt.v.{name}"] = self.state.v[name]
        return out

    def load_state_tensors(self, tensors: dict[str, np.ndarray], step: int) -> None:
        for name, p in self.params.items():
            m, v = tensors[f"opt.m.{name}"], tensors[f"opt.v.{name}"]
            if m.shape != p.shape or v.shape != p.shape:
                raise ValueError(f"optimizer moment shape mismatch for {name}")
            self.state.m[name] = m.astype(np.float64).copy()
            self.state.v[name] = v.astype(np.float64).copy()
        self.state.step = int(step)
