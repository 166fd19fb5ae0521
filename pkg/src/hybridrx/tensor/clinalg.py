"""Small complex linear-algebra kernels used by the equalizers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

JITTER_EPS = 1e-9


class SolveError(np.linalg.LinAlgError):
    """Hermitian solve failed even after diagonal loading."""


@dataclass
class ComplexMatrix:
    """Dense complex matrix, optionally flagged Hermitian."""

    entries: np.ndarray
    hermitian: bool = False

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=np.complex128)
        if self.entries.ndim != 2:
            raise ValueError("ComplexMatrix entries must be 2-D")
        if self.hermitian and not is_hermitian(self.entries):
            raise ValueError("matrix flagged Hermitian but entries are not")

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]

    @property
    def H(self) -> "ComplexMatrix":
        return ComplexMatrix(self.entries.conj().T, self.hermitian)


def is_hermitian(a: np.ndarray, atol: float = 1e-12) -> bool:
    a = np.asarray(a)
    return a.shape[-1] == a.shape[-2] and bool(np.all(np.abs(a - np.conj(np.swapaxes(a, -1, -2))) <= atol))


def hermitize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))


def _cholesky_with_jitter(a: np.ndarray, eps: float) -> tuple[np.ndarray, np.ndarray]:
    """Batched Cholesky; matrices that fail get ``eps * tr(A)/n * I`` added once."""
    n = a.shape[-1]
    try:
        return np.linalg.cholesky(a), a
    except np.linalg.LinAlgError:
        pass
    flat = a.reshape(-1, n, n).copy()
    factors = np.empty_like(flat)
    for i, m in enumerate(flat):
        try:
            factors[i] = np.linalg.cholesky(m)
        except np.linalg.LinAlgError:
            load = eps * max(np.trace(m).real / n, np.finfo(float).tiny)
            m = m + load * np.eye(n)
            flat[i] = m
            try:
                factors[i] = np.linalg.cholesky(m)
            except np.linalg.LinAlgError as exc:
                raise SolveError(f"matrix not positive definite after loading (cond={np.linalg.cond(m):.3g})") from exc
    return factors.reshape(a.shape), flat.reshape(a.shape)


def hermitian_solve(a, b, rtol: float = 1e-6, eps: float = JITTER_EPS) -> np.ndarray:
    """Solve ``A X = B`` for Hermitian PSD ``A`` (batched over leading axes).

    Falls back to diagonal loading when the Cholesky factorization fails and
    raises :class:`SolveError` if the relative residual still exceeds ``rtol``.
    """
    a_arr = a.entries if isinstance(a, ComplexMatrix) else np.asarray(a)
    b_arr = b.entries if isinstance(b, ComplexMatrix) else np.asarray(b)
    if not (np.all(np.isfinite(a_arr)) and np.all(np.isfinite(b_arr))):
        raise ValueError("hermitian_solve received non-finite entries")
    a_arr = np.asarray(a_arr, dtype=np.result_type(a_arr, np.complex128))
    vec = b_arr.ndim == a_arr.ndim - 1
    if vec:
        b_arr = b_arr[..., None]
    chol, a_used = _cholesky_with_jitter(a_arr, eps)
    # L L^H X = B
    z = np.linalg.solve(chol, b_arr)
    x = np.linalg.solve(np.conj(np.swapaxes(chol, -1, -2)), z)
    resid = np.linalg.norm(a_arr @ x - b_arr)
    scale = np.linalg.norm(b_arr)
    if scale > 0 and resid > rtol * scale:
        cond = np.max(np.linalg.cond(a_arr.reshape(-1, *a_arr.shape[-2:])))
        raise SolveError(f"hermitian_solve residual {resid / scale:.3g} exceeds {rtol:g} (cond={cond:.3g})")
    if isinstance(a, ComplexMatrix) and isinstance(b, ComplexMatrix):
        return ComplexMatrix(x)
    return x[..., 0] if vec else x
