"""Minimal tensor engine: reverse-mode autodiff, conv layers, complex solves, checkpoints."""

from .clinalg import ComplexMatrix, SolveError, hermitian_solve, hermitize, is_hermitian
from .engine import (
    GraphError,
    Tensor,
    abs2,
    add,
    as_tensor,
    broadcast_to,
    cast,
    complex_from,
    concat,
    conj,
    diagonal,
    div,
    einsum,
    expand_dims,
    getitem,
    grad_enabled,
    imag,
    matmul,
    mean,
    mul,
    neg,
    no_grad,
    parameter,
    real,
    relu,
    reshape,
    sigmoid,
    sigmoid_cross_entropy,
    softplus,
    solve,
    square,
    stack,
    swapaxes,
    transpose,
    tsum,
    var,
)
from .layers import FREQ_AXIS, TIME_AXIS, LayerParams, depthwise_conv, he_uniform, nearest_resample, pointwise_conv


def backward(loss: Tensor) -> None:
    """Run reverse-mode differentiation from a scalar ``loss``."""
    loss.backward()
