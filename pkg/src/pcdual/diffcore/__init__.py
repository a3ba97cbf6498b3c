"""Dense tensors, reverse-mode gradients and the shared layer blocks."""
from . import tensor as ops
from .gradcheck import grad_check
from .layers import (BatchNormState, Dense, MLP, Module, batch_norm, linear, max_pool_points,
                     pointwise_conv)
from .rng import RngStream, stream
from .tensor import Tensor, as_tensor, backward

__all__ = [
    "BatchNormState", "Dense", "MLP", "Module", "RngStream", "Tensor", "as_tensor", "backward",
    "batch_norm", "grad_check", "linear", "max_pool_points", "ops", "pointwise_conv", "stream",
]
