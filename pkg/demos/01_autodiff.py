"""
Reverse-mode gradients on numpy arrays
======================================

A Tensor records how it was produced; ``backward`` walks that record in
reverse and leaves gradients on the leaves. ``grad_check`` compares them
with central differences.
"""
import numpy as np

from pcdual.diffcore import Dense, Tensor, backward, grad_check, ops

# a scalar function of one parameter vector
theta = Tensor(np.array([1.0, 2.0]), requires_grad=True)
loss = ops.sum(ops.mul(theta, theta))
backward(loss)
print("d/dtheta sum(theta^2) =", theta.grad)

# a layer with batch norm and ELU, checked against finite differences
rng = np.random.default_rng(0)
layer = Dense(3, 4, rng)
x = rng.normal(size=(8, 3))
params = list(layer.parameters().values())
err = grad_check(lambda: ops.sum(ops.mul(layer(x), layer(x))), params)
print(f"Dense layer, train-mode batch norm: max relative error {err:.2e}")

# switching to eval mode freezes the running statistics into a fixed affine map
layer.eval()
print("eval output is deterministic:", np.array_equal(layer(x).values, layer(x).values))
