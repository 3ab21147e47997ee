"""A tour of the reverse-mode tensor core.

Builds a tiny convolution + relu graph, runs backward, and checks the
result against the central-difference oracle that the whole test suite
relies on.
"""

import numpy as np

from wavelight import tensor as T
from wavelight.tensor import Tensor, finite_diff_grad

rng = np.random.default_rng(0)

x = Tensor(rng.uniform(-1, 1, (1, 5, 5, 2)), requires_grad=True)
w = Tensor(rng.uniform(-0.5, 0.5, (3, 3, 2, 4)), requires_grad=True)
b = Tensor(np.zeros((1, 1, 1, 4)), requires_grad=True)

loss = T.reduce_mean(T.relu(T.conv2d(x, w, b)))
print(f"loss = mean(relu(conv(x, w) + b)) = {loss.item():.6f}")

T.backward(loss)
print(f"gradients populated: x {x.grad.shape}, w {w.grad.shape}, b {b.grad.shape}")

fd = finite_diff_grad(lambda p: T.reduce_mean(T.relu(T.conv2d(x, p, b))), Tensor(w.data))
rel = np.max(np.abs(w.grad - fd.data)) / np.max(np.abs(fd.data))
print(f"weight gradient vs central differences: rel err {rel:.2e}")

# fan-out accumulates: using a tensor twice doubles its gradient
v = Tensor(np.ones((1, 1, 1, 1)), requires_grad=True)
T.backward(T.reduce_mean(T.add(v, v)))
print(f"d mean(v + v) / dv = {v.grad.item():.1f} (fan-out of 2)")

# the engine is 4-D only and refuses silent broadcasting
try:
    T.add(T.zeros((1, 2, 2, 1)), T.zeros((1, 2, 2, 3)))
except ValueError as e:
    print(f"shape safety: {e}")
