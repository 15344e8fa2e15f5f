"""Walk through the autodiff core: build a small graph, backprop, sanity-check
the gradients against finite differences."""

import numpy as np

from camloc import Tensor, backward, conv2d, global_avg_pool, relu, softmax_cross_entropy

rng = np.random.default_rng(0)

# A miniature classifier: one conv layer, relu, pooled into 3 class logits.
image = Tensor(rng.uniform(size=(2, 6, 6)).astype(np.float32))
kernel = Tensor(rng.normal(scale=0.3, size=(3, 2, 3, 3)).astype(np.float32), grad_enabled=True)
bias = Tensor(np.zeros(3, dtype=np.float32), grad_enabled=True)

logits = global_avg_pool(relu(conv2d(image, kernel, bias, stride=1, pad=1)))
loss = softmax_cross_entropy(logits, label=1)
print(f"logits: {logits.data.round(4)}")
print(f"loss:   {float(loss.data):.6f}")

backward(loss)
print(f"kernel grad norm: {np.abs(kernel.grad).sum():.6f}")
print(f"bias grad:        {bias.grad.round(4)}")

# Spot-check one kernel element with central differences.
index = (0, 0, 1, 1)
step = 1e-3


def loss_at(value: float) -> float:
    probe = Tensor(kernel.data.copy())
    probe.data[index] = value
    out = global_avg_pool(relu(conv2d(image, probe, Tensor(bias.data), stride=1, pad=1)))
    return float(softmax_cross_entropy(out, label=1).data)


numeric = (loss_at(kernel.data[index] + step) - loss_at(kernel.data[index] - step)) / (2 * step)
print(f"kernel grad {index}: analytic {kernel.grad[index]:+.6f}, finite difference {numeric:+.6f}")
