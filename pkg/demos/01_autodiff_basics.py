"""A tour of the autodiff core: build a graph, backprop through it, and
cross-check the gradients against finite differences.

Run: python3 demos/01_autodiff_basics.py
"""

import numpy as np

import metaphor.autodiff as ad

# Everything is a Tensor holding float64 data and a grad buffer of the same
# shape. Parameters want gradients; constants are inputs.
w = ad.parameter(np.array([[0.5, -1.0], [2.0, 0.0], [-0.5, 1.5]]))
b = ad.parameter(np.zeros(2))
x = ad.constant(np.array([1.0, 2.0, -1.0]))

h = ad.tanh(ad.add(ad.matmul(x, w), b))
loss = ad.mean_all(ad.mul(h, h))
print(f"forward: h = {h.data.round(4)}, loss = {loss.item():.6f}")

# backward() walks the graph once and accumulates into .grad.
ad.backward(loss)
print(f"dloss/db = {b.grad.round(6)}")
print(f"dloss/dw[0] = {w.grad[0].round(6)}")

# Calling backward again on a fresh forward pass keeps accumulating, which is
# what lets gradient accumulation across examples work. Zero when done.
ad.zero_grads([w, b])

# The same machinery drives the numerical checker used by the test suite:
# perturb every parameter element by +-h and compare slopes.
report = ad.grad_check(lambda: ad.mean_all(ad.mul(ad.tanh(ad.add(ad.matmul(x, w), b)),
                                                  ad.tanh(ad.add(ad.matmul(x, w), b)))),
                       [w, b], h=1e-5)
print(f"grad check: {report.n_checked} gradients, max rel err {report.max_rel_error:.2e}")
assert report.ok(1e-4)

# A tiny optimization loop: pull h toward a target with adam.
target = ad.constant(np.array([0.3, -0.2]))
opt = ad.adam(0.05)
for step in range(1, 201):
    h = ad.tanh(ad.add(ad.matmul(x, w), b))
    diff = ad.add(h, ad.scale(target, -1.0))
    loss = ad.mean_all(ad.mul(diff, diff))
    ad.backward(loss)
    ad.clip_global_norm([w, b], 5.0)
    ad.optimizer_step(opt, [w, b])
    ad.zero_grads([w, b])
    if step % 50 == 0:
        print(f"step {step:3d}  loss {loss.item():.8f}")
print(f"final h = {h.data.round(4)} vs target {target.data}")
