"""Walk through the reverse-mode engine on a small expression.

Builds y = sum(p * softmax(tanh(x @ w) + b)) node by node, where p is a
fixed projection (a plain sum would be constant since softmax rows sum to
one), runs one backward pass, then verifies every analytic gradient
against central finite differences.
"""

import numpy as np

import eraseg.autodiff as ad
from eraseg.autodiff import Tensor

rng = np.random.default_rng(0)
x = Tensor(rng.normal(size=(2, 3)))
w = Tensor(rng.normal(size=(3, 4)))
b = Tensor(rng.normal(size=(1, 4)))
p = rng.normal(size=(2, 4))


def forward():
    probs = ad.softmax_row(ad.add(ad.tanh(ad.matmul(x, w)), b))
    return ad.sum_all(ad.mul(probs, Tensor(p)))


y = forward()
print(f"forward value: {y.value[0, 0]:.6f}")

y.backward()
print("analytic gradients after one backward pass:")
for name, leaf in (("x", x), ("w", w), ("b", b)):
    print(f"  d y / d {name} =\n{np.array_str(leaf.grad, precision=4)}")

# Central differences at h=1e-5: perturb one entry at a time and rebuild
# the whole graph, since graphs here are single use.
worst = ad.grad_check(forward, [x, w, b])
print(f"worst relative error vs finite differences: {worst:.2e}")
assert worst < 1e-4
print("analytic and numeric gradients agree.")
