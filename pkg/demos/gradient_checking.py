"""
Checking analytic gradients with finite differences
===================================================

Every layer ships its own backward pass, so each one can be validated by
comparing against a numerical derivative. This script runs the check on a
convolution and a GRU, then corrupts a gradient on purpose to show the
harness actually catches mistakes.
"""

import numpy as np

from artistid.nn import Conv2d, Gru, finite_diff_check

rng = np.random.default_rng(0)

# convolution: perturb the input, the kernel, and the bias
conv = Conv2d(2, 3, 3, rng, dtype=np.float64)
x = rng.standard_normal((2, 2, 6, 6))
c = rng.standard_normal((2, 3, 6, 6))  # fixed cotangent to make loss scalar


def conv_loss(inputs):
    data, weight, bias = inputs
    conv.weight.data = weight
    conv.bias.data = bias
    out = conv.forward(data, train=True)
    dx = conv.backward(c)
    return float((out * c).sum()), [dx, conv.weight.grad, conv.bias.grad]


report = finite_diff_check(conv_loss, [x, conv.weight.data.copy(), conv.bias.data.copy()])
print(f"conv2d: {report.n_checked} entries, max relative error {report.max_rel_error:.2e}, "
      f"passed={report.passed}")

# recurrent layer: gradients flow through every time step
gru = Gru(3, 4, rng, dtype=np.float64)
seq = rng.standard_normal((2, 5, 3))
cot = rng.standard_normal((2, 5, 4))
params = gru.parameters()


def gru_loss(inputs):
    for p, value in zip(params, inputs[1:]):
        p.data = value
    out = gru.forward(inputs[0], train=True)
    dx = gru.backward(cot)
    return float((out * cot).sum()), [dx] + [p.grad for p in params]


report = finite_diff_check(gru_loss, [seq] + [p.data.copy() for p in params])
print(f"gru: {report.n_checked} entries, max relative error {report.max_rel_error:.2e}, "
      f"passed={report.passed}")


def broken(inputs):
    loss, grads = gru_loss(inputs)
    grads[0] = grads[0] * 1.05  # deliberately 5 percent off
    return loss, grads


report = finite_diff_check(broken, [seq] + [p.data.copy() for p in params])
print(f"corrupted gradient: max relative error {report.max_rel_error:.2e}, "
      f"passed={report.passed}  <- must be False")
