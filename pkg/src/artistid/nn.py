"""Differentiable layers with hand-derived backward passes.

Everything the classifier needs, built on numpy arrays: 2-D convolution
(stride 1, same zero padding), batch normalization, ELU, max pooling,
inverted dropout, a GRU with full backpropagation through time, a dense
layer, softmax cross-entropy, and Adam. Layers cache what their backward
pass needs during forward and overwrite parameter gradients on backward
(one backward per forward).

Training runs in float32 by default; the finite-difference harness expects
float64 instances.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class Parameter:
    """A learnable array and its gradient buffer."""

    def __init__(self, data: np.ndarray):
        self.data = np.asarray(data)
        self.grad = np.zeros_like(self.data)

    @property
    def shape(self):
        return self.data.shape


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int, dtype) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


def scaled_uniform(rng: np.random.Generator, shape, scale: float, dtype) -> np.ndarray:
    return rng.uniform(-scale, scale, size=shape).astype(dtype)


def _im2col(x_padded: np.ndarray, kh: int, kw: int):
    """Unfold stride-1 windows to a (C*kh*kw, B*Ho*Wo) matrix."""
    windows = sliding_window_view(x_padded, (kh, kw), axis=(2, 3))
    b, c, ho, wo = windows.shape[:4]
    cols = windows.transpose(1, 4, 5, 0, 2, 3).reshape(c * kh * kw, b * ho * wo)
    return cols, (b, ho, wo)


def _corr2d(x: np.ndarray, kernels: np.ndarray, pad: int):
    """Stride-1 cross-correlation (no kernel flip) after zero padding.

    Returns the output (B, C_out, Ho, Wo) and the im2col matrix of the
    padded input for gradient reuse.
    """
    c_out, c_in, kh, kw = kernels.shape
    if x.shape[1] != c_in:
        raise ValueError(f"expected {c_in} input channels, got {x.shape[1]}")
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    cols, (b, ho, wo) = _im2col(x, kh, kw)
    out = (kernels.reshape(c_out, -1) @ cols).reshape(c_out, b, ho, wo)
    return np.ascontiguousarray(out.transpose(1, 0, 2, 3)), cols


class Conv2d:
    """Same-padding stride-1 convolution (cross-correlation convention)."""

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int,
                 rng: np.random.Generator, dtype=np.float32):
        if kernel_size % 2 == 0 or kernel_size < 1:
            raise ValueError(f"kernel size must be odd, got {kernel_size}")
        k = kernel_size
        self.in_channels, self.out_channels, self.kernel_size = in_channels, out_channels, k
        self.pad = (k - 1) // 2
        self.weight = Parameter(
            glorot_uniform(rng, (out_channels, in_channels, k, k),
                           fan_in=in_channels * k * k, fan_out=out_channels * k * k, dtype=dtype)
        )
        self.bias = Parameter(np.zeros(out_channels, dtype=dtype))
        self._cache = None

    def forward(self, x: np.ndarray, train: bool = True, need_input_grad: bool = True) -> np.ndarray:
        out, cols = _corr2d(x, self.weight.data, self.pad)
        self._cache = (cols, x.shape, need_input_grad) if train else None
        return out + self.bias.data[None, :, None, None]

    def backward(self, dout: np.ndarray) -> np.ndarray | None:
        cols, x_shape, need_input_grad = self._cache
        c_out = self.out_channels
        dout2d = dout.transpose(1, 0, 2, 3).reshape(c_out, -1)
        self.weight.grad = (dout2d @ cols.T).reshape(self.weight.shape)
        self.bias.grad = dout.sum(axis=(0, 2, 3))
        if not need_input_grad:
            return None
        # input gradient = correlation of dout with channel-swapped, flipped kernels
        swapped = np.ascontiguousarray(self.weight.data.transpose(1, 0, 2, 3)[:, :, ::-1, ::-1])
        dx, _ = _corr2d(dout, swapped, self.pad)
        return dx


class BatchNorm2d:
    """Per-channel normalization over (batch, H, W) with running statistics."""

    def __init__(self, channels: int, momentum: float = 0.9, eps: float = 1e-5, dtype=np.float32):
        self.channels = channels
        self.momentum = momentum
        self.eps = eps
        self.gamma = Parameter(np.ones(channels, dtype=dtype))
        self.beta = Parameter(np.zeros(channels, dtype=dtype))
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        self._cache = None

    def forward(self, x: np.ndarray, train: bool = True) -> np.ndarray:
        if x.shape[1] != self.channels:
            raise ValueError(f"expected {self.channels} channels, got {x.shape[1]}")
        if train:
            if x.shape[0] < 2:
                raise ValueError("batch normalization needs batch size >= 2 in train mode")
            mean = x.mean(axis=(0, 2, 3))
            var = x.var(axis=(0, 2, 3))
            self.running_mean = (self.momentum * self.running_mean + (1 - self.momentum) * mean).astype(x.dtype)
            self.running_var = (self.momentum * self.running_var + (1 - self.momentum) * var).astype(x.dtype)
        else:
            mean, var = self.running_mean, self.running_var
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean[None, :, None, None]) * inv_std[None, :, None, None]
        self._cache = (xhat, inv_std, train)
        return self.gamma.data[None, :, None, None] * xhat + self.beta.data[None, :, None, None]

    def backward(self, dout: np.ndarray) -> np.ndarray:
        xhat, inv_std, train = self._cache
        self.gamma.grad = (dout * xhat).sum(axis=(0, 2, 3))
        self.beta.grad = dout.sum(axis=(0, 2, 3))
        dxhat = dout * self.gamma.data[None, :, None, None]
        if not train:
            return dxhat * inv_std[None, :, None, None]
        n = dout.shape[0] * dout.shape[2] * dout.shape[3]
        sum_dxhat = dxhat.sum(axis=(0, 2, 3), keepdims=True)
        sum_dxhat_xhat = (dxhat * xhat).sum(axis=(0, 2, 3), keepdims=True)
        return (inv_std[None, :, None, None] / n) * (n * dxhat - sum_dxhat - xhat * sum_dxhat_xhat)


class Elu:
    """ELU activation, alpha = 1."""

    def __init__(self):
        self._cache = None

    def forward(self, x: np.ndarray, train: bool = True) -> np.ndarray:
        neg = np.exp(np.minimum(x, 0.0)) - 1.0
        out = np.where(x > 0, x, neg)
        self._cache = (x > 0, neg)
        return out

    def backward(self, dout: np.ndarray) -> np.ndarray:
        positive, neg = self._cache
        return dout * np.where(positive, 1.0, neg + 1.0)


class MaxPool2d:
    """Non-overlapping max pooling; trailing remainder rows/cols are dropped."""

    def __init__(self, pool: tuple[int, int]):
        ph, pw = pool
        if ph < 1 or pw < 1:
            raise ValueError(f"pool dims must be >= 1, got {pool}")
        self.pool = (ph, pw)
        self._cache = None

    def forward(self, x: np.ndarray, train: bool = True) -> np.ndarray:
        ph, pw = self.pool
        b, c, h, w = x.shape
        ho, wo = h // ph, w // pw
        if ho == 0 or wo == 0:
            raise ValueError(f"pool {self.pool} larger than input {(h, w)}")
        windows = (
            x[:, :, : ho * ph, : wo * pw]
            .reshape(b, c, ho, ph, wo, pw)
            .transpose(0, 1, 2, 4, 3, 5)
            .reshape(b, c, ho, wo, ph * pw)
        )
        argmax = windows.argmax(axis=-1)  # first occurrence wins ties
        self._cache = (argmax, x.shape)
        return np.take_along_axis(windows, argmax[..., None], axis=-1)[..., 0]

    def backward(self, dout: np.ndarray) -> np.ndarray:
        argmax, x_shape = self._cache
        ph, pw = self.pool
        b, c, h, w = x_shape
        ho, wo = h // ph, w // pw
        dwindows = np.zeros((b, c, ho, wo, ph * pw), dtype=dout.dtype)
        np.put_along_axis(dwindows, argmax[..., None], dout[..., None], axis=-1)
        dcrop = (
            dwindows.reshape(b, c, ho, wo, ph, pw)
            .transpose(0, 1, 2, 4, 3, 5)
            .reshape(b, c, ho * ph, wo * pw)
        )
        dx = np.zeros(x_shape, dtype=dout.dtype)
        dx[:, :, : ho * ph, : wo * pw] = dcrop
        return dx


class Dropout:
    """Inverted dropout: inference is the identity, training is unbiased."""

    def __init__(self, rate: float, rng: np.random.Generator):
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate
        self.rng = rng
        self.mask = None  # scaled keep mask from the last train-mode forward

    def forward(self, x: np.ndarray, train: bool = True) -> np.ndarray:
        if not train or self.rate == 0.0:
            self.mask = None
            return x
        keep = self.rng.random(x.shape) >= self.rate
        self.mask = keep.astype(x.dtype) / (1.0 - self.rate)
        return x * self.mask

    def backward(self, dout: np.ndarray) -> np.ndarray:
        if self.mask is None:
            return dout
        return dout * self.mask


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class Gru:
    """Gated recurrent unit over (batch, time, features) sequences.

    Update rule per step:
        z = sigmoid(x Wz + h Uz + bz)
        r = sigmoid(x Wr + h Ur + br)
        hbar = tanh(x Wh + (r * h) Uh + bh)
        h' = (1 - z) * h + z * hbar
    """

    def __init__(self, input_size: int, units: int, rng: np.random.Generator, dtype=np.float32):
        self.input_size, self.units = input_size, units
        recur_scale = 1.0 / np.sqrt(units)

        def w():
            return Parameter(glorot_uniform(rng, (input_size, units), input_size, units, dtype))

        def u():
            return Parameter(scaled_uniform(rng, (units, units), recur_scale, dtype))

        self.w_z, self.u_z, self.b_z = w(), u(), Parameter(np.zeros(units, dtype=dtype))
        self.w_r, self.u_r, self.b_r = w(), u(), Parameter(np.zeros(units, dtype=dtype))
        self.w_h, self.u_h, self.b_h = w(), u(), Parameter(np.zeros(units, dtype=dtype))
        self._cache = None

    def forward(self, x: np.ndarray, h0: np.ndarray | None = None, train: bool = True) -> np.ndarray:
        b, t, d = x.shape
        if d != self.input_size:
            raise ValueError(f"expected input size {self.input_size}, got {d}")
        if t < 1:
            raise ValueError("sequence length must be >= 1")
        h = np.zeros((b, self.units), dtype=x.dtype) if h0 is None else h0
        steps = []
        outputs = np.empty((b, t, self.units), dtype=x.dtype)
        for i in range(t):
            xt = x[:, i, :]
            z = _sigmoid(xt @ self.w_z.data + h @ self.u_z.data + self.b_z.data)
            r = _sigmoid(xt @ self.w_r.data + h @ self.u_r.data + self.b_r.data)
            hbar = np.tanh(xt @ self.w_h.data + (r * h) @ self.u_h.data + self.b_h.data)
            h_new = (1.0 - z) * h + z * hbar
            steps.append((xt, h, z, r, hbar))
            outputs[:, i, :] = h_new
            h = h_new
        self._cache = steps
        return outputs

    def backward(self, d_outputs: np.ndarray) -> np.ndarray:
        """Backpropagation through time; d_outputs covers every step."""
        steps = self._cache
        b, t, _ = d_outputs.shape
        dx = np.empty((b, t, self.input_size), dtype=d_outputs.dtype)
        for p in self.parameters():
            p.grad = np.zeros_like(p.data)
        dh = np.zeros((b, self.units), dtype=d_outputs.dtype)
        for i in reversed(range(t)):
            dh = dh + d_outputs[:, i, :]
            xt, h_prev, z, r, hbar = steps[i]
            dz = dh * (hbar - h_prev)
            dhbar = dh * z
            dh_prev = dh * (1.0 - z)

            dah = dhbar * (1.0 - hbar * hbar)
            self.w_h.grad += xt.T @ dah
            self.u_h.grad += (r * h_prev).T @ dah
            self.b_h.grad += dah.sum(axis=0)
            drh = dah @ self.u_h.data.T
            dr = drh * h_prev
            dh_prev += drh * r

            dar = dr * r * (1.0 - r)
            self.w_r.grad += xt.T @ dar
            self.u_r.grad += h_prev.T @ dar
            self.b_r.grad += dar.sum(axis=0)

            daz = dz * z * (1.0 - z)
            self.w_z.grad += xt.T @ daz
            self.u_z.grad += h_prev.T @ daz
            self.b_z.grad += daz.sum(axis=0)

            dh_prev += dar @ self.u_r.data.T + daz @ self.u_z.data.T
            dx[:, i, :] = daz @ self.w_z.data.T + dar @ self.w_r.data.T + dah @ self.w_h.data.T
            dh = dh_prev
        return dx

    def parameters(self) -> list[Parameter]:
        return [self.w_z, self.u_z, self.b_z, self.w_r, self.u_r, self.b_r,
                self.w_h, self.u_h, self.b_h]


class Dense:
    """Affine map y = x W + b."""

    def __init__(self, input_size: int, output_size: int, rng: np.random.Generator, dtype=np.float32):
        self.weight = Parameter(glorot_uniform(rng, (input_size, output_size), input_size, output_size, dtype))
        self.bias = Parameter(np.zeros(output_size, dtype=dtype))
        self._cache = None

    def forward(self, x: np.ndarray, train: bool = True) -> np.ndarray:
        if x.ndim != 2 or x.shape[1] != self.weight.shape[0]:
            raise ValueError(f"expected (batch, {self.weight.shape[0]}) input, got {x.shape}")
        self._cache = x
        return x @ self.weight.data + self.bias.data

    def backward(self, dout: np.ndarray) -> np.ndarray:
        x = self._cache
        self.weight.grad = x.T @ dout
        self.bias.grad = dout.sum(axis=0)
        return dout @ self.weight.data.T


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray):
    """Mean cross-entropy over the batch plus the gradient on the logits.

    Stabilized by max subtraction; the gradient is (softmax - onehot) / batch.
    """
    labels = np.asarray(labels)
    if labels.min(initial=0) < 0 or labels.max(initial=0) >= logits.shape[1]:
        raise ValueError("labels out of range")
    z = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1))
    batch = logits.shape[0]
    loss = float(np.mean(log_norm - z[np.arange(batch), labels]))
    probs = softmax(logits)
    grad = probs.copy()
    grad[np.arange(batch), labels] -= 1.0
    return loss, grad / batch


class Adam:
    """Adam with bias correction over a list of parameters."""

    def __init__(self, params: list[Parameter], lr: float = 1e-4,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.step_count = 0
        self.m = [np.zeros_like(p.data) for p in params]
        self.v = [np.zeros_like(p.data) for p in params]

    def step(self) -> None:
        self.step_count += 1
        t = self.step_count
        for i, p in enumerate(self.params):
            g = p.grad
            self.m[i] = self.beta1 * self.m[i] + (1 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1 - self.beta2) * (g * g)
            m_hat = self.m[i] / (1 - self.beta1**t)
            v_hat = self.v[i] / (1 - self.beta2**t)
            p.data -= (self.lr * m_hat / (np.sqrt(v_hat) + self.eps)).astype(p.data.dtype)


@dataclass
class GradCheckReport:
    max_rel_error: float
    tolerance: float
    n_checked: int

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance


def finite_diff_check(fn, inputs: list[np.ndarray], tolerance: float = 1e-4,
                      step: float = 1e-4) -> GradCheckReport:
    """Check analytic gradients against central finite differences.

    ``fn(inputs)`` must return ``(loss, grads)`` with one gradient array per
    input array. Inputs must be float64; they are perturbed in place and
    restored. The relative error uses a small absolute floor so near-zero
    gradient pairs do not inflate the ratio.
    """
    for a in inputs:
        if a.dtype != np.float64:
            raise ValueError("finite_diff_check requires float64 inputs")
    _, analytic = fn(inputs)
    analytic = [g.copy() for g in analytic]
    max_rel = 0.0
    n_checked = 0
    for a, grad in zip(inputs, analytic):
        flat = a.reshape(-1)
        gflat = grad.reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + step
            loss_plus, _ = fn(inputs)
            flat[j] = orig - step
            loss_minus, _ = fn(inputs)
            flat[j] = orig
            numeric = (loss_plus - loss_minus) / (2.0 * step)
            rel = abs(numeric - gflat[j]) / max(abs(numeric) + abs(gflat[j]), 1e-3)
            max_rel = max(max_rel, rel)
            n_checked += 1
    return GradCheckReport(max_rel_error=max_rel, tolerance=tolerance, n_checked=n_checked)
