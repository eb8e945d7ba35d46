"""Pure-numpy implementations of the hot kernels.

Used when the compiled extension is unavailable or when the
``MPXEMBED_BACKEND=numpy`` override is set. Signatures and semantics match
``_fastops`` exactly; outputs agree within floating-point reduction-order
differences.
"""

import numpy as np

_GELU_C = 0.7978845608028654  # sqrt(2/pi)
_GELU_A = 0.044715


def gelu_fwd(x, out):
    t = np.tanh(_GELU_C * (x + _GELU_A * x * x * x))
    np.multiply(0.5 * x, 1.0 + t, out=out)


def gelu_bwd(x, gout, gin):
    t = np.tanh(_GELU_C * (x + _GELU_A * x * x * x))
    du = _GELU_C * (1.0 + 3.0 * _GELU_A * x * x)
    np.multiply(gout, 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du, out=gin)


def softmax_fwd(x, out):
    m = x.max(axis=1, keepdims=True)
    np.exp(x - m, out=out)
    out /= out.sum(axis=1, keepdims=True)


def softmax_bwd(y, gout, gin):
    dot = (y * gout).sum(axis=1, keepdims=True)
    np.multiply(y, gout - dot, out=gin)


def layernorm_fwd(x, eps, out, mean, rstd):
    mu = x.mean(axis=1)
    var = x.var(axis=1)
    rs = 1.0 / np.sqrt(var + eps)
    mean[:] = mu
    rstd[:] = rs
    np.multiply(x - mu[:, None], rs[:, None], out=out)


def layernorm_bwd(x, mean, rstd, gout, gin):
    xhat = (x - mean[:, None]) * rstd[:, None]
    gmean = gout.mean(axis=1, keepdims=True)
    gxmean = (gout * xhat).mean(axis=1, keepdims=True)
    np.multiply(rstd[:, None], gout - gmean - xhat * gxmean, out=gin)


def adamw_update(p, g, m, v, lr, beta1, beta2, eps, weight_decay, t):
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * g * g
    mhat = m / (1.0 - beta1**t)
    vhat = v / (1.0 - beta2**t)
    p -= lr * weight_decay * p
    p -= lr * mhat / (np.sqrt(vhat) + eps)


def ema_update(target, source, momentum):
    target *= momentum
    target += (1.0 - momentum) * source
