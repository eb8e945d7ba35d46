# cython: boundscheck=False, wraparound=False, cdivision=True, nonecheck=False
"""Fused single-pass kernels for the training hot loop.

Covers the elementwise/reduction operations that dominate step time once
matrix multiplies are delegated to BLAS: GELU, row softmax, row layer norm
(forward and backward for each), and the fused AdamW / EMA parameter
updates. Float32 inputs use single-precision libm calls. Loops stay
serial: the arrays are small enough that extra threads would only fight
the BLAS pool. The numpy fallback in ``numpy_ops`` implements the same
signatures.
"""

import numpy as np

cimport cython
from libc.math cimport exp, expf, sqrt, tanh, tanhf

ctypedef fused real:
    float
    double

DEF GELU_C = 0.7978845608028654      # sqrt(2/pi)
DEF GELU_A = 0.044715


cdef inline real _tanh(real v) noexcept nogil:
    if real is float:
        return tanhf(v)
    else:
        return tanh(v)


cdef inline real _exp(real v) noexcept nogil:
    if real is float:
        return expf(v)
    else:
        return exp(v)


def gelu_fwd(real[::1] x, real[::1] out):
    cdef Py_ssize_t i, n = x.shape[0]
    cdef real v, u
    for i in range(n):
        v = x[i]
        u = _tanh(<real>(GELU_C * (v + GELU_A * v * v * v)))
        out[i] = <real>0.5 * v * (<real>1.0 + u)
    return None


def gelu_bwd(real[::1] x, real[::1] gout, real[::1] gin):
    cdef Py_ssize_t i, n = x.shape[0]
    cdef real v, t, sech2, du
    for i in range(n):
        v = x[i]
        t = _tanh(<real>(GELU_C * (v + GELU_A * v * v * v)))
        sech2 = <real>1.0 - t * t
        du = <real>GELU_C * (<real>1.0 + <real>(3.0 * GELU_A) * v * v)
        gin[i] = gout[i] * (<real>0.5 * (<real>1.0 + t) + <real>0.5 * v * sech2 * du)
    return None


def softmax_fwd(real[:, ::1] x, real[:, ::1] out):
    cdef Py_ssize_t r, c, rows = x.shape[0], cols = x.shape[1]
    cdef real m, s, e
    for r in range(rows):
        m = x[r, 0]
        for c in range(1, cols):
            if x[r, c] > m:
                m = x[r, c]
        s = <real>0.0
        for c in range(cols):
            e = _exp(x[r, c] - m)
            out[r, c] = e
            s = s + e
        s = <real>1.0 / s
        for c in range(cols):
            out[r, c] = out[r, c] * s
    return None


def softmax_bwd(real[:, ::1] y, real[:, ::1] gout, real[:, ::1] gin):
    cdef Py_ssize_t r, c, rows = y.shape[0], cols = y.shape[1]
    cdef double dot
    for r in range(rows):
        dot = 0.0
        for c in range(cols):
            dot = dot + <double>y[r, c] * <double>gout[r, c]
        for c in range(cols):
            gin[r, c] = <real>(<double>y[r, c] * (<double>gout[r, c] - dot))
    return None


def layernorm_fwd(real[:, ::1] x, double eps, real[:, ::1] out,
                  real[::1] mean, real[::1] rstd):
    cdef Py_ssize_t r, c, rows = x.shape[0], cols = x.shape[1]
    cdef double mu, var, d, rs
    for r in range(rows):
        mu = 0.0
        for c in range(cols):
            mu = mu + x[r, c]
        mu = mu / cols
        var = 0.0
        for c in range(cols):
            d = <double>x[r, c] - mu
            var = var + d * d
        var = var / cols
        rs = 1.0 / sqrt(var + eps)
        mean[r] = <real>mu
        rstd[r] = <real>rs
        for c in range(cols):
            out[r, c] = <real>((<double>x[r, c] - mu) * rs)
    return None


def layernorm_bwd(real[:, ::1] x, real[::1] mean, real[::1] rstd,
                  real[:, ::1] gout, real[:, ::1] gin):
    cdef Py_ssize_t r, c, rows = x.shape[0], cols = x.shape[1]
    cdef double mu, rs, gmean, xhat, gxmean
    for r in range(rows):
        mu = mean[r]
        rs = rstd[r]
        gmean = 0.0
        gxmean = 0.0
        for c in range(cols):
            xhat = (<double>x[r, c] - mu) * rs
            gmean = gmean + gout[r, c]
            gxmean = gxmean + <double>gout[r, c] * xhat
        gmean = gmean / cols
        gxmean = gxmean / cols
        for c in range(cols):
            xhat = (<double>x[r, c] - mu) * rs
            gin[r, c] = <real>(rs * (<double>gout[r, c] - gmean - xhat * gxmean))
    return None


def adamw_update(real[::1] p, real[::1] g, real[::1] m, real[::1] v,
                 double lr, double beta1, double beta2, double eps,
                 double weight_decay, long t):
    cdef Py_ssize_t i, n = p.shape[0]
    cdef double bc1 = 1.0 - beta1 ** t
    cdef double bc2 = 1.0 - beta2 ** t
    cdef double mi, vi
    for i in range(n):
        mi = beta1 * m[i] + (1.0 - beta1) * g[i]
        vi = beta2 * v[i] + (1.0 - beta2) * (<double>g[i] * <double>g[i])
        m[i] = <real>mi
        v[i] = <real>vi
        p[i] = <real>(<double>p[i] - lr * weight_decay * <double>p[i]
                      - lr * (mi / bc1) / (sqrt(vi / bc2) + eps))
    return None


def ema_update(real[::1] target, real[::1] source, double momentum):
    cdef Py_ssize_t i, n = target.shape[0]
    for i in range(n):
        target[i] = <real>(momentum * <double>target[i]
                           + (1.0 - momentum) * <double>source[i])
    return None
