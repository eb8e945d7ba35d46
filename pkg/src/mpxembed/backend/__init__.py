"""Kernel backend selection.

The heavy elementwise/reduction kernels exist twice: a Cython extension
(``_fastops``) and a numpy fallback (``numpy_ops``). The extension is used
when importable; ``MPXEMBED_BACKEND=numpy`` forces the fallback and
``MPXEMBED_BACKEND=native`` makes a missing extension a hard error.

Matrix multiplication is not duplicated here: both backends rely on
numpy's BLAS for that.
"""

import os

import numpy as np

from . import numpy_ops

_requested = os.environ.get("MPXEMBED_BACKEND", "auto").lower()
if _requested not in ("auto", "native", "numpy"):
    raise RuntimeError(f"MPXEMBED_BACKEND must be auto|native|numpy, got {_requested!r}")

if _requested == "numpy":
    _impl = numpy_ops
    BACKEND = "numpy"
else:
    try:
        from . import _fastops as _impl  # type: ignore[attr-defined]

        BACKEND = "native"
    except ImportError:
        if _requested == "native":
            raise RuntimeError(
                "MPXEMBED_BACKEND=native but the compiled extension is missing; "
                "reinstall the package or use MPXEMBED_BACKEND=numpy"
            ) from None
        _impl = numpy_ops
        BACKEND = "numpy"


def backend_name() -> str:
    return BACKEND


def _flat(x):
    return np.ascontiguousarray(x).reshape(-1)


def _rows(x):
    x = np.ascontiguousarray(x)
    return x.reshape(-1, x.shape[-1])


def gelu(x):
    out = np.empty_like(x)
    _impl.gelu_fwd(_flat(x), out.reshape(-1))
    return out


def gelu_grad(x, gout):
    gin = np.empty_like(x)
    _impl.gelu_bwd(_flat(x), _flat(gout), gin.reshape(-1))
    return gin


def softmax_lastdim(x):
    out = np.empty_like(x)
    _impl.softmax_fwd(_rows(x), out.reshape(-1, x.shape[-1]))
    return out


def softmax_lastdim_grad(y, gout):
    gin = np.empty_like(y)
    _impl.softmax_bwd(_rows(y), _rows(gout), gin.reshape(-1, y.shape[-1]))
    return gin


def layernorm_lastdim(x, eps):
    out = np.empty_like(x)
    rows = x.size // x.shape[-1]
    mean = np.empty(rows, dtype=x.dtype)
    rstd = np.empty(rows, dtype=x.dtype)
    _impl.layernorm_fwd(_rows(x), float(eps), out.reshape(-1, x.shape[-1]), mean, rstd)
    return out, mean, rstd


def layernorm_lastdim_grad(x, mean, rstd, gout):
    gin = np.empty_like(x)
    _impl.layernorm_bwd(_rows(x), mean, rstd, _rows(gout), gin.reshape(-1, x.shape[-1]))
    return gin


def adamw_update(p, g, m, v, lr, beta1, beta2, eps, weight_decay, t):
    """Fused in-place AdamW step on one parameter array (decoupled decay)."""
    _impl.adamw_update(
        p.reshape(-1), _flat(g), m.reshape(-1), v.reshape(-1),
        float(lr), float(beta1), float(beta2), float(eps), float(weight_decay), int(t),
    )


def ema_update(target, source, momentum):
    """In-place ``target = momentum * target + (1 - momentum) * source``."""
    _impl.ema_update(target.reshape(-1), source.reshape(-1), float(momentum))
