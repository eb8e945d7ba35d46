"""Reverse-mode automatic differentiation over numpy arrays.

A small define-by-run tape: every operation on a ``Tensor`` whose inputs
require gradients records a vector-Jacobian closure. ``backward`` walks the
recorded graph once in reverse topological order and accumulates gradients
on the leaves. Float32 is the training dtype; float64 is used by the
finite-difference checks.
"""

from __future__ import annotations

import numpy as np

from .. import backend

_grad_enabled = True
_debug_checks = False
_default_dtype = np.float32


class ShapeError(ValueError):
    """Operand shapes are incompatible for the requested operation."""


class no_grad:
    """Context manager that disables graph recording."""

    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = False
        return self

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._prev
        return False


def set_debug_checks(flag: bool) -> None:
    """Toggle finiteness checking of every op result (test mode)."""
    global _debug_checks
    _debug_checks = bool(flag)


def set_default_dtype(dtype) -> None:
    global _default_dtype
    dtype = np.dtype(dtype)
    if dtype not in (np.float32, np.float64):
        raise ValueError(f"unsupported dtype {dtype}")
    _default_dtype = dtype.type


def get_default_dtype():
    return _default_dtype


class using_dtype:
    """Context manager that switches the default dtype (e.g. fp64 grad checks)."""

    def __init__(self, dtype):
        self._dtype = dtype

    def __enter__(self):
        self._prev = _default_dtype
        set_default_dtype(self._dtype)
        return self

    def __exit__(self, *exc):
        set_default_dtype(self._prev)
        return False


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_vjp", "_freed")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        dt = dtype or _default_dtype
        self.data = np.asarray(data, dtype=dt)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = ()
        self._vjp = None
        self._freed = False

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        grad = ", grad" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype.name}{grad})"

    def numpy(self) -> np.ndarray:
        """The underlying array (not a copy); treat as read-only."""
        return self.data

    def detach(self) -> "Tensor":
        t = Tensor.__new__(Tensor)
        t.data = self.data
        t.requires_grad = False
        t.grad = None
        t._parents = ()
        t._vjp = None
        t._freed = False
        return t

    # -- arithmetic sugar ---------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __sub__(self, other):
        return add(self, mul(other, -1.0) if isinstance(other, Tensor) else -other)

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __truediv__(self, scalar):
        if isinstance(scalar, Tensor):
            raise TypeError("tensor/tensor division is not supported; multiply by a reciprocal")
        return mul(self, 1.0 / float(scalar))

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return slice_(self, idx)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, axes):
        return transpose(self, axes)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis=axis, keepdims=keepdims)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis=axis, keepdims=keepdims)

    def backward(self) -> None:
        """Populate ``grad`` on every requires-grad leaf reachable from this scalar."""
        if self.data.size != 1:
            raise ValueError(f"backward requires a scalar loss, got shape {self.data.shape}")
        if self._freed:
            raise RuntimeError("backward was already called on this graph; re-record the forward pass")
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in visited:
                    stack.append((p, False))

        grads: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        for node in reversed(topo):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._vjp is not None:
                for parent, pg in node._vjp(g):
                    if not parent.requires_grad:
                        continue
                    acc = grads.get(id(parent))
                    grads[id(parent)] = pg if acc is None else acc + pg
            elif node.requires_grad:
                node.grad = g.copy() if node.grad is None else node.grad + g
        for node in topo:
            if node._vjp is not None:
                node._vjp = None
                node._parents = ()
                node._freed = True
        self._freed = True


def _result(data: np.ndarray, parents: tuple, vjp) -> Tensor:
    if _debug_checks and not np.all(np.isfinite(data)):
        raise FloatingPointError("non-finite values produced by a tensor kernel")
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out._freed = False
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._vjp = vjp
    else:
        out.requires_grad = False
        out._parents = ()
        out._vjp = None
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum grad over axes that were broadcast to reach ``grad.shape``."""
    extra = grad.ndim - len(shape)
    if extra:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _coerce(x, like: Tensor) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=like.data.dtype))


# -- kernels ----------------------------------------------------------------

def add(a: Tensor, b) -> Tensor:
    b = _coerce(b, a)
    try:
        data = a.data + b.data
    except ValueError:
        raise ShapeError(f"add: shapes {a.shape} and {b.shape} do not broadcast") from None

    def vjp(g):
        return ((a, _unbroadcast(g, a.shape)), (b, _unbroadcast(g, b.shape)))

    return _result(data, (a, b), vjp)


def mul(a: Tensor, b) -> Tensor:
    b = _coerce(b, a)
    try:
        data = a.data * b.data
    except ValueError:
        raise ShapeError(f"mul: shapes {a.shape} and {b.shape} do not broadcast") from None

    def vjp(g):
        return (
            (a, _unbroadcast(g * b.data, a.shape)),
            (b, _unbroadcast(g * a.data, b.shape)),
        )

    return _result(data, (a, b), vjp)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul requires ndim >= 2, got {a.shape} @ {b.shape}")
    if a.shape[-1] != b.shape[-2] or a.shape[:-2] != b.shape[:-2]:
        raise ShapeError(f"matmul: shapes {a.shape} and {b.shape} are incompatible")
    data = a.data @ b.data

    def vjp(g):
        return (
            (a, g @ b.data.swapaxes(-1, -2)),
            (b, a.data.swapaxes(-1, -2) @ g),
        )

    return _result(data, (a, b), vjp)


def transpose(a: Tensor, axes) -> Tensor:
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))

    def vjp(g):
        return ((a, np.ascontiguousarray(g.transpose(inv))),)

    return _result(np.ascontiguousarray(a.data.transpose(axes)), (a,), vjp)


def reshape(a: Tensor, shape) -> Tensor:
    shape = tuple(shape)
    try:
        data = a.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot view {a.shape} as {shape}") from None

    def vjp(g):
        return ((a, g.reshape(a.shape)),)

    return _result(data, (a,), vjp)


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = list(tensors)
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def vjp(g):
        out = []
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(lo, hi)
            out.append((t, np.ascontiguousarray(g[tuple(idx)])))
        return tuple(out)

    return _result(data, tuple(tensors), vjp)


def _is_basic_index(idx) -> bool:
    parts = idx if isinstance(idx, tuple) else (idx,)
    return all(isinstance(p, (int, np.integer, slice)) or p is None or p is Ellipsis
               for p in parts)


def slice_(a: Tensor, idx) -> Tensor:
    data = a.data[idx]
    if not isinstance(data, np.ndarray):
        data = np.asarray(data, dtype=a.data.dtype)
    basic = _is_basic_index(idx)

    def vjp(g):
        full = np.zeros_like(a.data)
        if basic:
            full[idx] += g
        else:
            np.add.at(full, idx, g)  # advanced indices may repeat
        return ((a, full),)

    return _result(np.ascontiguousarray(data), (a,), vjp)


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    data = a.data.mean(axis=axis, keepdims=keepdims)
    count = a.size if axis is None else np.prod([a.shape[i] for i in np.atleast_1d(axis)])

    def vjp(g):
        g = np.asarray(g)
        if not keepdims and axis is not None:
            g = np.expand_dims(g, axis)
        return ((a, np.broadcast_to(g, a.shape).astype(a.data.dtype) / count),)

    return _result(np.asarray(data, dtype=a.data.dtype), (a,), vjp)


def sum_(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def vjp(g):
        g = np.asarray(g)
        if not keepdims and axis is not None:
            g = np.expand_dims(g, axis)
        return ((a, np.broadcast_to(g, a.shape).astype(a.data.dtype).copy()),)

    return _result(np.asarray(data, dtype=a.data.dtype), (a,), vjp)


def softmax(a: Tensor) -> Tensor:
    """Softmax over the last axis."""
    y = backend.softmax_lastdim(a.data)

    def vjp(g):
        return ((a, backend.softmax_lastdim_grad(y, np.ascontiguousarray(g))),)

    return _result(y, (a,), vjp)


def layer_norm(a: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit variance (no affine)."""
    y, mu, rstd = backend.layernorm_lastdim(a.data, eps)

    def vjp(g):
        return ((a, backend.layernorm_lastdim_grad(a.data, mu, rstd, np.ascontiguousarray(g))),)

    return _result(y, (a,), vjp)


def gelu(a: Tensor) -> Tensor:
    """GELU with the tanh approximation."""
    y = backend.gelu(a.data)

    def vjp(g):
        return ((a, backend.gelu_grad(a.data, np.ascontiguousarray(g))),)

    return _result(y, (a,), vjp)


def l2_normalize(a: Tensor, eps: float = 1e-8) -> Tensor:
    """Normalize the last axis to unit Euclidean length."""
    norm = np.sqrt((a.data * a.data).sum(axis=-1, keepdims=True) + eps)
    y = a.data / norm

    def vjp(g):
        dot = (g * y).sum(axis=-1, keepdims=True)
        return ((a, (g - y * dot) / norm),)

    return _result(y, (a,), vjp)


def unfold_tokens(a: Tensor, size: int, stride: int) -> Tensor:
    """Extract square tokens from the two trailing axes.

    (..., H, W) -> (..., n_tokens, size*size) with token origins on a
    ``stride`` grid, row-major token order.
    """
    h, w = a.shape[-2], a.shape[-1]
    if size > h or size > w:
        raise ShapeError(f"unfold: token size {size} exceeds extents {(h, w)}")
    if (h - size) % stride or (w - size) % stride:
        raise ShapeError(f"unfold: extents {(h, w)} not divisible by stride {stride} for size {size}")
    nh = (h - size) // stride + 1
    nw = (w - size) // stride + 1
    lead = a.shape[:-2]
    win = np.lib.stride_tricks.sliding_window_view(a.data, (size, size), axis=(-2, -1))
    win = win[..., ::stride, ::stride, :, :]
    data = np.ascontiguousarray(win).reshape(lead + (nh * nw, size * size))

    def vjp(g):
        g = g.reshape(lead + (nh, nw, size, size))
        full = np.zeros_like(a.data)
        for ih in range(nh):
            for iw in range(nw):
                full[..., ih * stride:ih * stride + size, iw * stride:iw * stride + size] += g[..., ih, iw, :, :]
        return ((a, full),)

    return _result(data, (a,), vjp)


def embedding(table: Tensor, ids) -> Tensor:
    """Row lookup ``table[ids]`` with gradient scatter-add into the table."""
    ids = np.asarray(ids)
    data = np.ascontiguousarray(table.data[ids])

    def vjp(g):
        full = np.zeros_like(table.data)
        np.add.at(full, ids, g)
        return ((table, full),)

    return _result(data, (table,), vjp)


def cross_entropy_log_targets(logits: Tensor, log_targets) -> Tensor:
    """Mean cross-entropy of ``softmax(logits)`` against fixed log-space targets.

    ``log_targets`` is a constant array of log-probabilities with the same
    shape as ``logits``; the loss is averaged over all leading rows.
    """
    lt = log_targets.data if isinstance(log_targets, Tensor) else np.asarray(log_targets)
    if lt.shape != logits.shape:
        raise ShapeError(f"cross_entropy: logits {logits.shape} vs targets {lt.shape}")
    x = logits.data
    m = x.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(x - m).sum(axis=-1, keepdims=True)) + m
    logp = x - lse
    t = np.exp(lt)
    rows = max(1, x.size // x.shape[-1])
    loss = -(t * logp).sum() / rows

    def vjp(g):
        p = np.exp(logp)
        tsum = t.sum(axis=-1, keepdims=True)
        return ((logits, (g * (p * tsum - t) / rows).astype(x.dtype)),)

    return _result(np.asarray(loss, dtype=x.dtype), (logits,), vjp)
