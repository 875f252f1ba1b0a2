"""Dense float64 tensors with a taped reverse-mode gradient engine.

The op set is deliberately minimal: exactly what a recurrent Q-network, a
state-conditioned monotonic mixer, and a two-layer distillation pair need.
Everything is 64-bit and row-major.  Broadcasting is limited to bias-style
adds and batched matmuls with equal batch dimensions; anything more exotic
raises ``DimensionError``.
"""

from __future__ import annotations

import contextlib
import math
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np


class DimensionError(ValueError):
    """Operand shapes do not conform."""


class NumericError(ArithmeticError):
    """A non-finite value reached a point where finiteness is contractual."""


_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    """Disable tape recording inside the block (forward values only)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def grad_enabled() -> bool:
    return _GRAD_ENABLED


class Tensor:
    """A dense float64 array plus an optional gradient and tape hook.

    Tensors produced by ops are treated as immutable; parameter tensors are
    mutated only by the optimizer between forward passes.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_bwd")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self._parents: tuple = ()
        self._bwd: Optional[Callable[[np.ndarray], None]] = None

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # operator sugar; all routed through the module-level ops
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return add(neg(self), other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(data: np.ndarray, parents: Sequence[Tensor], bwd: Callable) -> Tensor:
    out = Tensor(data)
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._bwd = bwd
    return out


def _accum(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        # copy: g may be a view into (or alias of) another node's buffer
        t.grad = np.array(g)
    else:
        t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a gradient back down to ``shape`` after numpy broadcasting."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# arithmetic


def add(a: Tensor, b) -> Tensor:
    a = as_tensor(a)
    if isinstance(b, (int, float)):
        out_data = a.data + b

        def bwd(g):
            _accum(a, g)

        return _node(out_data, (a,), bwd)
    b = as_tensor(b)
    try:
        out_data = a.data + b.data
    except ValueError as exc:
        raise DimensionError(f"add: shapes {a.shape} and {b.shape} do not broadcast") from exc

    def bwd(g):
        _accum(a, _unbroadcast(g, a.shape))
        _accum(b, _unbroadcast(g, b.shape))

    return _node(out_data, (a, b), bwd)


def sub(a: Tensor, b) -> Tensor:
    a = as_tensor(a)
    if isinstance(b, (int, float)):
        out_data = a.data - b

        def bwd(g):
            _accum(a, g)

        return _node(out_data, (a,), bwd)
    b = as_tensor(b)
    try:
        out_data = a.data - b.data
    except ValueError as exc:
        raise DimensionError(f"sub: shapes {a.shape} and {b.shape} do not broadcast") from exc

    def bwd(g):
        _accum(a, _unbroadcast(g, a.shape))
        _accum(b, _unbroadcast(-g, b.shape))

    return _node(out_data, (a, b), bwd)


def neg(a: Tensor) -> Tensor:
    a = as_tensor(a)

    def bwd(g):
        _accum(a, -g)

    return _node(-a.data, (a,), bwd)


def mul(a: Tensor, b) -> Tensor:
    a = as_tensor(a)
    if isinstance(b, (int, float)):
        c = float(b)
        out_data = a.data * c

        def bwd(g):
            _accum(a, g * c)

        return _node(out_data, (a,), bwd)
    b = as_tensor(b)
    try:
        out_data = a.data * b.data
    except ValueError as exc:
        raise DimensionError(f"mul: shapes {a.shape} and {b.shape} do not broadcast") from exc

    def bwd(g):
        _accum(a, _unbroadcast(g * b.data, a.shape))
        _accum(b, _unbroadcast(g * a.data, b.shape))

    return _node(out_data, (a, b), bwd)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product: 2-D x 2-D, 1-D x 2-D, or batched 3-D with equal batch."""
    a = as_tensor(a)
    b = as_tensor(b)
    if a.ndim == 3 and b.ndim == 3 and a.shape[0] != b.shape[0]:
        raise DimensionError(f"matmul: batch dims {a.shape} vs {b.shape}")
    try:
        out_data = np.matmul(a.data, b.data)
    except ValueError as exc:
        raise DimensionError(f"matmul: shapes {a.shape} and {b.shape}") from exc

    def bwd(g):
        if a.requires_grad:
            if b.ndim == 1:
                _accum(a, np.outer(g, b.data) if a.ndim == 2 else g * b.data)
            elif a.ndim == 1:
                _accum(a, np.matmul(g, b.data.T))
            else:
                _accum(a, np.matmul(g, b.data.swapaxes(-1, -2)))
        if b.requires_grad:
            if a.ndim == 1:
                _accum(b, np.outer(a.data, g))
            else:
                _accum(b, np.matmul(a.data.swapaxes(-1, -2), g))

    return _node(out_data, (a, b), bwd)


def affine(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """y = x . w^T + b with w of shape (out, in) and b of shape (out,)."""
    x = as_tensor(x)
    w = as_tensor(w)
    b = as_tensor(b)
    if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
        raise DimensionError(f"affine: weight {w.shape} and bias {b.shape} do not pair")
    if x.shape[-1] != w.shape[1]:
        raise DimensionError(f"affine: input {x.shape} does not match weight {w.shape}")
    out_data = np.matmul(x.data, w.data.T) + b.data
    n_in = w.shape[1]
    n_out = w.shape[0]

    def bwd(g):
        if x.requires_grad:
            _accum(x, np.matmul(g, w.data))
        if w.requires_grad or b.requires_grad:
            g2 = g.reshape(-1, n_out)
            if w.requires_grad:
                _accum(w, g2.T @ x.data.reshape(-1, n_in))
            if b.requires_grad:
                _accum(b, g2.sum(axis=0))

    return _node(out_data, (x, w, b), bwd)


def linear(x: Tensor, w: Tensor) -> Tensor:
    """y = x . w^T, the bias-free half of affine."""
    x = as_tensor(x)
    w = as_tensor(w)
    if w.ndim != 2 or x.shape[-1] != w.shape[1]:
        raise DimensionError(f"linear: input {x.shape} does not match weight {w.shape}")
    out_data = np.matmul(x.data, w.data.T)
    n_in = w.shape[1]
    n_out = w.shape[0]

    def bwd(g):
        if x.requires_grad:
            _accum(x, np.matmul(g, w.data))
        if w.requires_grad:
            _accum(w, g.reshape(-1, n_out).T @ x.data.reshape(-1, n_in))

    return _node(out_data, (x, w), bwd)


# ---------------------------------------------------------------------------
# activations


def relu(x: Tensor) -> Tensor:
    x = as_tensor(x)
    out_data = np.maximum(x.data, 0.0)

    def bwd(g):
        _accum(x, g * (x.data > 0.0))

    return _node(out_data, (x,), bwd)


def elu(x: Tensor, a: float = 1.0) -> Tensor:
    x = as_tensor(x)
    expm = a * (np.exp(np.minimum(x.data, 0.0)) - 1.0)
    out_data = np.where(x.data >= 0.0, x.data, expm)

    def bwd(g):
        _accum(x, g * np.where(x.data >= 0.0, 1.0, expm + a))

    return _node(out_data, (x,), bwd)


def sigmoid(x: Tensor) -> Tensor:
    x = as_tensor(x)
    out_data = 1.0 / (1.0 + np.exp(-x.data))

    def bwd(g):
        _accum(x, g * out_data * (1.0 - out_data))

    return _node(out_data, (x,), bwd)


def tanh(x: Tensor) -> Tensor:
    x = as_tensor(x)
    out_data = np.tanh(x.data)

    def bwd(g):
        _accum(x, g * (1.0 - out_data * out_data))

    return _node(out_data, (x,), bwd)


def abs_(x: Tensor) -> Tensor:
    x = as_tensor(x)

    def bwd(g):
        _accum(x, g * np.sign(x.data))

    return _node(np.abs(x.data), (x,), bwd)


# ---------------------------------------------------------------------------
# shape manipulation


def reshape(x: Tensor, shape) -> Tensor:
    x = as_tensor(x)
    out_data = x.data.reshape(shape)

    def bwd(g):
        _accum(x, g.reshape(x.data.shape))

    return _node(out_data, (x,), bwd)


def transpose(x: Tensor, axes) -> Tensor:
    x = as_tensor(x)
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))
    out_data = np.transpose(x.data, axes)

    def bwd(g):
        _accum(x, np.transpose(g, inv))

    return _node(np.ascontiguousarray(out_data), (x,), bwd)


def stack0(tensors: Sequence[Tensor]) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    out_data = np.stack([t.data for t in ts], axis=0)

    def bwd(g):
        for k, t in enumerate(ts):
            _accum(t, g[k])

    return _node(out_data, ts, bwd)


def split0(x: Tensor) -> list[Tensor]:
    """Views of x along axis 0; slice gradients accumulate into one buffer."""
    x = as_tensor(x)

    def make_bwd(t):
        def bwd(g):
            if x.requires_grad:
                if x.grad is None:
                    x.grad = np.zeros_like(x.data)
                x.grad[t] += g
        return bwd

    return [_node(x.data[t], (x,), make_bwd(t)) for t in range(x.shape[0])]


def gather_last(x: Tensor, idx: np.ndarray) -> Tensor:
    """Pick x[..., idx[...]] along the trailing axis (one index per row)."""
    x = as_tensor(x)
    idx = np.asarray(idx, dtype=np.int64)
    if idx.shape != x.shape[:-1]:
        raise DimensionError(f"gather_last: index {idx.shape} vs values {x.shape}")
    out_data = np.take_along_axis(x.data, idx[..., None], axis=-1)[..., 0]

    def bwd(g):
        if x.requires_grad:
            gx = np.zeros_like(x.data)
            # one index per row, so positions are unique and assignment suffices
            np.put_along_axis(gx, idx[..., None], g[..., None], axis=-1)
            _accum(x, gx)

    return _node(out_data, (x,), bwd)


def where_mask(x: Tensor, mask: np.ndarray) -> Tensor:
    """Zero out entries where mask is falsy; gradients do not flow there."""
    x = as_tensor(x)
    keep = np.asarray(mask, dtype=bool)
    out_data = np.where(keep, x.data, 0.0)

    def bwd(g):
        _accum(x, np.where(keep, g, 0.0))

    return _node(out_data, (x,), bwd)


# ---------------------------------------------------------------------------
# reductions


def sum_(x: Tensor) -> Tensor:
    x = as_tensor(x)
    out_data = np.asarray(x.data.sum())

    def bwd(g):
        _accum(x, np.broadcast_to(g, x.data.shape).copy() if np.ndim(g) else np.full_like(x.data, float(g)))

    return _node(out_data, (x,), bwd)


def sum_axis(x: Tensor, axis: int) -> Tensor:
    x = as_tensor(x)
    out_data = x.data.sum(axis=axis)

    def bwd(g):
        _accum(x, np.broadcast_to(np.expand_dims(g, axis), x.data.shape))

    return _node(out_data, (x,), bwd)


def mean_(x: Tensor) -> Tensor:
    x = as_tensor(x)
    n = x.data.size
    out_data = np.asarray(x.data.mean())

    def bwd(g):
        _accum(x, np.full_like(x.data, float(g) / n))

    return _node(out_data, (x,), bwd)


# ---------------------------------------------------------------------------
# recurrent cell


class GruParams(NamedTuple):
    """Six weight matrices and three bias vectors of a GRU cell."""

    w_r: Tensor
    u_r: Tensor
    b_r: Tensor
    w_z: Tensor
    u_z: Tensor
    b_z: Tensor
    w_n: Tensor
    u_n: Tensor
    b_n: Tensor


def gru_cell(x: Tensor, h_prev: Tensor, p: GruParams) -> Tensor:
    """One GRU step.

    r = sigmoid(W_r x + U_r h + b_r)
    z = sigmoid(W_z x + U_z h + b_z)
    n = tanh(W_n x + r * (U_n h + b_n))
    h' = (1 - z) * n + z * h_prev
    """
    x = as_tensor(x)
    h_prev = as_tensor(h_prev)
    if x.shape[-1] != p.w_r.shape[1]:
        raise DimensionError(f"gru_cell: input {x.shape} vs W_r {p.w_r.shape}")
    if h_prev.shape[-1] != p.u_r.shape[1]:
        raise DimensionError(f"gru_cell: hidden {h_prev.shape} vs U_r {p.u_r.shape}")
    r = sigmoid(add(affine(x, p.w_r, p.b_r), linear(h_prev, p.u_r)))
    z = sigmoid(add(affine(x, p.w_z, p.b_z), linear(h_prev, p.u_z)))
    n = tanh(add(linear(x, p.w_n), mul(r, affine(h_prev, p.u_n, p.b_n))))
    return add(mul(sub(1.0, z), n), mul(z, h_prev))


def gru_sequence(
    xr: Tensor,
    xz: Tensor,
    xn: Tensor,
    u_r: Tensor,
    u_z: Tensor,
    u_n: Tensor,
    b_n: Tensor,
) -> Tensor:
    """Run the gru_cell recurrence over a whole (T, rows, H) sequence.

    xr/xz/xn are the precomputed input-side projections (xr and xz with
    their biases already added; xn without bias, since b_n sits inside the
    reset product).  The recurrence starts from a zero hidden state and the
    backward pass is hand-derived truncated-free BPTT, which avoids building
    one tape node per gate per timestep.
    """
    for name, t3 in (("xr", xr), ("xz", xz), ("xn", xn)):
        if t3.ndim != 3:
            raise DimensionError(f"gru_sequence: {name} must be (T, rows, H), got {t3.shape}")
    t_max, rows, width = xr.shape
    r_all = np.empty((t_max, rows, width))
    z_all = np.empty((t_max, rows, width))
    n_all = np.empty((t_max, rows, width))
    u_all = np.empty((t_max, rows, width))
    h_all = np.empty((t_max, rows, width))
    urt, uzt, unt = u_r.data.T, u_z.data.T, u_n.data.T
    h = np.zeros((rows, width))
    for t in range(t_max):
        r = 1.0 / (1.0 + np.exp(-(xr.data[t] + h @ urt)))
        z = 1.0 / (1.0 + np.exp(-(xz.data[t] + h @ uzt)))
        u = h @ unt + b_n.data
        n = np.tanh(xn.data[t] + r * u)
        r_all[t], z_all[t], n_all[t], u_all[t] = r, z, n, u
        h = (1.0 - z) * n + z * h
        h_all[t] = h

    def bwd(g):
        dxr = np.empty_like(r_all)
        dxz = np.empty_like(r_all)
        dxn = np.empty_like(r_all)
        du_r = np.zeros_like(u_r.data)
        du_z = np.zeros_like(u_z.data)
        du_n = np.zeros_like(u_n.data)
        db_n = np.zeros_like(b_n.data)
        carry = np.zeros((rows, width))
        for t in range(t_max - 1, -1, -1):
            dh = g[t] + carry
            h_prev = h_all[t - 1] if t > 0 else np.zeros((rows, width))
            r, z, n, u = r_all[t], z_all[t], n_all[t], u_all[t]
            dn = dh * (1.0 - z)
            da_n = dn * (1.0 - n * n)
            dxn[t] = da_n
            du = da_n * r
            da_r = (da_n * u) * r * (1.0 - r)
            dxr[t] = da_r
            da_z = (dh * (h_prev - n)) * z * (1.0 - z)
            dxz[t] = da_z
            carry = dh * z + da_z @ u_z.data + da_r @ u_r.data + du @ u_n.data
            du_r += da_r.T @ h_prev
            du_z += da_z.T @ h_prev
            du_n += du.T @ h_prev
            db_n += du.sum(axis=0)
        _accum(xr, dxr)
        _accum(xz, dxz)
        _accum(xn, dxn)
        _accum(u_r, du_r)
        _accum(u_z, du_z)
        _accum(u_n, du_n)
        _accum(b_n, db_n)

    return _node(h_all, (xr, xz, xn, u_r, u_z, u_n, b_n), bwd)


# ---------------------------------------------------------------------------
# backward driver


def backward(loss: Tensor) -> None:
    """Populate .grad on every tensor the scalar loss depends on."""
    if loss.data.size != 1:
        raise DimensionError(f"backward expects a scalar loss, got shape {loss.shape}")
    if not math.isfinite(float(loss.data)):
        raise NumericError(f"loss is not finite: {float(loss.data)!r}")
    if not loss.requires_grad:
        return

    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))

    loss.grad = np.ones_like(loss.data)
    for node in reversed(topo):
        if node._bwd is not None and node.grad is not None:
            node._bwd(node.grad)
        if node is not loss and node._bwd is not None:
            node.grad = None  # free intermediate gradient storage
