"""A small reverse-mode autodiff engine over float64 numpy arrays.

Operations are recorded on the active :class:`Tape` (entered with ``with
Tape() as tape:``). Outside a tape every primitive simply computes its value,
which is how inference and finite-difference evaluation run.

    with Tape() as tape:
        loss = mse_loss(model(x), y)
    grads = tape.backward(loss, params)
"""

from __future__ import annotations

import contextvars
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from lznet import vsa


class ShapeError(ValueError):
    pass


class NonDifferentiableError(RuntimeError):
    """Gradient requested through an operation that has no adjoint."""


class TapeError(RuntimeError):
    pass


_ACTIVE: contextvars.ContextVar["Tape | None"] = contextvars.ContextVar("lznet_tape", default=None)


class Tensor:
    """Dense float64 array, optionally tracked for reverse-mode differentiation."""

    __slots__ = ("data", "requires_grad", "grad", "name", "_tape", "_index")
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.name = name
        self._tape: Tape | None = None
        self._index = -1

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def tracked(self) -> bool:
        return self.requires_grad or self._tape is not None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def detach(self) -> Tensor:
        return Tensor(self.data)

    def __repr__(self) -> str:
        label = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return take(self, idx)


def parameter(data, name: str | None = None) -> Tensor:
    return Tensor(np.array(data, dtype=np.float64), requires_grad=True, name=name)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


@dataclass
class _Node:
    out: Tensor
    inputs: tuple[Tensor, ...]
    vjp: Callable[[np.ndarray], Sequence[np.ndarray | None]] | None
    op: str


class Tape:
    """Append-only record of primitive applications for one forward region."""

    def __init__(self):
        self.nodes: list[_Node] = []
        self._token = None
        self._done = False

    def __enter__(self) -> Tape:
        self._token = _ACTIVE.set(self)
        return self

    def __exit__(self, *exc) -> None:
        _ACTIVE.reset(self._token)

    def record(self, out: Tensor, inputs, vjp, op: str) -> Tensor:
        out._tape = self
        out._index = len(self.nodes)
        self.nodes.append(_Node(out, tuple(inputs), vjp, op))
        return out

    def backward(self, loss: Tensor, params: Sequence[Tensor] = ()) -> dict[Tensor, np.ndarray]:
        """Propagate d(loss) back through the tape.

        Returns a map from each leaf that requires grad (plus every tensor in
        ``params``) to its gradient; leaves the loss does not reach get zeros.
        The gradient is also accumulated into ``leaf.grad``.
        """
        if loss.size != 1:
            raise TapeError(f"loss must be scalar, got shape {loss.shape}")
        if loss._tape is not self:
            raise TapeError("loss was not produced on this tape")
        if self._done:
            raise TapeError("tape already consumed by a backward pass")
        self._done = True

        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        leaves: dict[int, Tensor] = {}
        for node in reversed(self.nodes[: loss._index + 1]):
            g = grads.pop(id(node.out), None)
            if g is None:
                continue
            if node.vjp is None:
                raise NonDifferentiableError(f"no gradient defined through '{node.op}'")
            for inp, gi in zip(node.inputs, node.vjp(g)):
                if gi is None:
                    continue
                if inp._tape is not self:
                    if not inp.requires_grad:
                        continue
                    leaves[id(inp)] = inp
                key = id(inp)
                if key in grads:
                    grads[key] = grads[key] + gi
                else:
                    grads[key] = gi

        # Release saved activations; tensors still referencing this tape act as constants.
        self.nodes = []

        out: dict[Tensor, np.ndarray] = {}
        for key, leaf in leaves.items():
            out[leaf] = grads.get(key, np.zeros_like(leaf.data))
        for p in params:
            if p not in out:
                out[p] = np.zeros_like(p.data)
        for leaf, g in out.items():
            leaf.grad = g if leaf.grad is None else leaf.grad + g
        return out


def _record(data, inputs: Sequence[Tensor], vjp, op: str) -> Tensor:
    out = Tensor(data)
    tape = _ACTIVE.get()
    if tape is None or not any(t.requires_grad or t._tape is tape for t in inputs):
        return out
    return tape.record(out, inputs, vjp, op)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _broadcast_check(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from None


# ---------------------------------------------------------------- elementwise


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check(a, b, "add")
    return _record(
        a.data + b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
        "add",
    )


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check(a, b, "sub")
    return _record(
        a.data - b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
        "sub",
    )


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check(a, b, "mul")
    return _record(
        a.data * b.data,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
        "mul",
    )


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check(a, b, "div")
    q = a.data / b.data
    return _record(
        q,
        (a, b),
        lambda g: (_unbroadcast(g / b.data, a.shape), _unbroadcast(-g * q / b.data, b.shape)),
        "div",
    )


def scale(a, c: float) -> Tensor:
    a = as_tensor(a)
    c = float(c)
    return _record(a.data * c, (a,), lambda g: (g * c,), "scale")


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    # Split by sign so large |x| never overflows exp.
    x = a.data
    e = np.exp(-np.abs(x))
    s = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return _record(s, (a,), lambda g: (g * s * (1.0 - s),), "sigmoid")


def tanh(a) -> Tensor:
    a = as_tensor(a)
    t = np.tanh(a.data)
    return _record(t, (a,), lambda g: (g * (1.0 - t * t),), "tanh")


def exp(a) -> Tensor:
    a = as_tensor(a)
    e = np.exp(a.data)
    return _record(e, (a,), lambda g: (g * e,), "exp")


def log(a) -> Tensor:
    a = as_tensor(a)
    if np.any(a.data <= 0):
        raise ValueError("log of a non-positive value")
    return _record(np.log(a.data), (a,), lambda g: (g / a.data,), "log")


def softmax(a, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    z = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=axis, keepdims=True)

    def vjp(g):
        return (s * (g - (g * s).sum(axis=axis, keepdims=True)),)

    return _record(s, (a,), vjp, "softmax")


# ----------------------------------------------------------------- linear algebra


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 1 or b.ndim != 2 or a.shape[-1] != b.shape[0]:
        raise ShapeError(f"matmul: cannot multiply {a.shape} by {b.shape}")

    def vjp(g):
        ga = g @ b.data.T
        a2 = a.data.reshape(-1, a.shape[-1])
        gb = a2.T @ g.reshape(-1, b.shape[1])
        return ga, gb

    return _record(a.data @ b.data, (a, b), vjp, "matmul")


def bilinear(x, W, y, b) -> Tensor:
    """``x^T W y + b`` per row; output has a trailing axis of length 1."""
    x, W, y, b = (as_tensor(t) for t in (x, W, y, b))
    if W.ndim != 2 or x.shape[-1] != W.shape[0] or y.shape[-1] != W.shape[1]:
        raise ShapeError(f"bilinear: x{x.shape} W{W.shape} y{y.shape}")
    if x.shape[:-1] != y.shape[:-1]:
        raise ShapeError(f"bilinear: batch shapes differ, {x.shape} vs {y.shape}")
    if b.size != 1:
        raise ShapeError(f"bilinear: bias must be scalar, got {b.shape}")
    Wy = y.data @ W.data.T
    val = (x.data * Wy).sum(axis=-1, keepdims=True) + b.data.reshape(())

    def vjp(g):
        gx = g * Wy
        gy = g * (x.data @ W.data)
        x2 = (g * x.data).reshape(-1, x.shape[-1])
        gW = x2.T @ y.data.reshape(-1, y.shape[-1])
        gb = np.full(b.shape, g.sum())
        return gx, gW, gy, gb

    return _record(val, (x, W, y, b), vjp, "bilinear")


# ----------------------------------------------------------------- structural


def concat(tensors: Sequence, axis: int = -1) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    if not ts:
        raise ShapeError("concat of nothing")
    try:
        val = np.concatenate([t.data for t in ts], axis=axis)
    except ValueError as exc:
        raise ShapeError(f"concat: {exc}") from None
    bounds = np.cumsum([t.shape[axis] for t in ts])[:-1]

    def vjp(g):
        return np.split(g, bounds, axis=axis)

    return _record(val, ts, vjp, "concat")


def stack(tensors: Sequence, axis: int = 0) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    try:
        val = np.stack([t.data for t in ts], axis=axis)
    except ValueError as exc:
        raise ShapeError(f"stack: {exc}") from None

    def vjp(g):
        return [np.take(g, i, axis=axis) for i in range(len(ts))]

    return _record(val, ts, vjp, "stack")


def take(a, idx) -> Tensor:
    """Basic (slice/int) indexing."""
    a = as_tensor(a)
    val = a.data[idx]

    def vjp(g):
        out = np.zeros_like(a.data)
        out[idx] = g
        return (out,)

    return _record(np.array(val), (a,), vjp, "slice")


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    return _record(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),), "reshape")


def total(a, axis=None, keepdims: bool = False) -> Tensor:
    """Sum reduction."""
    a = as_tensor(a)
    val = a.data.sum(axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _record(val, (a,), vjp, "sum")


def mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    n = a.size if axis is None else np.prod([a.shape[i] for i in np.atleast_1d(axis)])
    return scale(total(a, axis=axis, keepdims=keepdims), 1.0 / n)


# ----------------------------------------------------------------- HRR / VTB


def _rfft(x):
    return np.fft.rfft(x, axis=-1)


def _irfft(z, d):
    return np.fft.irfft(z, n=d, axis=-1)


def circ_conv(a, b) -> Tensor:
    """Circular convolution along the last axis; adjoints are correlations."""
    a, b = as_tensor(a), as_tensor(b)
    if a.shape[-1] != b.shape[-1]:
        raise ShapeError(f"circ_conv: {a.shape} vs {b.shape}")
    d = a.shape[-1]
    A, B = _rfft(a.data), _rfft(b.data)

    def vjp(g):
        G = _rfft(g)
        return (
            _unbroadcast(_irfft(G * np.conj(B), d), a.shape),
            _unbroadcast(_irfft(G * np.conj(A), d), b.shape),
        )

    return _record(_irfft(A * B, d), (a, b), vjp, "circ_conv")


def circ_corr(s, u) -> Tensor:
    """Circular correlation ``y[n] = sum_k u[k] s[n+k]``, i.e. ``s ⊛ involution(u)``."""
    s, u = as_tensor(s), as_tensor(u)
    if s.shape[-1] != u.shape[-1]:
        raise ShapeError(f"circ_corr: {s.shape} vs {u.shape}")
    d = s.shape[-1]
    S, U = _rfft(s.data), _rfft(u.data)

    def vjp(g):
        G = _rfft(g)
        return (
            _unbroadcast(_irfft(G * U, d), s.shape),
            _unbroadcast(_irfft(S * np.conj(G), d), u.shape),
        )

    return _record(_irfft(S * np.conj(U), d), (s, u), vjp, "circ_corr")


def project_unitary(a, eps: float = vsa.SPECTRAL_EPS) -> Tensor:
    """Differentiable spectral normalization ``F^-1(F(a)/|F(a)|)``."""
    a = as_tensor(a)
    d = a.shape[-1]
    X = _rfft(a.data)
    mag = np.abs(X)
    if np.min(mag) < eps:
        raise vsa.DegenerateSpectrumError(f"spectral magnitude {np.min(mag):.3g} below {eps:g}")
    U = X / mag

    def vjp(g):
        Z = _rfft(g)
        # Tangent projection onto the unit circle, scaled by 1/|X|.
        Z = (Z - U * np.real(np.conj(U) * Z)) / mag
        return (_irfft(Z, d),)

    return _record(_irfft(U, d), (a,), vjp, "project_unitary")


def unbind_hrr(s, a, eps: float = vsa.SPECTRAL_EPS, strict: bool = True) -> Tensor:
    """``s ⊛ a⁺``: correlation of ``s`` with the unitary projection of ``a``.

    Fused form of ``circ_corr(s, project_unitary(a))``. Frequency bins of
    ``a`` with magnitude below ``eps`` raise unless ``strict`` is off, in
    which case they are dropped (so a zero key reads back zero).
    """
    s, a = as_tensor(s), as_tensor(a)
    if s.shape[-1] != a.shape[-1]:
        raise ShapeError(f"unbind_hrr: {s.shape} vs {a.shape}")
    d = a.shape[-1]
    S, A = _rfft(s.data), _rfft(a.data)
    mag = np.abs(A)
    small = mag < eps
    if small.any():
        if strict:
            raise vsa.DegenerateSpectrumError(f"spectral magnitude {np.min(mag):.3g} below {eps:g}")
        mag = np.where(small, 1.0, mag)
        A = np.where(small, 0.0, A)
    U = A / mag

    def vjp(g):
        G = _rfft(g)
        Z = S * np.conj(G)
        Z = (Z - U * np.real(np.conj(U) * Z)) / mag
        if small.any():
            Z = np.where(small, 0.0, Z)
        return _unbroadcast(_irfft(G * U, d), s.shape), _unbroadcast(_irfft(Z, d), a.shape)

    return _record(_irfft(S * np.conj(U), d), (s, a), vjp, "unbind_hrr")


def _vtb_block(y: np.ndarray):
    d = y.shape[-1]
    side = vsa.vtb_side(d)
    return side, d**0.25 * y.reshape(*y.shape[:-1], side, side)


def vtb_bind(x, y) -> Tensor:
    x, y = as_tensor(x), as_tensor(y)
    if x.shape[-1] != y.shape[-1]:
        raise ShapeError(f"vtb_bind: {x.shape} vs {y.shape}")
    d = x.shape[-1]
    side, Y = _vtb_block(y.data)
    X = x.data.reshape(*x.shape[:-1], side, side)
    out = X @ np.swapaxes(Y, -1, -2)
    c = d**0.25

    def vjp(g):
        G = g.reshape(*g.shape[:-1], side, side)
        gx = (G @ Y).reshape(*G.shape[:-2], d)
        gY = np.swapaxes(G, -1, -2) @ X
        gy = c * gY.reshape(*gY.shape[:-2], d)
        return _unbroadcast(gx, x.shape), _unbroadcast(gy, y.shape)

    return _record(out.reshape(*out.shape[:-2], d), (x, y), vjp, "vtb_bind")


def vtb_unbind(s, y) -> Tensor:
    s, y = as_tensor(s), as_tensor(y)
    if s.shape[-1] != y.shape[-1]:
        raise ShapeError(f"vtb_unbind: {s.shape} vs {y.shape}")
    d = s.shape[-1]
    side, Y = _vtb_block(y.data)
    S = s.data.reshape(*s.shape[:-1], side, side)
    out = S @ Y
    c = d**0.25

    def vjp(g):
        G = g.reshape(*g.shape[:-1], side, side)
        gs = (G @ np.swapaxes(Y, -1, -2)).reshape(*G.shape[:-2], d)
        gY = np.swapaxes(S, -1, -2) @ G
        gy = c * gY.reshape(*gY.shape[:-2], d)
        return _unbroadcast(gs, s.shape), _unbroadcast(gy, y.shape)

    return _record(out.reshape(*out.shape[:-2], d), (s, y), vjp, "vtb_unbind")


# ----------------------------------------------------------------- stochastic


def bernoulli(probs, draws, straight_through: bool = True) -> Tensor:
    """Sample {0,1} with the given probabilities.

    ``draws`` is either a ``numpy.random.Generator`` or an array of uniforms in
    [0, 1) broadcastable to ``probs``; the sample is ``draws < probs``. With
    ``straight_through`` the backward pass treats the sample as the
    probability itself; without it the op has no gradient and backward raises.
    """
    probs = as_tensor(probs)
    if np.any((probs.data < 0) | (probs.data > 1)):
        raise ValueError("bernoulli probabilities must lie in [0, 1]")
    if isinstance(draws, np.random.Generator):
        draws = draws.random(probs.shape)
    sample = (np.asarray(draws) < probs.data).astype(np.float64)
    sample = np.broadcast_to(sample, probs.shape).copy()
    vjp = (lambda g: (g,)) if straight_through else None
    return _record(sample, (probs,), vjp, "bernoulli_st" if straight_through else "bernoulli")


# ----------------------------------------------------------------- losses


def mse_loss(pred, target) -> Tensor:
    pred, target = as_tensor(pred), as_tensor(target)
    if pred.shape != target.shape:
        raise ShapeError(f"mse_loss: {pred.shape} vs {target.shape}")
    diff = pred.data - target.data
    n = diff.size

    def vjp(g):
        gd = g * 2.0 * diff / n
        return gd, -gd

    return _record(np.array(np.mean(diff * diff)), (pred, target), vjp, "mse")


def softmax_cross_entropy(logits, labels) -> Tensor:
    """Mean over rows of ``-log softmax(logits)[label]``; labels are integers."""
    logits = as_tensor(logits)
    labels = np.asarray(labels)
    if logits.ndim < 1 or labels.shape != logits.shape[:-1]:
        raise ShapeError(f"cross entropy: logits {logits.shape}, labels {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= logits.shape[-1]):
        raise ValueError("label out of range")
    z = logits.data - logits.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=-1, keepdims=True))
    logp = z - lse
    picked = np.take_along_axis(logp, labels[..., None], axis=-1)
    n = labels.size

    def vjp(g):
        p = np.exp(logp)
        np.put_along_axis(p, labels[..., None], np.take_along_axis(p, labels[..., None], -1) - 1.0, -1)
        return (g * p / n,)

    return _record(np.array(-picked.mean()), (logits,), vjp, "softmax_xent")
