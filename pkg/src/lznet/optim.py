"""RMSProp and Adam over named parameter tensors, plus global-norm clipping."""

from __future__ import annotations

import numpy as np

from lznet.engine import Tensor


class NonFiniteError(FloatingPointError):
    pass


def _check_grads(params: dict[str, Tensor], grads: dict[str, np.ndarray]) -> None:
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            raise KeyError(f"missing gradient for {name}")
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape} for {name}")
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(f"gradient for {name} is non-finite")


def _guard(params: dict[str, Tensor]) -> None:
    for name, p in params.items():
        if not np.all(np.isfinite(p.data)):
            raise NonFiniteError(f"parameter {name} became non-finite")


def rmsprop_step(params, grads, state, lr=1e-3, decay=0.9, eps=1e-8) -> dict:
    """``v <- decay*v + (1-decay)*g^2``; ``theta <- theta - lr*g/(sqrt(v)+eps)``.

    Updates ``params`` in place and returns the new state.
    """
    _check_grads(params, grads)
    v = state.setdefault("v", {})
    for name, p in params.items():
        g = grads[name]
        vn = decay * v.get(name, np.zeros_like(g)) + (1.0 - decay) * g * g
        v[name] = vn
        p.data = p.data - lr * g / (np.sqrt(vn) + eps)
    state["t"] = state.get("t", 0) + 1
    _guard(params)
    return state


def adam_step(params, grads, state, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8) -> dict:
    """Adam with bias correction; updates ``params`` in place."""
    _check_grads(params, grads)
    m = state.setdefault("m", {})
    v = state.setdefault("v", {})
    t = state.get("t", 0) + 1
    state["t"] = t
    for name, p in params.items():
        g = grads[name]
        mn = beta1 * m.get(name, np.zeros_like(g)) + (1.0 - beta1) * g
        vn = beta2 * v.get(name, np.zeros_like(g)) + (1.0 - beta2) * g * g
        m[name], v[name] = mn, vn
        m_hat = mn / (1.0 - beta1**t)
        v_hat = vn / (1.0 - beta2**t)
        p.data = p.data - lr * m_hat / (np.sqrt(v_hat) + eps)
    _guard(params)
    return state


def clip_global_norm(grads: dict[str, np.ndarray], max_norm: float) -> float:
    """Rescale ``grads`` in place so their joint L2 norm is at most ``max_norm``."""
    norm = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))
    if not np.isfinite(norm):
        raise NonFiniteError("non-finite gradient norm")
    if max_norm > 0 and norm > max_norm:
        factor = max_norm / norm
        for k in grads:
            grads[k] = grads[k] * factor
    return norm
