"""Central finite-difference checks against the tape's analytic gradients."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from lznet import engine as E
from lznet.engine import Tape, TapeError, Tensor


def grad_check(
    f: Callable[..., Tensor],
    inputs: Sequence[Tensor],
    eps: float = 1e-5,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``f(*inputs)`` must return a scalar tensor. The relative error for one
    coordinate is ``|analytic - numeric| / max(|analytic|, |numeric|, 1e-8)``.
    Gradients through a sampling op without straight-through propagate
    :class:`~lznet.engine.NonDifferentiableError`.
    """
    for t in inputs:
        t.requires_grad = True
        t.grad = None
    with Tape() as tape:
        out = f(*inputs)
    if out.size != 1:
        raise TapeError(f"grad_check needs a scalar function, got shape {out.shape}")
    analytic = tape.backward(out, inputs)

    worst = 0.0
    for t in inputs:
        flat = t.data.reshape(-1)
        ga = analytic[t].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            hi = f(*inputs).item()
            flat[i] = orig - eps
            lo = f(*inputs).item()
            flat[i] = orig
            numeric = (hi - lo) / (2.0 * eps)
            denom = max(abs(ga[i]), abs(numeric), 1e-8)
            worst = max(worst, abs(ga[i] - numeric) / denom)
    return worst


# ------------------------------------------------------------------ suite

PRIMITIVE_RTOL = 1e-4
MODEL_RTOL = 1e-3


@dataclass(frozen=True)
class Case:
    name: str
    build: Callable[[np.random.Generator], tuple[Callable[..., Tensor], list[Tensor]]]
    rtol: float = PRIMITIVE_RTOL


def _weighted_sum(out: Tensor, w: np.ndarray) -> Tensor:
    # A fixed random weighting makes every output coordinate matter.
    return E.total(out * Tensor(w))


def _unary(op, positive: bool = False, shape=(3, 4)):
    def build(rng):
        x = rng.normal(size=shape)
        if positive:
            x = np.abs(x) + 0.5
        w = rng.normal(size=np.shape(op(Tensor(x)).data))
        return (lambda a: _weighted_sum(op(a), w)), [Tensor(x)]

    return build


def _binary(op, shape_a=(3, 4), shape_b=(3, 4), positive_b: bool = False):
    def build(rng):
        a, b = rng.normal(size=shape_a), rng.normal(size=shape_b)
        if positive_b:
            b = np.abs(b) + 0.5
        w = rng.normal(size=np.shape(op(Tensor(a), Tensor(b)).data))
        return (lambda x, y: _weighted_sum(op(x, y), w)), [Tensor(a), Tensor(b)]

    return build


def _bilinear(rng):
    x, W, y, b = rng.normal(size=(2, 4)), rng.normal(size=(4, 4)), rng.normal(size=(2, 4)), rng.normal(size=(1,))
    w = rng.normal(size=(2, 1))
    return (lambda *t: _weighted_sum(E.bilinear(*t), w)), [Tensor(x), Tensor(W), Tensor(y), Tensor(b)]


def _concat_stack(rng):
    a, b = rng.normal(size=(2, 3)), rng.normal(size=(2, 2))
    w1, w2 = rng.normal(size=(2, 5)), rng.normal(size=(2, 2, 3))

    def f(x, y):
        return _weighted_sum(E.concat([x, y], axis=-1), w1) + _weighted_sum(E.stack([x, x * 2.0]), w2)

    return f, [Tensor(a), Tensor(b)]


def _take_reshape(rng):
    a = rng.normal(size=(3, 4))
    w = rng.normal(size=(4,))
    return (lambda x: _weighted_sum(E.reshape(x[1:, :2], (4,)), w)), [Tensor(a)]


def _mse(rng):
    p, t = rng.normal(size=(5,)), rng.normal(size=(5,))
    return (lambda x, y: E.mse_loss(x, y)), [Tensor(p), Tensor(t)]


def _xent(rng):
    logits = rng.normal(size=(4, 3))
    labels = rng.integers(0, 3, size=4)
    return (lambda z: E.softmax_cross_entropy(z, labels)), [Tensor(logits)]


def _lstm(rng):
    from lznet.cells import init_lstm, lstm_cell

    params = init_lstm(3, 4, int(rng.integers(1 << 30)))
    x, h, c = rng.normal(size=(2, 3)), rng.normal(size=(2, 4)), rng.normal(size=(2, 4))
    w1, w2 = rng.normal(size=(2, 4)), rng.normal(size=(2, 4))

    def f(x, h, c, w_ih, w_hh, b):
        h2, c2 = lstm_cell(x, h, c, type(params)(w_ih, w_hh, b))
        return _weighted_sum(h2, w1) + _weighted_sum(c2, w2)

    return f, [Tensor(x), Tensor(h), Tensor(c), params.w_ih, params.w_hh, params.b]


def _novelty(rng):
    from lznet.cells import NoveltyParams, novelty_score

    r_hat, r = rng.normal(size=(3, 4)), rng.normal(size=(3, 4))
    W, b = rng.normal(size=(4, 4)) * 0.5, rng.normal(size=(1,))
    w = rng.normal(size=(3, 1))

    def f(rh, rr, W, b):
        return _weighted_sum(novelty_score(rh, rr, NoveltyParams(W, b)), w)

    return f, [Tensor(r_hat), Tensor(r), Tensor(W), Tensor(b)]


def _lz_forward(backend: str):
    def build(rng):
        from lznet.cells import LstmParams, NoveltyParams, init_lstm, init_novelty
        from lznet.layer import lz_forward

        T, I, H = 5, 2, 9
        seed = int(rng.integers(1 << 30))
        lstm, nov = init_lstm(I, H, seed), init_novelty(H, 0.0, seed)
        nov.W.data[...] = rng.normal(size=(H, H))
        x = rng.normal(size=(T, I))
        w = rng.normal(size=(T, H))

        def f(w_ih, w_hh, b, W, nb):
            out = lz_forward(x, LstmParams(w_ih, w_hh, b), NoveltyParams(W, nb), backend, "soft", seed=seed)
            return _weighted_sum(E.stack(out.h_hats), w)

        return f, [lstm.w_ih, lstm.w_hh, lstm.b, nov.W, nov.b]

    return build


# The straight-through sampler is absent on purpose: its gradient is a
# surrogate, so finite differences of the sampled output cannot match it.
SUITE: tuple[Case, ...] = (
    Case("add", _binary(E.add, (3, 4), (4,))),
    Case("sub", _binary(E.sub)),
    Case("mul", _binary(E.mul, (3, 4), (3, 1))),
    Case("div", _binary(E.div, positive_b=True)),
    Case("scale", _unary(lambda a: E.scale(a, -1.7))),
    Case("neg", _unary(lambda a: -a)),
    Case("sigmoid", _unary(E.sigmoid)),
    Case("tanh", _unary(E.tanh)),
    Case("exp", _unary(E.exp)),
    Case("log", _unary(E.log, positive=True)),
    Case("softmax", _unary(E.softmax)),
    Case("sum", _unary(lambda a: E.total(a, axis=0))),
    Case("mean", _unary(lambda a: E.mean(a, axis=-1, keepdims=True))),
    Case("matmul", _binary(E.matmul, (2, 3, 4), (4, 5))),
    Case("bilinear", _bilinear),
    Case("concat+stack", _concat_stack),
    Case("slice+reshape", _take_reshape),
    Case("circ_conv", _binary(E.circ_conv, (2, 8), (8,))),
    Case("circ_corr", _binary(E.circ_corr, (2, 8), (2, 8))),
    Case("project_unitary", _unary(E.project_unitary, shape=(2, 8))),
    Case("unbind_hrr", _binary(E.unbind_hrr, (2, 8), (8,))),
    Case("vtb_bind", _binary(E.vtb_bind, (2, 9), (2, 9))),
    Case("vtb_unbind", _binary(E.vtb_unbind, (2, 9), (9,))),
    Case("mse", _mse),
    Case("softmax_xent", _xent),
    Case("lstm_cell", _lstm, MODEL_RTOL),
    Case("novelty_score", _novelty, MODEL_RTOL),
    Case("lz_forward[hrr]", _lz_forward("hrr"), MODEL_RTOL),
    Case("lz_forward[vtb]", _lz_forward("vtb"), MODEL_RTOL),
)


def run_suite(seed: int = 0, cases: Sequence[Case] = SUITE) -> list[tuple[str, float, float, bool]]:
    """``(name, max_rel_err, rtol, passed)`` per case."""
    rows = []
    for i, case in enumerate(cases):
        f, inputs = case.build(np.random.default_rng([seed, i]))
        err = grad_check(f, inputs)
        rows.append((case.name, float(err), case.rtol, bool(err <= case.rtol)))
    return rows
