"""LSTM cell and the bilinear-sigmoid(-Bernoulli) novelty score."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from lznet import engine as E

BIAS_INITS = (-1.0, 0.0, 1.0)


@dataclass
class LstmParams:
    """Gate blocks are laid out ``[input, forget, output, candidate]`` along the last axis."""

    w_ih: E.Tensor  # (I, 4H)
    w_hh: E.Tensor  # (H, 4H)
    b: E.Tensor  # (4H,)

    @property
    def hidden_size(self) -> int:
        return self.w_hh.shape[0]

    @property
    def input_size(self) -> int:
        return self.w_ih.shape[0]

    def named(self, prefix: str = "lstm") -> dict[str, E.Tensor]:
        return {f"{prefix}.w_ih": self.w_ih, f"{prefix}.w_hh": self.w_hh, f"{prefix}.b": self.b}


@dataclass
class NoveltyParams:
    W: E.Tensor  # (H, H)
    b: E.Tensor  # (1,)

    def named(self, prefix: str = "novelty") -> dict[str, E.Tensor]:
        return {f"{prefix}.W": self.W, f"{prefix}.b": self.b}


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), stream])


def init_lstm(input_size: int, hidden_size: int, seed: int) -> LstmParams:
    """Uniform(-1/sqrt(H), 1/sqrt(H)) weights, zero biases except forget = +1."""
    if input_size < 1 or hidden_size < 1:
        raise ValueError(f"invalid LSTM sizes I={input_size}, H={hidden_size}")
    H = hidden_size
    bound = 1.0 / math.sqrt(H)
    rng = _rng(seed, 0)
    b = np.zeros(4 * H)
    b[H : 2 * H] = 1.0
    return LstmParams(
        w_ih=E.parameter(rng.uniform(-bound, bound, (input_size, 4 * H)), "lstm.w_ih"),
        w_hh=E.parameter(rng.uniform(-bound, bound, (H, 4 * H)), "lstm.w_hh"),
        b=E.parameter(b, "lstm.b"),
    )


def init_novelty(hidden_size: int, bias_init: float, seed: int) -> NoveltyParams:
    if hidden_size < 1:
        raise ValueError(f"invalid hidden size {hidden_size}")
    if bias_init not in BIAS_INITS:
        raise ValueError(f"bias_init must be one of {BIAS_INITS}, got {bias_init}")
    bound = 1.0 / math.sqrt(hidden_size)
    rng = _rng(seed, 1)
    return NoveltyParams(
        W=E.parameter(rng.uniform(-bound, bound, (hidden_size, hidden_size)), "novelty.W"),
        b=E.parameter([float(bias_init)], "novelty.b"),
    )


def lstm_cell(x, h, c, params: LstmParams) -> tuple[E.Tensor, E.Tensor]:
    """One LSTM step without peepholes; returns ``(h_hat, c_new)``."""
    x, h, c = E.as_tensor(x), E.as_tensor(h), E.as_tensor(c)
    H = params.hidden_size
    if x.shape[-1] != params.input_size or h.shape[-1] != H or c.shape[-1] != H:
        raise E.ShapeError(
            f"lstm_cell: x{x.shape} h{h.shape} c{c.shape} for I={params.input_size}, H={H}"
        )
    z = x @ params.w_ih + h @ params.w_hh + params.b
    gates = E.sigmoid(z[..., : 3 * H])
    g = E.tanh(z[..., 3 * H :])
    i = gates[..., :H]
    f = gates[..., H : 2 * H]
    o = gates[..., 2 * H :]
    c_new = f * c + i * g
    return o * E.tanh(c_new), c_new


def novelty_score(r_hat, r, params: NoveltyParams, mode: str = "soft", draws=None) -> E.Tensor:
    """``sigmoid(r_hat^T W r + b)``, optionally Bernoulli-sampled.

    Returns shape ``batch + (1,)``. In ``hard`` mode ``draws`` supplies the
    randomness (a Generator or uniforms) and the sample back-propagates
    straight through to the probability.
    """
    s = E.sigmoid(E.bilinear(r_hat, params.W, r, params.b))
    if mode == "soft":
        return s
    if mode == "hard":
        if draws is None:
            raise ValueError("hard novelty mode needs a random source")
        return E.bernoulli(s, draws, straight_through=True)
    raise ValueError(f"unknown novelty mode {mode!r}")
