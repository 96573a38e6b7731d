"""The Lempel-Ziv recurrent layer.

Per step: an LSTM cell proposes ``h_hat``; the associative memory is queried
with it; the novelty score ``p`` decides how much of ``h_hat`` is inserted;
and the carried state is reset to ``(1 - p) * h_hat``. With ``p == 1`` the
window restarts from scratch, with ``p == 0`` the step is an ordinary LSTM step.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from lznet import engine as E
from lznet.cells import LstmParams, NoveltyParams, lstm_cell, novelty_score
from lznet.memory import AssociativeMemory, MemoryKind


@dataclass
class LzLayerState:
    h: E.Tensor
    c: E.Tensor
    memory: AssociativeMemory

    @classmethod
    def fresh(cls, batch_shape: tuple[int, ...], hidden: int, memory: AssociativeMemory) -> LzLayerState:
        zeros = np.zeros(batch_shape + (hidden,))
        return cls(E.Tensor(zeros), E.Tensor(zeros.copy()), memory.reset())


@dataclass
class LzLayerOutput:
    h_hats: list[E.Tensor] = field(default_factory=list)
    p_mask: list[E.Tensor] = field(default_factory=list)
    memory: AssociativeMemory | None = None

    def h_hat_array(self) -> np.ndarray:
        """``(T, H)`` for a single sequence, ``(B, T, H)`` for a batch."""
        return np.stack([h.data for h in self.h_hats], axis=-2)

    def p_array(self) -> np.ndarray:
        """``(T,)`` or ``(B, T)``."""
        return np.stack([p.data[..., 0] for p in self.p_mask], axis=-1)


def lz_step(
    state: LzLayerState,
    x_t,
    lstm: LstmParams,
    novelty: NoveltyParams,
    mode: str = "soft",
    draws=None,
    reset_cell: bool = True,
) -> tuple[LzLayerState, E.Tensor, E.Tensor]:
    h_hat, c = lstm_cell(x_t, state.h, state.c, lstm)
    mem = state.memory
    res = mem.query(h_hat)
    p = novelty_score(res.r_hat, res.r, novelty, mode, draws)
    mem.insert(h_hat, p)
    keep = 1.0 - p
    h = keep * h_hat
    if reset_cell:
        c = keep * c
    return LzLayerState(h, c, mem), h_hat, p


def lz_forward(
    x_seq,
    lstm: LstmParams,
    novelty: NoveltyParams,
    backend: MemoryKind | str = MemoryKind.HRR,
    mode: str = "soft",
    seed: int = 0,
    reset_cell: bool = True,
    memory: AssociativeMemory | None = None,
    seq_ids=None,
    draw_seed=None,
) -> LzLayerOutput:
    """Run the layer over ``x_seq`` of shape ``(T, I)`` or ``(B, T, I)``.

    ``seed`` fixes the memory tag. In hard mode each sequence gets its own
    sampling stream seeded from ``(*draw_seed, seq_id)``; ``draw_seed``
    defaults to ``(seed,)`` and ``seq_ids`` to the batch row index.
    """
    x = np.asarray(x_seq.data if isinstance(x_seq, E.Tensor) else x_seq, dtype=np.float64)
    if x.ndim not in (2, 3):
        raise E.ShapeError(f"x_seq must be (T, I) or (B, T, I), got {x.shape}")
    T = x.shape[-2]
    if T < 1:
        raise ValueError("lz_forward needs a non-empty sequence")
    batch = x.shape[:-2]
    H = lstm.hidden_size
    if memory is None:
        memory = AssociativeMemory(backend, H, seed)
    if memory.d != H:
        raise E.ShapeError(f"memory dimension {memory.d} != hidden size {H}")

    draws = None
    if mode == "hard":
        ids = np.arange(int(np.prod(batch, dtype=int))) if seq_ids is None else np.asarray(seq_ids)
        base = [int(seed)] if draw_seed is None else [int(v) for v in np.atleast_1d(draw_seed)]
        draws = np.stack([np.random.default_rng(base + [int(i)]).random(T) for i in ids])
        draws = draws.reshape(batch + (T,))

    state = LzLayerState.fresh(batch, H, memory)
    out = LzLayerOutput()
    for t in range(T):
        u = None if draws is None else draws[..., t : t + 1]
        state, h_hat, p = lz_step(state, x[..., t, :], lstm, novelty, mode, u, reset_cell)
        out.h_hats.append(h_hat)
        out.p_mask.append(p)
    out.memory = state.memory
    return out


def lstm_forward(x_seq, lstm: LstmParams) -> list[E.Tensor]:
    """Plain LSTM over ``(T, I)`` or ``(B, T, I)``; returns the hidden states."""
    x = np.asarray(x_seq, dtype=np.float64)
    H = lstm.hidden_size
    h = E.Tensor(np.zeros(x.shape[:-2] + (H,)))
    c = E.Tensor(np.zeros(x.shape[:-2] + (H,)))
    hs = []
    for t in range(x.shape[-2]):
        h, c = lstm_cell(x[..., t, :], h, c, lstm)
        hs.append(h)
    return hs


@dataclass
class Head:
    """Affine readout ``z @ W + b``."""

    W: E.Tensor  # (H, K)
    b: E.Tensor  # (K,)

    def __call__(self, z) -> E.Tensor:
        z = E.as_tensor(z)
        if z.shape[-1] != self.W.shape[0]:
            raise E.ShapeError(f"head expects width {self.W.shape[0]}, got {z.shape[-1]}")
        return z @ self.W + self.b

    def named(self, prefix: str = "head") -> dict[str, E.Tensor]:
        return {f"{prefix}.W": self.W, f"{prefix}.b": self.b}


def init_head(hidden_size: int, out_size: int, seed: int) -> Head:
    bound = 1.0 / np.sqrt(hidden_size)
    rng = np.random.default_rng([int(seed), 2])
    return Head(
        W=E.parameter(rng.uniform(-bound, bound, (hidden_size, out_size)), "head.W"),
        b=E.parameter(np.zeros(out_size), "head.b"),
    )


def readout(output: LzLayerOutput, head: Head, source: str = "hidden") -> E.Tensor:
    """Apply ``head`` to the last ``h_hat`` (default) or to the final memory bundle."""
    if source == "hidden":
        return head(output.h_hats[-1])
    if source == "memory":
        mem = output.memory
        if mem is None or not mem.is_vsa:
            raise ValueError("memory readout needs a VSA memory")
        z = mem.state if mem.state is not None else E.Tensor(np.zeros_like(output.h_hats[-1].data))
        return head(z)
    raise ValueError(f"unknown readout source {source!r}")
