"""Associative memories with a uniform insert/query surface.

Three backends share one class:

* ``hrr`` and ``vtb``: the state is a single bundle ``m = sum_t p_t B(v_t, tag)``;
  a query unbinds the state with the query vector, and the result is compared
  against the fixed tag.
* ``hopfield``: stored patterns with insertion weights; a query returns the
  softmax-weighted average of the patterns and is compared against the query
  itself.

States are :class:`~lznet.engine.Tensor` objects, so inserts and queries made
inside a tape are differentiable. Vectors may be single ``(d,)`` hypervectors
or batches ``(B, d)``, one independent memory per batch row.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from lznet import engine as E
from lznet import vsa


class MemoryKind(str, Enum):
    HRR = "hrr"
    VTB = "vtb"
    HOPFIELD = "hopfield"


@dataclass
class QueryResult:
    r_hat: E.Tensor
    r: E.Tensor


def _weight(p, lead: tuple[int, ...]) -> E.Tensor:
    """Normalize an insertion weight to shape ``lead + (1,)``."""
    p = E.as_tensor(p)
    if not np.all(np.isfinite(p.data)) or np.any((p.data < 0.0) | (p.data > 1.0)):
        raise ValueError("insertion weight p must lie in [0, 1]")
    if p.shape in ((), (1,)):
        w = E.reshape(p, (1,) * (len(lead) + 1))
        return w * E.Tensor(np.ones(lead + (1,))) if lead else w
    if p.shape == lead:
        return E.reshape(p, lead + (1,))
    if p.shape == lead + (1,):
        return p
    raise E.ShapeError(f"weight shape {p.shape} does not match batch {lead}")


class AssociativeMemory:
    def __init__(self, kind: MemoryKind | str, d: int, seed: int = 0, beta: float | None = None):
        kind = MemoryKind(kind)
        if int(d) != d or d < 2:
            raise vsa.DimensionError(f"memory dimension must be an integer >= 2, got {d}")
        if kind is MemoryKind.VTB:
            vsa.vtb_side(d)
        self.kind = kind
        self.d = int(d)
        self.seed = seed
        self.tag: np.ndarray | None = None
        self.beta = 1.0 / math.sqrt(d) if beta is None else float(beta)
        if kind is not MemoryKind.HOPFIELD:
            self.tag = vsa.project_unitary(vsa.random_hypervector(d, seed))
        self.state: E.Tensor | None = None
        self.patterns: list[E.Tensor] = []
        self.weights: list[E.Tensor] = []

    @property
    def is_vsa(self) -> bool:
        return self.kind is not MemoryKind.HOPFIELD

    @property
    def m(self) -> np.ndarray:
        """Current VSA bundle (zeros before any insert)."""
        if not self.is_vsa:
            raise TypeError("Hopfield memory has no bundle state")
        return np.zeros(self.d) if self.state is None else self.state.data

    def __len__(self) -> int:
        return len(self.patterns)

    def _check(self, v: E.Tensor) -> None:
        if v.shape[-1] != self.d:
            raise vsa.DimensionError(f"expected dimension {self.d}, got {v.shape[-1]}")

    def bind(self, v) -> E.Tensor:
        tag = E.Tensor(self.tag)
        if self.kind is MemoryKind.HRR:
            return E.circ_conv(v, tag)
        return E.vtb_bind(v, tag)

    def unbind(self, s, q) -> E.Tensor:
        if self.kind is MemoryKind.HRR:
            # A query with a vanishing frequency bin (e.g. an all-zero h_hat)
            # carries no key there; that bin reads back as zero.
            return E.unbind_hrr(s, q, strict=False)
        return E.vtb_unbind(s, q)

    def insert(self, v, p=1.0) -> AssociativeMemory:
        """Add ``v`` with weight ``p`` in [0, 1]; ``p == 0`` leaves the state untouched."""
        v = E.as_tensor(v)
        self._check(v)
        w = _weight(p, v.shape[:-1])
        if not np.any(w.data):
            return self
        if self.is_vsa:
            term = w * self.bind(v)
            self.state = term if self.state is None else self.state + term
        else:
            self.patterns.append(v)
            self.weights.append(w)
        return self

    def query(self, q) -> QueryResult:
        q = E.as_tensor(q)
        self._check(q)
        if self.is_vsa:
            r = E.Tensor(np.broadcast_to(self.tag, q.shape).copy())
            if self.state is None:
                return QueryResult(E.Tensor(np.zeros(q.shape)), r)
            return QueryResult(self.unbind(self.state, q), r)
        if not self.patterns:
            return QueryResult(E.Tensor(np.zeros(q.shape)), q)
        return QueryResult(self._hopfield_retrieve(q), q)

    def _hopfield_retrieve(self, q: E.Tensor) -> E.Tensor:
        # Weighted softmax: a_i = w_i exp(beta <x_i, q>) / sum_j w_j exp(beta <x_j, q>),
        # identical to a softmax over logits beta <x_i, q> + log w_i.
        P = E.stack(self.patterns, axis=-2)  # (..., n, d)
        if q.shape != P.shape[:-2] + (self.d,):
            raise E.ShapeError(f"query shape {q.shape} does not match stored {self.patterns[0].shape}")
        q3 = E.reshape(q, q.shape[:-1] + (1, self.d))
        scores = E.scale(E.total(P * q3, axis=-1), self.beta)  # (..., n)
        W = E.concat(self.weights, axis=-1)
        shift = E.Tensor(scores.data.max(axis=-1, keepdims=True))
        num = E.exp(scores - shift) * W
        # Rows whose every weight is zero hold nothing and retrieve zeros.
        empty = (num.data.sum(axis=-1, keepdims=True) == 0.0).astype(np.float64)
        a = num / (E.total(num, axis=-1, keepdims=True) + E.Tensor(empty))
        return E.total(E.reshape(a, a.shape + (1,)) * P, axis=-2)

    def reset(self) -> AssociativeMemory:
        self.state = None
        self.patterns = []
        self.weights = []
        return self

    def to_arrays(self, prefix: str = "memory") -> dict[str, np.ndarray]:
        """Named arrays for checkpointing."""
        out: dict[str, np.ndarray] = {}
        if self.is_vsa:
            out[f"{prefix}.tag"] = self.tag
            out[f"{prefix}.m"] = self.m
        else:
            for i, (pat, w) in enumerate(zip(self.patterns, self.weights)):
                out[f"{prefix}.pattern.{i}"] = pat.data
                out[f"{prefix}.weight.{i}"] = np.asarray(w.data)
        return out


def new_memory(kind: MemoryKind | str, d: int, seed: int = 0, beta: float | None = None) -> AssociativeMemory:
    return AssociativeMemory(kind, d, seed, beta)
