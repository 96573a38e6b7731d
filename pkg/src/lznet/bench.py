"""Monte Carlo sweeps over VSA round trips and memory capacity."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from lznet import vsa
from lznet.memory import AssociativeMemory


def _cosines(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.sum(a * b, axis=-1) / (np.linalg.norm(a, axis=-1) * np.linalg.norm(b, axis=-1))


def roundtrip_cosines(kind: str, d: int, trials: int, seed: int = 0) -> np.ndarray:
    """Cosine between ``x`` and ``unbind(bind(x, y), y)`` for ``trials`` seeded pairs.

    HRR keys are projected to unitary, matching how the memory uses them;
    VTB keys are raw Gaussian hypervectors.
    """
    out = np.empty(trials)
    for t in range(trials):
        x = vsa.random_hypervector(d, [seed, t, 0])
        y = vsa.random_hypervector(d, [seed, t, 1])
        if kind == "hrr":
            y = vsa.project_unitary(y)
            back = vsa.unbind_hrr(vsa.bind_hrr(x, y), y)
        elif kind == "vtb":
            back = vsa.unbind_vtb(vsa.bind_vtb(x, y), y)
        else:
            raise ValueError(f"unknown VSA kind {kind!r}")
        out[t] = vsa.cosine_similarity(x, back)
    return out


@dataclass
class Separability:
    stored: np.ndarray  # tag similarity for queries that were inserted
    fresh: np.ndarray  # tag similarity for queries that were not

    def accuracy(self, threshold: float) -> float:
        """Balanced accuracy of the rule ``similarity >= threshold`` means stored."""
        tpr = np.mean(self.stored >= threshold)
        tnr = np.mean(self.fresh < threshold)
        return float(0.5 * (tpr + tnr))

    def best_threshold(self) -> float:
        """Threshold maximizing balanced accuracy, placed midway between neighbours."""
        vals = np.unique(np.concatenate([self.stored, self.fresh]))
        cands = np.concatenate([[vals[0] - 1.0], 0.5 * (vals[1:] + vals[:-1]), [vals[-1] + 1.0]])
        accs = [self.accuracy(c) for c in cands]
        return float(cands[int(np.argmax(accs))])


def tag_separability(d: int, n_items: int, n_fresh: int, seed: int = 0, kind: str = "hrr") -> Separability:
    """Store ``n_items`` unitary items, then compare ``cos(r_hat, tag)`` for
    stored against ``n_fresh`` unseen unitary queries."""
    mem = AssociativeMemory(kind, d, seed)
    rng = np.random.default_rng([seed, 7])
    items = vsa.project_unitary(rng.normal(0.0, d**-0.5, size=(n_items, d)))
    fresh = vsa.project_unitary(rng.normal(0.0, d**-0.5, size=(n_fresh, d)))
    for v in items:
        mem.insert(v, 1.0)
    tag = mem.tag

    def sims(qs: np.ndarray) -> np.ndarray:
        r_hat = mem.unbind(np.broadcast_to(mem.m, qs.shape), qs).data
        return _cosines(r_hat, np.broadcast_to(tag, qs.shape))

    return Separability(sims(items), sims(fresh))
