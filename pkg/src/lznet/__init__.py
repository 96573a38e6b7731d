"""Lempel-Ziv recurrent layers over vector-symbolic associative memories.

Subpackages by layer:

* :mod:`lznet.vsa`, :mod:`lznet.memory`: binding algebra and memories
* :mod:`lznet.lz`: classic LZ digests, LZJD and k-NN
* :mod:`lznet.engine`, :mod:`lznet.gradcheck`: reverse-mode autodiff
* :mod:`lznet.cells`, :mod:`lznet.layer`: LSTM cell, novelty score, LZ layer
* :mod:`lznet.tasks`, :mod:`lznet.train`, :mod:`lznet.cli`: data and harness
"""

from __future__ import annotations

from lznet.lz import Digest, jaccard_distance, knn_classify, lz_digest, lzjd
from lznet.memory import AssociativeMemory, MemoryKind, QueryResult, new_memory
from lznet.vsa import (
    bind_hrr,
    bind_vtb,
    bundle,
    cosine_similarity,
    project_unitary,
    pseudo_inverse,
    random_hypervector,
    unbind_hrr,
    unbind_vtb,
)

__version__ = "0.1.0"

__all__ = [
    "AssociativeMemory",
    "Digest",
    "MemoryKind",
    "QueryResult",
    "bind_hrr",
    "bind_vtb",
    "bundle",
    "cosine_similarity",
    "jaccard_distance",
    "knn_classify",
    "lz_digest",
    "lzjd",
    "new_memory",
    "project_unitary",
    "pseudo_inverse",
    "random_hypervector",
    "unbind_hrr",
    "unbind_vtb",
]
