"""Hypervector algebra: random vectors, unitary projection, HRR and VTB binding.

Hypervectors are plain float64 numpy arrays. Every function accepts a single
vector of shape ``(d,)`` or a batch of shape ``(..., d)``; the binding axis is
always the last one.

The DFT convention is numpy's default (unnormalized forward, ``1/d`` inverse).
Under it the circular convolution is exactly ``ifft(fft(a) * fft(b))`` and a
vector whose every spectral magnitude is 1 has unit L2 norm.
"""

from __future__ import annotations

import math

import numpy as np

HyperVector = np.ndarray

SPECTRAL_EPS = 1e-12
_IMAG_TOL = 1e-9


class DimensionError(ValueError):
    """Raised for an invalid or mismatched hypervector dimension."""


class DegenerateSpectrumError(ValueError):
    """Raised when a spectral component is too small to normalize or invert."""


class UndefinedSimilarityError(ValueError):
    """Raised when cosine similarity is requested for a zero-norm vector."""


def _as_vec(x) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 0:
        raise DimensionError("hypervector must have at least one axis")
    if arr.shape[-1] < 2:
        raise DimensionError(f"dimension must be >= 2, got {arr.shape[-1]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("hypervector entries must be finite")
    return arr


def _same_dim(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape[-1] != b.shape[-1]:
        raise DimensionError(f"dimension mismatch: {a.shape[-1]} vs {b.shape[-1]}")


def vtb_side(d: int) -> int:
    """Return ``sqrt(d)`` or raise if ``d`` is not a perfect square."""
    side = math.isqrt(d)
    if d < 2 or side * side != d:
        raise DimensionError(f"VTB needs a perfect-square dimension, got {d}")
    return side


def random_hypervector(d: int, seed: int) -> HyperVector:
    """I.i.d. N(0, 1/d) entries, deterministic for a given seed."""
    if int(d) != d or d < 2:
        raise DimensionError(f"dimension must be an integer >= 2, got {d}")
    rng = np.random.default_rng(seed)
    return rng.normal(0.0, 1.0 / math.sqrt(d), size=int(d))


def _real(z: np.ndarray) -> np.ndarray:
    if np.iscomplexobj(z):
        if np.max(np.abs(z.imag), initial=0.0) > _IMAG_TOL:
            raise RuntimeError("non-negligible imaginary residue in real transform")
        return z.real.copy()
    return z


def _check_spectrum(mag: np.ndarray) -> None:
    if np.min(mag, initial=np.inf) < SPECTRAL_EPS:
        raise DegenerateSpectrumError(
            f"spectral magnitude {np.min(mag):.3g} below tolerance {SPECTRAL_EPS:g}"
        )


def project_unitary(x) -> HyperVector:
    """Normalize every DFT component of ``x`` to unit magnitude."""
    x = _as_vec(x)
    d = x.shape[-1]
    spec = np.fft.rfft(x, axis=-1)
    mag = np.abs(spec)
    _check_spectrum(mag)
    return _real(np.fft.irfft(spec / mag, n=d, axis=-1))


def pseudo_inverse(a) -> HyperVector:
    """HRR pseudo-inverse: spectrum ``conj(F(a)) / |F(a)|``."""
    a = _as_vec(a)
    d = a.shape[-1]
    spec = np.fft.rfft(a, axis=-1)
    mag = np.abs(spec)
    _check_spectrum(mag)
    return np.fft.irfft(np.conj(spec) / mag, n=d, axis=-1)


def bind_hrr(a, b) -> HyperVector:
    """Circular convolution computed in the Fourier domain."""
    a, b = _as_vec(a), _as_vec(b)
    _same_dim(a, b)
    d = a.shape[-1]
    return np.fft.irfft(np.fft.rfft(a, axis=-1) * np.fft.rfft(b, axis=-1), n=d, axis=-1)


def unbind_hrr(s, a) -> HyperVector:
    """``s ⊛ a⁺`` with the conjugate-over-magnitude pseudo-inverse of ``a``."""
    s, a = _as_vec(s), _as_vec(a)
    _same_dim(s, a)
    d = a.shape[-1]
    spec_a = np.fft.rfft(a, axis=-1)
    mag = np.abs(spec_a)
    _check_spectrum(mag)
    return np.fft.irfft(np.fft.rfft(s, axis=-1) * np.conj(spec_a) / mag, n=d, axis=-1)


def circular_convolution_direct(a, b) -> HyperVector:
    """O(d^2) circular convolution; reference implementation for tests."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    d = a.shape[-1]
    out = np.zeros(np.broadcast_shapes(a.shape, b.shape))
    for n in range(d):
        for k in range(d):
            out[..., n] += a[..., k] * b[..., (n - k) % d]
    return out


def vtb_matrix(y) -> np.ndarray:
    """The ``d' x d'`` block ``d**(1/4) * reshape(y)`` (row-major)."""
    y = _as_vec(y)
    d = y.shape[-1]
    side = vtb_side(d)
    return d**0.25 * y.reshape(*y.shape[:-1], side, side)


def bind_vtb(x, y) -> HyperVector:
    """``V_y x`` with ``V_y`` block-diagonal in copies of :func:`vtb_matrix`."""
    x, y = _as_vec(x), _as_vec(y)
    _same_dim(x, y)
    d = x.shape[-1]
    side = vtb_side(d)
    blocks = x.reshape(*x.shape[:-1], side, side)
    # Each row of ``blocks`` is one length-d' chunk of x; rows map to V' @ chunk.
    out = blocks @ np.swapaxes(vtb_matrix(y), -1, -2)
    return out.reshape(*out.shape[:-2], d)


def unbind_vtb(s, y) -> HyperVector:
    """``V_y^T s``."""
    s, y = _as_vec(s), _as_vec(y)
    _same_dim(s, y)
    d = s.shape[-1]
    side = vtb_side(d)
    blocks = s.reshape(*s.shape[:-1], side, side)
    out = blocks @ vtb_matrix(y)
    return out.reshape(*out.shape[:-2], d)


def bundle(vs, weights) -> HyperVector:
    """Weighted elementwise sum."""
    vs = [np.asarray(v, dtype=np.float64) for v in vs]
    weights = list(weights)
    if len(vs) != len(weights):
        raise ValueError(f"{len(vs)} vectors but {len(weights)} weights")
    if not vs:
        raise ValueError("cannot bundle an empty list")
    first = vs[0]
    out = np.zeros_like(first)
    for v, w in zip(vs, weights):
        if v.shape != first.shape:
            raise DimensionError(f"shape mismatch in bundle: {v.shape} vs {first.shape}")
        out = out + w * v
    return out


def cosine_similarity(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _same_dim(a, b)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise UndefinedSimilarityError("cosine similarity of a zero-norm vector")
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))
