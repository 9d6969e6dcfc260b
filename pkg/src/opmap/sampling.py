"""Seeded random element generation.

Reproducibility convention: every randomized trial uses an independent
generator seeded with ``seed XOR trial_index`` (64-bit), so trial batches
can run in any order, or concurrently, and still produce identical
streams.  PSD samples are Gram matrices ``G G*`` normalized to unit
spectral norm, which keeps all tolerance floors scale-free.
"""

from __future__ import annotations

import numpy as np

from .algebra import AlgebraShape, Element, norm, scale

_MASK64 = (1 << 64) - 1


def rng_for_trial(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng((int(seed) ^ int(trial)) & _MASK64)


def ginibre_matrix(rng: np.random.Generator, d: int) -> np.ndarray:
    return (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(
        2.0
    )


def random_element(rng: np.random.Generator, shape: AlgebraShape) -> Element:
    """Complex Gaussian element, normalized to unit norm."""
    x = Element(shape, [ginibre_matrix(rng, d) for d in shape.block_dims])
    return scale(1.0 / norm(x), x)


def random_psd(rng: np.random.Generator, shape: AlgebraShape) -> Element:
    """Gram-built PSD element with unit spectral norm."""
    blocks = []
    for d in shape.block_dims:
        g = ginibre_matrix(rng, d)
        blocks.append(g @ g.conj().T)
    x = Element(shape, blocks)
    return scale(1.0 / norm(x), x)


def random_hermitian(rng: np.random.Generator, shape: AlgebraShape) -> Element:
    blocks = []
    for d in shape.block_dims:
        g = ginibre_matrix(rng, d)
        blocks.append((g + g.conj().T) / 2.0)
    x = Element(shape, blocks)
    return scale(1.0 / norm(x), x)


def random_unitary(rng: np.random.Generator, d: int) -> np.ndarray:
    q, r = np.linalg.qr(ginibre_matrix(rng, d))
    return q * (np.diagonal(r) / np.abs(np.diagonal(r)))


def random_normal(rng: np.random.Generator, shape: AlgebraShape) -> Element:
    """Normal element: unitary-conjugated complex diagonal per block."""
    blocks = []
    for d in shape.block_dims:
        u = random_unitary(rng, d)
        diag = rng.standard_normal(d) + 1j * rng.standard_normal(d)
        blocks.append(u @ np.diag(diag) @ u.conj().T)
    x = Element(shape, blocks)
    return scale(1.0 / norm(x), x)


def random_density(rng: np.random.Generator, shape: AlgebraShape) -> Element:
    """PSD element with unit sum of block traces."""
    blocks = []
    for d in shape.block_dims:
        g = ginibre_matrix(rng, d)
        blocks.append(g @ g.conj().T)
    total = sum(float(np.trace(b).real) for b in blocks)
    return Element(shape, [b / total for b in blocks])
