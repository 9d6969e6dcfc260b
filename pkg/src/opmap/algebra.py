"""Block operator algebra: direct sums of complex matrix algebras.

An algebra here is always a finite direct sum of full matrix blocks
``M_{d_1} + ... + M_{d_p}`` over the complex numbers.  Elements are stored
as dense per-block matrices; the norm is the largest block spectral norm
and positivity means each block is positive semidefinite (after
Hermitization within tolerance).

All functions are pure and elements are immutable after construction, so
values can be shared freely across threads.

Serialization convention (the wire format used by the CLI): an element is
the JSON object ``{"shape": [d1, ...], "blocks": [...]}`` where each block
is a row-major nested list and every complex entry is a ``[re, im]`` pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "AlgebraShape",
    "Element",
    "ToleranceConfig",
    "DEFAULT_TOL",
    "add",
    "adjoint",
    "anticommutator",
    "block_matrix",
    "block_positive_2x2",
    "center_valued_trace",
    "commutator",
    "conjugate",
    "direct_sum_matrix",
    "element_from_json",
    "element_to_json",
    "hermitian_deviation",
    "hermitian_part",
    "identity",
    "is_positive",
    "min_eig_hermitian_part",
    "multiply",
    "norm",
    "scale",
    "schur",
    "smallest_disk_radius",
    "subtract",
    "tensor",
    "trace",
    "zero",
]


@dataclass(frozen=True)
class ToleranceConfig:
    """Relative tolerance floors shared by every verdict in the package.

    ``psd_tol`` floors eigenvalues, ``eq_tol`` floors entrywise equality and
    ``herm_tol`` floors self-adjointness deviations.  All three are applied
    relative to ``1 + norm`` of the element under test.
    """

    psd_tol: float = 1e-9
    eq_tol: float = 1e-10
    herm_tol: float = 1e-8

    def __post_init__(self):
        for name in ("psd_tol", "eq_tol", "herm_tol"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0.0):
                raise ValueError(f"{name} must be finite and nonnegative, got {v!r}")


DEFAULT_TOL = ToleranceConfig()


@dataclass(frozen=True)
class AlgebraShape:
    """Ordered block dimensions of a direct sum of matrix algebras."""

    block_dims: tuple[int, ...]

    def __init__(self, block_dims: Iterable[int]):
        dims = tuple(int(d) for d in block_dims)
        if not dims:
            raise ValueError("shape needs at least one block")
        if any(d < 1 for d in dims):
            raise ValueError(f"block dimensions must be >= 1, got {dims}")
        object.__setattr__(self, "block_dims", dims)

    @property
    def num_blocks(self) -> int:
        return len(self.block_dims)

    @property
    def total_dim(self) -> int:
        """Storage size: sum of squared block sides."""
        return sum(d * d for d in self.block_dims)

    def amplified(self, n: int) -> "AlgebraShape":
        """Shape of n-by-n operator matrices over this algebra."""
        if n < 1:
            raise ValueError(f"amplification order must be >= 1, got {n}")
        return AlgebraShape(tuple(n * d for d in self.block_dims))

    def is_commutative(self) -> bool:
        return all(d == 1 for d in self.block_dims)


class Element:
    """Immutable element of a block algebra: one dense matrix per block."""

    __slots__ = ("shape", "blocks")

    def __init__(self, shape: AlgebraShape, blocks: Sequence[np.ndarray]):
        if len(blocks) != shape.num_blocks:
            raise ValueError(
                f"expected {shape.num_blocks} blocks, got {len(blocks)}"
            )
        frozen = []
        for d, b in zip(shape.block_dims, blocks):
            arr = np.array(b, dtype=np.complex128, copy=True, order="C")
            if arr.shape != (d, d):
                raise ValueError(f"block has shape {arr.shape}, expected {(d, d)}")
            arr.flags.writeable = False
            frozen.append(arr)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "blocks", tuple(frozen))

    def __setattr__(self, name, value):
        raise AttributeError("Element is immutable")

    def __repr__(self):
        return f"Element(shape={self.shape.block_dims})"

    # Convenience arithmetic; the named functions below are the primary API.
    def __add__(self, other: "Element") -> "Element":
        return add(self, other)

    def __sub__(self, other: "Element") -> "Element":
        return subtract(self, other)

    def __mul__(self, other):
        if isinstance(other, Element):
            return multiply(self, other)
        return scale(other, self)

    def __rmul__(self, scalar) -> "Element":
        return scale(scalar, self)

    def __matmul__(self, other: "Element") -> "Element":
        return multiply(self, other)

    def __neg__(self) -> "Element":
        return scale(-1.0, self)


def _require_same_shape(x: Element, y: Element, op: str):
    if x.shape != y.shape:
        raise ValueError(
            f"{op}: shape mismatch {x.shape.block_dims} vs {y.shape.block_dims}"
        )


def identity(shape: AlgebraShape) -> Element:
    return Element(shape, [np.eye(d) for d in shape.block_dims])


def zero(shape: AlgebraShape) -> Element:
    return Element(shape, [np.zeros((d, d)) for d in shape.block_dims])


def add(x: Element, y: Element) -> Element:
    _require_same_shape(x, y, "add")
    return Element(x.shape, [a + b for a, b in zip(x.blocks, y.blocks)])


def subtract(x: Element, y: Element) -> Element:
    _require_same_shape(x, y, "subtract")
    return Element(x.shape, [a - b for a, b in zip(x.blocks, y.blocks)])


def scale(z: complex, x: Element) -> Element:
    return Element(x.shape, [z * b for b in x.blocks])


def multiply(x: Element, y: Element) -> Element:
    _require_same_shape(x, y, "multiply")
    return Element(x.shape, [a @ b for a, b in zip(x.blocks, y.blocks)])


def adjoint(x: Element) -> Element:
    return Element(x.shape, [b.conj().T for b in x.blocks])


def conjugate(x: Element) -> Element:
    """Entrywise complex conjugate (the conjugate-algebra realization)."""
    return Element(x.shape, [b.conj() for b in x.blocks])


def schur(x: Element, y: Element) -> Element:
    _require_same_shape(x, y, "schur")
    return Element(x.shape, [a * b for a, b in zip(x.blocks, y.blocks)])


def commutator(a: Element, b: Element) -> Element:
    return subtract(multiply(a, b), multiply(b, a))


def anticommutator(a: Element, b: Element) -> Element:
    return add(multiply(a, b), multiply(b, a))


def trace(x: Element) -> complex:
    """Sum of the plain (unnormalized) block traces."""
    return complex(sum(np.trace(b) for b in x.blocks))


def norm(x: Element) -> float:
    """C*-norm: the largest block spectral norm."""
    return max(float(np.linalg.norm(b, 2)) for b in x.blocks)


def hermitian_part(x: Element) -> Element:
    return Element(x.shape, [(b + b.conj().T) / 2.0 for b in x.blocks])


def hermitian_deviation(x: Element) -> float:
    return norm(subtract(x, adjoint(x)))


def min_eig_hermitian_part(x: Element) -> float:
    return min(
        float(np.linalg.eigvalsh((b + b.conj().T) / 2.0)[0]) for b in x.blocks
    )


def is_positive(x: Element, tol: ToleranceConfig = DEFAULT_TOL) -> tuple[bool, float]:
    """PSD verdict with a relative eigenvalue floor.

    Returns ``(verdict, min_eig)`` where ``min_eig`` is the smallest
    eigenvalue of the Hermitian part across all blocks, reported even when
    the verdict is negative.  The verdict requires both near
    self-adjointness and ``min_eig >= -psd_tol * (1 + norm)``; a large
    self-adjointness deviation is a negative verdict, not an exception.
    """
    scale_ref = 1.0 + norm(x)
    min_eig = min_eig_hermitian_part(x)
    if hermitian_deviation(x) > tol.herm_tol * scale_ref:
        return False, min_eig
    return min_eig >= -tol.psd_tol * scale_ref, min_eig


# Relative epsilons for the Schur-complement cross-check ladder.
_SCHUR_EPS_LADDER = (1e-4, 1e-6, 1e-8)


def block_positive_2x2(
    a: Element, x: Element, b: Element, tol: ToleranceConfig = DEFAULT_TOL
) -> bool:
    """Positivity of the operator matrix ``[[A, X], [X*, B]]``.

    The verdict comes from the assembled matrix; the Schur-complement
    criterion ``B - X*(A + eps I)^{-1} X >= 0`` is evaluated on a
    decreasing eps ladder as a consistency cross-check (a PSD verdict with
    a strongly negative Schur complement indicates a numerical fault).
    """
    _require_same_shape(a, x, "block_positive_2x2")
    _require_same_shape(a, b, "block_positive_2x2")
    scale_a = 1.0 + norm(a)
    if hermitian_deviation(a) > tol.herm_tol * scale_a:
        raise ValueError("block_positive_2x2: A is not Hermitian")
    if hermitian_deviation(b) > tol.herm_tol * (1.0 + norm(b)):
        raise ValueError("block_positive_2x2: B is not Hermitian")

    assembled = block_matrix([[a, x], [adjoint(x), b]])
    verdict, _ = is_positive(assembled, tol)

    for eps_rel in _SCHUR_EPS_LADDER:
        eps = eps_rel * scale_a
        comp_blocks = []
        for ab, xb, bb in zip(a.blocks, x.blocks, b.blocks):
            ah = (ab + ab.conj().T) / 2.0
            shifted = ah + eps * np.eye(ah.shape[0])
            comp_blocks.append(bb - xb.conj().T @ np.linalg.solve(shifted, xb))
        comp = Element(a.shape, comp_blocks)
        rung_min = min_eig_hermitian_part(comp)
        if verdict and rung_min < -100.0 * tol.psd_tol * (1.0 + norm(comp)):
            raise ArithmeticError(
                "block_positive_2x2: eigenvalue test and Schur-complement "
                f"ladder disagree (eps={eps:.3e}, rung min eig {rung_min:.3e})"
            )
    return verdict


def tensor(x: Element, y: Element) -> Element:
    """Kronecker product; output blocks ordered lexicographically in (i, j)."""
    dims = tuple(
        dx * dy for dx in x.shape.block_dims for dy in y.shape.block_dims
    )
    blocks = [np.kron(bx, by) for bx in x.blocks for by in y.blocks]
    return Element(AlgebraShape(dims), blocks)


def center_valued_trace(x: Element) -> Element:
    """Projection onto the center: each block becomes (tr/d) * identity."""
    blocks = [
        (np.trace(b) / d) * np.eye(d) for d, b in zip(x.shape.block_dims, x.blocks)
    ]
    return Element(x.shape, blocks)


def block_matrix(entries: Sequence[Sequence[Element]]) -> Element:
    """Assemble an n-by-n array of same-shape elements into one element.

    The output lives on the n-amplified shape; within each original block
    the (i, j) sub-block is the corresponding entry's block.
    """
    n = len(entries)
    if n == 0 or any(len(row) != n for row in entries):
        raise ValueError("block_matrix needs a square, nonempty array of entries")
    shape = entries[0][0].shape
    for row in entries:
        for e in row:
            if e.shape != shape:
                raise ValueError("block_matrix entries must share one shape")
    out_blocks = []
    for b in range(shape.num_blocks):
        out_blocks.append(
            np.block([[entries[i][j].blocks[b] for j in range(n)] for i in range(n)])
        )
    return Element(shape.amplified(n), out_blocks)


def direct_sum_matrix(x: Element) -> np.ndarray:
    """Embed the element as one dense block-diagonal matrix."""
    total = sum(x.shape.block_dims)
    out = np.zeros((total, total), dtype=np.complex128)
    pos = 0
    for d, b in zip(x.shape.block_dims, x.blocks):
        out[pos : pos + d, pos : pos + d] = b
        pos += d
    return out


# ---------------------------------------------------------------------------
# Smallest enclosing disk of the joint spectrum
# ---------------------------------------------------------------------------


def _circle_two(p: complex, q: complex) -> tuple[complex, float]:
    c = (p + q) / 2.0
    return c, max(abs(p - c), abs(q - c))


def _circumcircle(p: complex, q: complex, r: complex) -> tuple[complex, float] | None:
    ax, ay = p.real, p.imag
    bx, by = q.real, q.imag
    cx, cy = r.real, r.imag
    d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    if abs(d) < 1e-14 * (abs(p) + abs(q) + abs(r) + 1.0) ** 2:
        return None
    ux = (
        (ax * ax + ay * ay) * (by - cy)
        + (bx * bx + by * by) * (cy - ay)
        + (cx * cx + cy * cy) * (ay - by)
    ) / d
    uy = (
        (ax * ax + ay * ay) * (cx - bx)
        + (bx * bx + by * by) * (ax - cx)
        + (cx * cx + cy * cy) * (bx - ax)
    ) / d
    center = complex(ux, uy)
    return center, max(abs(p - center), abs(q - center), abs(r - center))


def _in_circle(c: complex, r: float, p: complex) -> bool:
    return abs(p - c) <= r * (1.0 + 1e-12) + 1e-14


def _min_enclosing_circle(points: Sequence[complex]) -> tuple[complex, float]:
    # Deterministic incremental construction; cubic worst case is fine for
    # the handful of spectrum points that ever occur here.
    pts = list(points)
    if not pts:
        raise ValueError("no points")
    c, r = pts[0], 0.0
    for i, p in enumerate(pts):
        if _in_circle(c, r, p):
            continue
        c, r = p, 0.0
        for j, q in enumerate(pts[: i + 1]):
            if _in_circle(c, r, q):
                continue
            c, r = _circle_two(p, q)
            for s in pts[: j + 1]:
                if _in_circle(c, r, s):
                    continue
                circ = _circumcircle(p, q, s)
                if circ is None:
                    # collinear: the enclosing circle has the farthest pair
                    # as a diameter
                    pairs = [(p, q), (p, s), (q, s)]
                    far = max(pairs, key=lambda t: abs(t[0] - t[1]))
                    c, r = _circle_two(*far)
                else:
                    c, r = circ
    return c, r


def smallest_disk_radius(x: Element, tol: ToleranceConfig = DEFAULT_TOL) -> float:
    """Radius of the smallest disk containing the joint spectrum.

    Equals ``min over alpha of norm(X - alpha I)`` for normal ``X``; the
    input is verified to be normal within tolerance and a ``ValueError`` is
    raised otherwise.  For Hermitian input this is half the spectral spread.
    """
    scale_ref = (1.0 + norm(x)) ** 2
    dev = norm(
        subtract(multiply(adjoint(x), x), multiply(x, adjoint(x)))
    )
    if dev > tol.herm_tol * scale_ref:
        raise ValueError(
            f"smallest_disk_radius requires a normal element (deviation {dev:.3e})"
        )
    points: list[complex] = []
    for b in x.blocks:
        points.extend(complex(v) for v in np.linalg.eigvals(b))
    _, radius = _min_enclosing_circle(points)
    return float(radius)


def smallest_disk_center(x: Element, tol: ToleranceConfig = DEFAULT_TOL) -> complex:
    """Center of the smallest spectrum-enclosing disk of a normal element."""
    scale_ref = (1.0 + norm(x)) ** 2
    dev = norm(subtract(multiply(adjoint(x), x), multiply(x, adjoint(x))))
    if dev > tol.herm_tol * scale_ref:
        raise ValueError("smallest_disk_center requires a normal element")
    points: list[complex] = []
    for b in x.blocks:
        points.extend(complex(v) for v in np.linalg.eigvals(b))
    center, _ = _min_enclosing_circle(points)
    return center


# ---------------------------------------------------------------------------
# JSON wire format
# ---------------------------------------------------------------------------


def element_to_json(x: Element) -> dict:
    blocks = []
    for b in x.blocks:
        blocks.append(
            [[[float(v.real), float(v.imag)] for v in row] for row in b]
        )
    return {"shape": list(x.shape.block_dims), "blocks": blocks}


def element_from_json(obj: dict) -> Element:
    if not isinstance(obj, dict) or "shape" not in obj or "blocks" not in obj:
        raise ValueError("element JSON needs 'shape' and 'blocks'")
    dims = obj["shape"]
    if not isinstance(dims, list) or not all(
        isinstance(d, int) and d >= 1 for d in dims
    ):
        raise ValueError(f"bad shape field: {dims!r}")
    shape = AlgebraShape(dims)
    raw = obj["blocks"]
    if not isinstance(raw, list) or len(raw) != len(dims):
        raise ValueError("block count does not match shape")
    blocks = []
    for d, rows in zip(dims, raw):
        if not isinstance(rows, list) or len(rows) != d:
            raise ValueError(f"block must have {d} rows")
        mat = np.zeros((d, d), dtype=np.complex128)
        for i, row in enumerate(rows):
            if not isinstance(row, list) or len(row) != d:
                raise ValueError(f"block rows must have {d} entries")
            for j, entry in enumerate(row):
                if (
                    not isinstance(entry, list)
                    or len(entry) != 2
                    or not all(isinstance(v, (int, float)) for v in entry)
                ):
                    raise ValueError("entries must be [re, im] pairs")
                mat[i, j] = complex(entry[0], entry[1])
        blocks.append(mat)
    return Element(shape, blocks)
