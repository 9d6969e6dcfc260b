"""Constructors for concrete maps and seeded random map families.

Every constructor returns a registered ``MapDescriptor`` whose claimed
flags hold by construction (and are spot-checked at registration).  Maps
built here also carry a JSON spec, the wire format used by the CLI:
``{"kind": ..., "params": {...}}`` with numeric payloads in the element
wire format.  ``composite`` nests two specs and is how factorizations
through a commutative algebra are expressed.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .algebra import (
    AlgebraShape,
    Element,
    add,
    adjoint,
    direct_sum_matrix,
    element_from_json,
    element_to_json,
    identity,
    multiply,
    norm,
    scale,
    subtract,
    tensor,
    zero,
)
from .maps import KrausSet, MapDescriptor, register_map
from .sampling import ginibre_matrix

__all__ = [
    "center_coordinates",
    "center_lift",
    "center_restriction_map",
    "center_trace_map",
    "composite_map",
    "conjugate_power_multimap",
    "hadamard_power_map",
    "hadamard_power_multimap",
    "kraus_map",
    "map_from_spec",
    "map_to_spec",
    "monomial_map",
    "operator_norm_map",
    "product_map",
    "projection_multimap",
    "random_center_poly_map",
    "random_cp_multilinear",
    "random_dinfty_map",
    "random_hermitian_preserving_linear",
    "random_kraus_map",
    "random_tracial_linear",
    "random_tracial_multilinear",
    "schur_multimap",
    "state_functional",
    "tensor_map",
    "trace_multimap",
    "transpose_map",
    "transpose_tensor_map",
    "vector_states_map",
]


def _matrix_to_json(m: np.ndarray) -> list:
    return [[[float(v.real), float(v.imag)] for v in row] for row in np.asarray(m)]


def _matrix_from_json(rows: list) -> np.ndarray:
    return np.array(
        [[complex(e[0], e[1]) for e in row] for row in rows], dtype=np.complex128
    )


def _inv_sqrt_psd(m: np.ndarray) -> np.ndarray:
    w, u = np.linalg.eigh((m + m.conj().T) / 2.0)
    if w[0] <= 0:
        raise ValueError("normalizer is singular; cannot form inverse square root")
    return (u * (1.0 / np.sqrt(w))) @ u.conj().T


def _inv_sqrt_element(x: Element) -> Element:
    return Element(x.shape, [_inv_sqrt_psd(b) for b in x.blocks])


# ---------------------------------------------------------------------------
# Linear maps on one block
# ---------------------------------------------------------------------------


def kraus_map(
    operators: Sequence[np.ndarray] | KrausSet,
    unital_normalize: bool = False,
    name: str = "kraus",
) -> MapDescriptor:
    """``A -> sum_r V_r A V_r*`` with V_r of shape (codomain x domain).

    With this convention the map is unital iff ``sum_r V_r V_r* = I``;
    ``unital_normalize`` rescales the operators to enforce that.
    """
    ks = operators if isinstance(operators, KrausSet) else KrausSet(tuple(
        np.asarray(op, dtype=np.complex128) for op in operators
    ))
    ops = list(ks.operators)
    c, d = ks.codomain_dim, ks.domain_dim
    if unital_normalize:
        t = sum(v @ v.conj().T for v in ops)
        w = _inv_sqrt_psd(t)
        ops = [w @ v for v in ops]
    total = sum(v @ v.conj().T for v in ops)
    unital = bool(np.linalg.norm(total - np.eye(c), 2) <= 1e-10 * (1 + c))
    dom = AlgebraShape((d,))
    cod = AlgebraShape((c,))

    def ev(a: Element) -> Element:
        m = a.blocks[0]
        return Element(cod, [sum(v @ m @ v.conj().T for v in ops)])

    flags = ["positive", "completely_positive"] + (["unital"] if unital else [])
    spec = {
        "kind": "kraus",
        "params": {"operators": [_matrix_to_json(v) for v in ops]},
    }
    return register_map(
        1, (dom,), cod, "linear", ev, flags=flags, name=name, spec=spec
    )


def transpose_map(d: int) -> MapDescriptor:
    """The canonical positive, not 2-positive, linear map on M_d."""
    dom = AlgebraShape((d,))

    def ev(a: Element) -> Element:
        return Element(dom, [a.blocks[0].T])

    spec = {"kind": "transpose", "params": {"d": d}}
    return register_map(
        1,
        (dom,),
        dom,
        "linear",
        ev,
        flags=["positive", "unital"],
        n_positive=1,
        name=f"transpose[{d}]",
        spec=spec,
    )


def state_functional(rho: Element, name: str = "state") -> MapDescriptor:
    """``A -> sum_b tr(rho_b A_b)`` into the scalars; unital iff tr(rho) = 1."""
    shape = rho.shape
    cod = AlgebraShape((1,))
    total = sum(float(np.trace(b).real) for b in rho.blocks)
    flags = ["positive", "completely_positive"]
    if abs(total - 1.0) <= 1e-10:
        flags.append("unital")
    if all(
        np.linalg.norm(b - (np.trace(b) / d) * np.eye(d)) <= 1e-12
        for d, b in zip(shape.block_dims, rho.blocks)
    ):
        flags.append("tracial")

    def ev(a: Element) -> Element:
        val = sum(np.trace(rb @ ab) for rb, ab in zip(rho.blocks, a.blocks))
        return Element(cod, [np.array([[val]])])

    spec = {"kind": "state", "params": {"rho": element_to_json(rho)}}
    return register_map(1, (shape,), cod, "linear", ev, flags=flags, name=name, spec=spec)


def vector_states_map(vectors: Sequence[np.ndarray], domain_dim: int) -> MapDescriptor:
    """``A -> (v_1* A v_1, ..., v_q* A v_q)``: CP with commutative range."""
    vecs = [np.asarray(v, dtype=np.complex128).reshape(-1) for v in vectors]
    if any(v.size != domain_dim for v in vecs):
        raise ValueError("vector length must match the domain dimension")
    dom = AlgebraShape((domain_dim,))
    cod = AlgebraShape((1,) * len(vecs))
    unital = all(abs(np.vdot(v, v) - 1.0) <= 1e-10 for v in vecs)

    def ev(a: Element) -> Element:
        m = a.blocks[0]
        return Element(cod, [np.array([[np.vdot(v, m @ v)]]) for v in vecs])

    flags = ["positive", "completely_positive"] + (["unital"] if unital else [])
    spec = {
        "kind": "vector_states",
        "params": {
            "domain_dim": domain_dim,
            "vectors": [_matrix_to_json(v.reshape(1, -1)) for v in vecs],
        },
    }
    return register_map(
        1, (dom,), cod, "linear", ev, flags=flags, name="vector_states", spec=spec
    )


# ---------------------------------------------------------------------------
# Multimaps
# ---------------------------------------------------------------------------


def tensor_map(dims: Sequence[int]) -> MapDescriptor:
    """``(A_1, ..., A_k) -> A_1 (x) ... (x) A_k`` on single matrix blocks."""
    dims = tuple(int(d) for d in dims)
    doms = tuple(AlgebraShape((d,)) for d in dims)
    cod = AlgebraShape((int(np.prod(dims)),))

    def ev(*args: Element) -> Element:
        out = args[0]
        for a in args[1:]:
            out = tensor(out, a)
        return out

    spec = {"kind": "tensor", "params": {"dims": list(dims)}}
    return register_map(
        len(dims),
        doms,
        cod,
        "multilinear",
        ev,
        flags=["positive", "completely_positive", "unital"],
        name="tensor",
        spec=spec,
    )


def product_map(shape: AlgebraShape, k: int) -> MapDescriptor:
    """``(A_1, ..., A_k) -> A_1 A_2 ... A_k`` on a common algebra.

    Positive for the entrywise amplification only over commutative
    algebras; over noncommutative ones the flags stay empty and the
    contracted-amplification tester is the meaningful one.
    """

    def ev(*args: Element) -> Element:
        out = args[0]
        for a in args[1:]:
            out = multiply(out, a)
        return out

    flags = ["unital"]
    if shape.is_commutative():
        flags += ["positive", "completely_positive", "tracial"]
    spec = {"kind": "product", "params": {"shape": list(shape.block_dims), "k": k}}
    return register_map(
        k,
        (shape,) * k,
        shape,
        "multilinear",
        ev,
        flags=flags,
        name=f"product[k={k}]",
        spec=spec,
    )


def trace_multimap(shape: AlgebraShape, k: int, normalized: bool = False) -> MapDescriptor:
    """``(A_1, ..., A_k) -> prod_i tr(A_i)``, the tracial CP scalar multimap."""
    cod = AlgebraShape((1,))
    denom = float(sum(shape.block_dims)) if normalized else 1.0

    def ev(*args: Element) -> Element:
        val = 1.0 + 0.0j
        for a in args:
            val *= sum(np.trace(b) for b in a.blocks) / denom
        return Element(cod, [np.array([[val]])])

    flags = ["tracial", "positive", "completely_positive"]
    if normalized:
        flags.append("unital")
    spec = {
        "kind": "trace_multimap",
        "params": {"shape": list(shape.block_dims), "k": k, "normalized": normalized},
    }
    return register_map(
        k, (shape,) * k, cod, "multilinear", ev, flags=flags, name="trace", spec=spec
    )


def projection_multimap(shape: AlgebraShape, k: int) -> MapDescriptor:
    """``(A_1, ..., A_k) -> (A_1, ..., A_{k-1})`` for even k.

    Completely positive for the entrywise amplification, yet not even
    positive for the contracted one.
    """
    if k < 2 or k % 2 != 0:
        raise ValueError("the projection multimap is defined for even k >= 2")
    cod = AlgebraShape(shape.block_dims * (k - 1))

    def ev(*args: Element) -> Element:
        blocks = []
        for a in args[: k - 1]:
            blocks.extend(a.blocks)
        return Element(cod, blocks)

    spec = {"kind": "projection", "params": {"shape": list(shape.block_dims), "k": k}}
    return register_map(
        k,
        (shape,) * k,
        cod,
        "linear",
        ev,
        flags=["positive", "completely_positive", "unital"],
        name=f"projection[k={k}]",
        spec=spec,
    )


def schur_multimap(shape: AlgebraShape, k: int) -> MapDescriptor:
    """Entrywise (Schur) product of k inputs; CP for the entrywise notion."""

    def ev(*args: Element) -> Element:
        blocks = [b.copy() for b in args[0].blocks]
        for a in args[1:]:
            blocks = [x * y for x, y in zip(blocks, a.blocks)]
        return Element(shape, blocks)

    spec = {"kind": "schur", "params": {"shape": list(shape.block_dims), "k": k}}
    return register_map(
        k,
        (shape,) * k,
        shape,
        "multilinear",
        ev,
        flags=["positive", "completely_positive", "unital"],
        name=f"schur[k={k}]",
        spec=spec,
    )


def transpose_tensor_map() -> MapDescriptor:
    """``(A, B) -> A^T (x) B^T`` on M_2: positive bilinear, not 2-positive."""
    dom = AlgebraShape((2,))
    cod = AlgebraShape((4,))

    def ev(a: Element, b: Element) -> Element:
        return Element(cod, [np.kron(a.blocks[0].T, b.blocks[0].T)])

    spec = {"kind": "transpose_tensor", "params": {}}
    return register_map(
        2,
        (dom, dom),
        cod,
        "multilinear",
        ev,
        flags=["positive", "unital"],
        n_positive=1,
        name="transpose_tensor",
        spec=spec,
    )


def _threshold_order(m: int, min_alpha: float) -> int:
    # entrywise power positivity threshold: n-positive iff alpha >= n*m - 2
    return max(0, int(math.floor((min_alpha + 2.0) / m + 1e-12)))


def hadamard_power_multimap(m: int, alphas: Sequence[float]) -> MapDescriptor:
    """Entrywise absolute powers composed by Schur products on M_m.

    Slot i applies ``x -> |x|^alpha_i`` entrywise; the outputs are Schur
    multiplied.  The entrywise order-n positivity threshold is
    ``min(alphas) >= n*m - 2`` and the claimed flags follow it.
    """
    alphas = tuple(float(a) for a in alphas)
    dom = AlgebraShape((m,))
    k = len(alphas)

    def ev(*args: Element) -> Element:
        out = np.ones((m, m))
        with np.errstate(divide="ignore"):  # negative powers at zero entries
            for a, alpha in zip(args, alphas):
                out = out * np.abs(a.blocks[0]) ** alpha
        return Element(dom, [out])

    n_claim = _threshold_order(m, min(alphas))
    flags = ["positive"] if n_claim >= 1 else []
    spec = {"kind": "hadamard_power", "params": {"m": m, "alphas": list(alphas)}}
    return register_map(
        k,
        (dom,) * k,
        dom,
        "opaque",
        ev,
        flags=flags,
        n_positive=n_claim,
        name=f"hadamard_power[m={m}]",
        spec=spec,
    )


def hadamard_power_map(m: int, alpha: float) -> MapDescriptor:
    return hadamard_power_multimap(m, (alpha,))


def conjugate_power_multimap(m: int, alphas: Sequence[float]) -> MapDescriptor:
    """Entrywise ``|x|^(2 alpha_i)`` maps composed by Schur products.

    Same positivity threshold in the alphas as the absolute-power family;
    for natural-number alphas the map is completely positive.
    """
    alphas = tuple(float(a) for a in alphas)
    dom = AlgebraShape((m,))
    k = len(alphas)

    def ev(*args: Element) -> Element:
        out = np.ones((m, m))
        with np.errstate(divide="ignore"):  # negative powers at zero entries
            for a, alpha in zip(args, alphas):
                out = out * np.abs(a.blocks[0]) ** (2.0 * alpha)
        return Element(dom, [out])

    n_claim = _threshold_order(m, min(alphas))
    integral = all(abs(a - round(a)) < 1e-12 and a >= 1 for a in alphas)
    flags = ["positive"] if (n_claim >= 1 or integral) else []
    if integral:
        flags.append("completely_positive")
    spec = {"kind": "conjugate_power", "params": {"m": m, "alphas": list(alphas)}}
    return register_map(
        k,
        (dom,) * k,
        dom,
        "opaque",
        ev,
        flags=flags,
        n_positive=n_claim,
        name=f"conjugate_power[m={m}]",
        spec=spec,
    )


def operator_norm_map(shape: AlgebraShape, claim_n_positive: int = 2) -> MapDescriptor:
    """``A -> norm(A)`` into the scalars.

    2-positive (and norm-symmetric under ``X -> X*X`` vs ``X X*``) but not
    3-positive: registering it with ``claim_n_positive >= 3`` is rejected
    by the superadditivity spot check.
    """
    cod = AlgebraShape((1,))

    def ev(a: Element) -> Element:
        return Element(cod, [np.array([[norm(a)]])])

    return register_map(
        1,
        (shape,),
        cod,
        "opaque",
        ev,
        flags=["positive", "unital"],
        n_positive=claim_n_positive,
        name="operator_norm",
    )


# ---------------------------------------------------------------------------
# Center machinery and compositions
# ---------------------------------------------------------------------------


def center_lift(shape: AlgebraShape, coords: Sequence[complex]) -> Element:
    """Lift one scalar per block to the block-scalar element of ``shape``."""
    if len(coords) != shape.num_blocks:
        raise ValueError("coordinate count must match the block count")
    return Element(
        shape, [complex(c) * np.eye(d) for d, c in zip(shape.block_dims, coords)]
    )


def center_coordinates(x: Element) -> list[complex]:
    return [
        complex(np.trace(b) / d) for d, b in zip(x.shape.block_dims, x.blocks)
    ]


def center_trace_map(domain_shapes: Sequence[AlgebraShape]) -> MapDescriptor:
    """Slot-wise center-valued trace, flattened to scalar coordinates.

    Linear on the direct sum of the slots, tracial, unital, and completely
    positive (its range is commutative).
    """
    domain_shapes = tuple(domain_shapes)
    p = sum(s.num_blocks for s in domain_shapes)
    cod = AlgebraShape((1,) * p)

    def ev(*args: Element) -> Element:
        coords: list[complex] = []
        for a in args:
            coords.extend(center_coordinates(a))
        return Element(cod, [np.array([[c]]) for c in coords])

    spec = {
        "kind": "center_trace",
        "params": {"domains": [list(s.block_dims) for s in domain_shapes]},
    }
    return register_map(
        len(domain_shapes),
        domain_shapes,
        cod,
        "linear",
        ev,
        flags=["tracial", "positive", "completely_positive", "unital"],
        name="center_trace",
        spec=spec,
    )


def center_restriction_map(md: MapDescriptor) -> MapDescriptor:
    """The map evaluated on center coordinates lifted back to block scalars."""
    doms = tuple(AlgebraShape((1,) * s.num_blocks) for s in md.domain_shapes)

    def ev(*coord_elems: Element) -> Element:
        lifted = []
        for ce, s in zip(coord_elems, md.domain_shapes):
            coords = [complex(b[0, 0]) for b in ce.blocks]
            lifted.append(center_lift(s, coords))
        return md.evaluator(*lifted)

    flags = [f for f in ("tracial", "positive", "unital") if f in md.flags]
    if "positive" in md.flags or "completely_positive" in md.flags:
        # positive with commutative domain: completely positive
        flags.append("completely_positive")
    spec = None
    if md.spec is not None:
        spec = {"kind": "center_restriction", "params": {"of": md.spec}}
    return register_map(
        md.arity,
        doms,
        md.codomain_shape,
        md.linearity,
        ev,
        flags=sorted(set(flags)),
        degree_bound=md.degree_bound,
        name=f"center_restriction({md.name})",
        spec=spec,
    )


def monomial_map(
    num_coords: int,
    terms: Sequence[tuple[Sequence[int], Sequence[int], Element]],
    codomain_shape: AlgebraShape,
    unital_normalize: bool = False,
    name: str = "monomial",
) -> MapDescriptor:
    """``c -> sum_j (prod_i c_i^e_ji conj(c_i)^f_ji) Q_j`` on scalar tuples.

    With PSD coefficients this is a completely positive (entrywise notion)
    map on the commutative algebra of ``num_coords`` scalars; it is
    trivially tracial, and fixes zero whenever no term is constant.
    """
    prepared = []
    for powers, conj_powers, coeff in terms:
        powers = tuple(int(e) for e in powers)
        conj_powers = tuple(int(f) for f in conj_powers)
        if len(powers) != num_coords or len(conj_powers) != num_coords:
            raise ValueError("term exponent lists must match the coordinate count")
        if coeff.shape != codomain_shape:
            raise ValueError("coefficient shape must match the codomain")
        prepared.append((powers, conj_powers, coeff))
    if unital_normalize:
        total = prepared[0][2]
        for _, _, c in prepared[1:]:
            total = add(total, c)
        w = _inv_sqrt_element(total)
        prepared = [
            (e, f, multiply(multiply(w, c), w)) for e, f, c in prepared
        ]
    dom = AlgebraShape((1,) * num_coords)
    degree = max(sum(e) + sum(f) for e, f, _ in prepared)

    def ev(a: Element) -> Element:
        coords = [complex(b[0, 0]) for b in a.blocks]
        out = zero(codomain_shape)
        for powers, conj_powers, coeff in prepared:
            val = 1.0 + 0.0j
            for c, e, f in zip(coords, powers, conj_powers):
                if e:
                    val *= c**e
                if f:
                    val *= np.conj(c) ** f
            out = add(out, scale(val, coeff))
        return out

    flags = ["tracial", "positive", "completely_positive"]
    if unital_normalize:
        flags.append("unital")
    spec = {
        "kind": "monomial",
        "params": {
            "coords": num_coords,
            "codomain": list(codomain_shape.block_dims),
            "terms": [
                {
                    "powers": list(e),
                    "conj_powers": list(f),
                    "coefficient": element_to_json(c),
                }
                for e, f, c in prepared
            ],
        },
    }
    return register_map(
        1,
        (dom,),
        codomain_shape,
        "polynomial",
        ev,
        flags=flags,
        degree_bound=degree,
        name=name,
        spec=spec,
    )


def composite_map(outer: MapDescriptor, inner: MapDescriptor, name: str = "") -> MapDescriptor:
    """``outer . inner``; propagates flags and the commutative-factor order.

    When the inner map is positive linear with commutative range, the
    composite factors through a commutative algebra by construction and
    its ``dm_order`` is the positivity order of the outer factor.
    """
    if outer.arity != 1:
        raise ValueError("outer factor must be unary")
    if inner.codomain_shape != outer.domain_shapes[0]:
        raise ValueError("inner codomain must match the outer domain")

    def ev(*args: Element) -> Element:
        return outer.evaluator(inner.evaluator(*args))

    if outer.linearity == "linear":
        linearity = inner.linearity
    elif inner.linearity == "linear" and outer.linearity in (
        "polynomial",
        "mixed_homogeneous",
    ):
        linearity = "polynomial"
    else:
        linearity = "opaque"
    flags = []
    if "tracial" in inner.flags:
        flags.append("tracial")
    if "unital" in inner.flags and "unital" in outer.flags:
        flags.append("unital")
    if ("positive" in inner.flags or "completely_positive" in inner.flags) and (
        "positive" in outer.flags or "completely_positive" in outer.flags
    ):
        flags.append("positive")
    if "completely_positive" in inner.flags and "completely_positive" in outer.flags:
        flags.append("completely_positive")
    dm = 0.0
    if (
        inner.linearity == "linear"
        and inner.codomain_shape.is_commutative()
        and ("positive" in inner.flags or "completely_positive" in inner.flags)
    ):
        if "completely_positive" in outer.flags:
            dm = math.inf
        else:
            dm = float(max(outer.n_positive, outer.dm_order))
    spec = None
    if outer.spec is not None and inner.spec is not None:
        spec = {"kind": "composite", "params": {"outer": outer.spec, "inner": inner.spec}}
    return register_map(
        inner.arity,
        inner.domain_shapes,
        outer.codomain_shape,
        linearity,
        ev,
        flags=flags,
        degree_bound=outer.degree_bound if outer.linearity != "linear" else inner.degree_bound,
        dm_order=dm,
        name=name or f"{outer.name}.{inner.name}",
        spec=spec,
    )


# ---------------------------------------------------------------------------
# Random families
# ---------------------------------------------------------------------------


def random_kraus_map(
    seed: int, d_in: int, d_out: int | None = None, count: int = 3, unital: bool = False
) -> MapDescriptor:
    rng = np.random.default_rng(seed)
    d_out = d_in if d_out is None else d_out
    ops = [ginibre_matrix(rng, max(d_in, d_out))[:d_out, :d_in] for _ in range(count)]
    # keep magnitudes tame so Gram sums stay well conditioned
    ops = [op / math.sqrt(count * d_in) for op in ops]
    return kraus_map(ops, unital_normalize=unital, name=f"kraus[seed={seed}]")


def _random_psd_coeff(rng: np.random.Generator, shape: AlgebraShape) -> Element:
    blocks = []
    for d in shape.block_dims:
        g = ginibre_matrix(rng, d)
        blocks.append((g @ g.conj().T) / d)
    return Element(shape, blocks)


def random_tracial_linear(
    seed: int,
    shape: AlgebraShape,
    codomain_shape: AlgebraShape,
    unital: bool = False,
) -> MapDescriptor:
    """``(+) M_i -> sum_i tr(M_i) P_i`` with PSD coefficients P_i."""
    rng = np.random.default_rng(seed)
    coeffs = [_random_psd_coeff(rng, codomain_shape) for _ in shape.block_dims]
    if unital:
        total = zero(codomain_shape)
        for d, p in zip(shape.block_dims, coeffs):
            total = add(total, scale(float(d), p))
        w = _inv_sqrt_element(total)
        coeffs = [multiply(multiply(w, p), w) for p in coeffs]

    def ev(a: Element) -> Element:
        out = zero(codomain_shape)
        for b, p in zip(a.blocks, coeffs):
            out = add(out, scale(complex(np.trace(b)), p))
        return out

    flags = ["tracial", "positive", "completely_positive"]
    if unital:
        flags.append("unital")
    spec = {
        "kind": "tracial_linear",
        "params": {
            "shape": list(shape.block_dims),
            "codomain": list(codomain_shape.block_dims),
            "coefficients": [element_to_json(p) for p in coeffs],
        },
    }
    return register_map(
        1,
        (shape,),
        codomain_shape,
        "linear",
        ev,
        flags=flags,
        name=f"tracial_linear[seed={seed}]",
        spec=spec,
    )


def _tracial_linear_from_coeffs(
    shape: AlgebraShape, codomain_shape: AlgebraShape, coeffs: list[Element]
) -> MapDescriptor:
    def ev(a: Element) -> Element:
        out = zero(codomain_shape)
        for b, p in zip(a.blocks, coeffs):
            out = add(out, scale(complex(np.trace(b)), p))
        return out

    unital = True
    total = zero(codomain_shape)
    for d, p in zip(shape.block_dims, coeffs):
        total = add(total, scale(float(d), p))
    unital = norm(subtract(total, identity(codomain_shape))) <= 1e-9
    flags = ["tracial", "positive", "completely_positive"] + (
        ["unital"] if unital else []
    )
    spec = {
        "kind": "tracial_linear",
        "params": {
            "shape": list(shape.block_dims),
            "codomain": list(codomain_shape.block_dims),
            "coefficients": [element_to_json(p) for p in coeffs],
        },
    }
    return register_map(
        1, (shape,), codomain_shape, "linear", ev, flags=flags,
        name="tracial_linear", spec=spec,
    )


def random_tracial_multilinear(
    seed: int,
    domain_shapes: Sequence[AlgebraShape],
    codomain_shape: AlgebraShape,
    terms: int = 3,
    unital: bool = False,
) -> MapDescriptor:
    """Sum of products of per-slot block traces with PSD coefficients.

    Factors through the slot-wise center traces by construction, hence
    carries ``dm_order = inf``.
    """
    rng = np.random.default_rng(seed)
    domain_shapes = tuple(domain_shapes)
    chosen = [
        tuple(int(rng.integers(s.num_blocks)) for s in domain_shapes)
        for _ in range(terms)
    ]
    coeffs = [_random_psd_coeff(rng, codomain_shape) for _ in range(terms)]
    if unital:
        total = zero(codomain_shape)
        for blocks_idx, p in zip(chosen, coeffs):
            w = 1.0
            for s, b in zip(domain_shapes, blocks_idx):
                w *= s.block_dims[b]
            total = add(total, scale(w, p))
        w_elt = _inv_sqrt_element(total)
        coeffs = [multiply(multiply(w_elt, p), w_elt) for p in coeffs]
    return _tracial_multilinear_from_terms(
        domain_shapes, codomain_shape, list(zip(chosen, coeffs)),
        name=f"tracial_multilinear[seed={seed}]",
    )


def _tracial_multilinear_from_terms(
    domain_shapes: tuple[AlgebraShape, ...],
    codomain_shape: AlgebraShape,
    term_list: list[tuple[tuple[int, ...], Element]],
    name: str = "tracial_multilinear",
) -> MapDescriptor:
    def ev(*args: Element) -> Element:
        out = zero(codomain_shape)
        for blocks_idx, p in term_list:
            val = 1.0 + 0.0j
            for a, b in zip(args, blocks_idx):
                val *= np.trace(a.blocks[b])
            out = add(out, scale(val, p))
        return out

    unital_dev = norm(
        subtract(
            ev(*(identity(s) for s in domain_shapes)), identity(codomain_shape)
        )
    )
    flags = ["tracial", "positive", "completely_positive"] + (
        ["unital"] if unital_dev <= 1e-9 else []
    )
    spec = {
        "kind": "tracial_multilinear",
        "params": {
            "domains": [list(s.block_dims) for s in domain_shapes],
            "codomain": list(codomain_shape.block_dims),
            "terms": [
                {"blocks": list(bi), "coefficient": element_to_json(p)}
                for bi, p in term_list
            ],
        },
    }
    return register_map(
        len(domain_shapes),
        domain_shapes,
        codomain_shape,
        "multilinear",
        ev,
        flags=flags,
        dm_order=math.inf,
        name=name,
        spec=spec,
    )


def random_cp_multilinear(
    seed: int,
    domain_shapes: Sequence[AlgebraShape],
    codomain_dim: int | None = None,
    unital: bool = True,
) -> MapDescriptor:
    """``(A_1, ..., A_k) -> V* (A_1 (x) ... (x) A_k) V`` with V an isometry."""
    rng = np.random.default_rng(seed)
    domain_shapes = tuple(domain_shapes)
    total = 1
    for s in domain_shapes:
        total *= sum(s.block_dims)
    c = codomain_dim if codomain_dim is not None else min(2, total)
    if c > total:
        raise ValueError("codomain dimension cannot exceed the tensor dimension")
    g = ginibre_matrix(rng, total)[:, :c]
    if unital:
        v, _ = np.linalg.qr(g)
        v = v[:, :c]
    else:
        v = g / math.sqrt(total)
    return _cp_multilinear_from_isometry(domain_shapes, v, name=f"cp_multilinear[seed={seed}]")


def _cp_multilinear_from_isometry(
    domain_shapes: tuple[AlgebraShape, ...], v: np.ndarray, name: str = "cp_multilinear"
) -> MapDescriptor:
    c = v.shape[1]
    cod = AlgebraShape((c,))

    def ev(*args: Element) -> Element:
        out = args[0]
        for a in args[1:]:
            out = tensor(out, a)
        m = direct_sum_matrix(out)
        return Element(cod, [v.conj().T @ m @ v])

    unital = bool(np.linalg.norm(v.conj().T @ v - np.eye(c), 2) <= 1e-10 * (1 + c))
    flags = ["positive", "completely_positive"] + (["unital"] if unital else [])
    spec = {
        "kind": "cp_multilinear",
        "params": {
            "domains": [list(s.block_dims) for s in domain_shapes],
            "isometry": _matrix_to_json(v),
        },
    }
    return register_map(
        len(domain_shapes),
        domain_shapes,
        cod,
        "multilinear",
        ev,
        flags=flags,
        name=name,
        spec=spec,
    )


def _random_exponents(
    rng: np.random.Generator, num_coords: int, degree: int
) -> tuple[tuple[int, ...], tuple[int, ...]]:
    while True:
        e = tuple(int(rng.integers(0, degree + 1)) for _ in range(num_coords))
        f = tuple(int(rng.integers(0, degree + 1)) for _ in range(num_coords))
        total = sum(e) + sum(f)
        if 1 <= total <= degree:
            return e, f


def random_center_poly_map(
    seed: int,
    shape: AlgebraShape,
    codomain_shape: AlgebraShape,
    degree: int = 2,
    terms: int = 3,
    unital: bool = False,
) -> MapDescriptor:
    """Nonlinear tracial CP map: polynomial in the center coordinates.

    Built as monomials (with PSD coefficients) of the normalized block
    traces, composed with the center-valued trace; fixes zero and has
    ``dm_order = inf`` by construction.
    """
    rng = np.random.default_rng(seed)
    inner = center_trace_map((shape,))
    p = shape.num_blocks
    term_list = [
        (*_random_exponents(rng, p, degree), _random_psd_coeff(rng, codomain_shape))
        for _ in range(terms)
    ]
    outer = monomial_map(
        p, term_list, codomain_shape, unital_normalize=unital,
        name=f"center_poly[seed={seed}]",
    )
    return composite_map(outer, inner, name=f"center_poly[seed={seed}]")


def random_dinfty_map(
    seed: int,
    shape: AlgebraShape,
    codomain_shape: AlgebraShape,
    inner_dim: int | None = None,
    degree: int = 2,
    terms: int = 3,
    unital: bool = True,
) -> MapDescriptor:
    """Tracial positive linear into scalars, then a CP monomial map.

    The generic factor-through-a-commutative-algebra construction: the
    result is tracial, fixes zero, and carries ``dm_order = inf``.
    """
    rng = np.random.default_rng(seed)
    q = inner_dim if inner_dim is not None else 2
    commutative = AlgebraShape((1,) * q)
    weights = [
        Element(commutative, [np.array([[rng.uniform(0.2, 1.0)]]) for _ in range(q)])
        for _ in shape.block_dims
    ]
    if unital:
        sums = [
            sum(float(d) * w.blocks[i][0, 0].real for d, w in zip(shape.block_dims, weights))
            for i in range(q)
        ]
        weights = [
            Element(
                commutative,
                [w.blocks[i] / sums[i] for i in range(q)],
            )
            for w in weights
        ]
    inner = _tracial_linear_from_coeffs(shape, commutative, weights)
    term_list = [
        (*_random_exponents(rng, q, degree), _random_psd_coeff(rng, codomain_shape))
        for _ in range(terms)
    ]
    outer = monomial_map(
        q, term_list, codomain_shape, unital_normalize=unital,
        name=f"dinfty_outer[seed={seed}]",
    )
    return composite_map(outer, inner, name=f"dinfty[seed={seed}]")


def random_hermitian_preserving_linear(
    seed: int, d: int, count: int = 3
) -> MapDescriptor:
    """Signed Kraus combination: Hermiticity-preserving, not always CP."""
    rng = np.random.default_rng(seed)
    ops = [ginibre_matrix(rng, d) / math.sqrt(count * d) for _ in range(count)]
    signs = [1.0 if rng.uniform() < 0.7 else -1.0 for _ in range(count)]
    dom = AlgebraShape((d,))

    def ev(a: Element) -> Element:
        m = a.blocks[0]
        return Element(dom, [sum(s * (v @ m @ v.conj().T) for s, v in zip(signs, ops))])

    return register_map(
        1, (dom,), dom, "linear", ev, name=f"signed_kraus[seed={seed}]"
    )


# ---------------------------------------------------------------------------
# Spec JSON codec
# ---------------------------------------------------------------------------


def map_to_spec(md: MapDescriptor) -> dict:
    if md.spec is None:
        raise ValueError(f"map {md.name!r} carries no serializable spec")
    return md.spec


def map_from_spec(obj: dict) -> MapDescriptor:
    """Instantiate a map from its JSON spec."""
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ValueError("map spec needs a 'kind' field")
    kind = obj["kind"]
    params = obj.get("params", {})
    if kind == "kraus":
        ops = [_matrix_from_json(rows) for rows in params["operators"]]
        return kraus_map(ops)
    if kind == "transpose":
        return transpose_map(int(params["d"]))
    if kind == "state":
        return state_functional(element_from_json(params["rho"]))
    if kind == "vector_states":
        vecs = [_matrix_from_json(rows).reshape(-1) for rows in params["vectors"]]
        return vector_states_map(vecs, int(params["domain_dim"]))
    if kind == "tensor":
        return tensor_map([int(d) for d in params["dims"]])
    if kind == "product":
        return product_map(AlgebraShape(params["shape"]), int(params["k"]))
    if kind == "trace_multimap":
        return trace_multimap(
            AlgebraShape(params["shape"]), int(params["k"]),
            normalized=bool(params.get("normalized", False)),
        )
    if kind == "projection":
        return projection_multimap(AlgebraShape(params["shape"]), int(params["k"]))
    if kind == "schur":
        return schur_multimap(AlgebraShape(params["shape"]), int(params["k"]))
    if kind == "hadamard_power":
        return hadamard_power_multimap(int(params["m"]), params["alphas"])
    if kind == "conjugate_power":
        return conjugate_power_multimap(int(params["m"]), params["alphas"])
    if kind == "transpose_tensor":
        return transpose_tensor_map()
    if kind == "tracial_linear":
        coeffs = [element_from_json(p) for p in params["coefficients"]]
        return _tracial_linear_from_coeffs(
            AlgebraShape(params["shape"]), AlgebraShape(params["codomain"]), coeffs
        )
    if kind == "tracial_multilinear":
        domains = tuple(AlgebraShape(d) for d in params["domains"])
        terms = [
            (tuple(t["blocks"]), element_from_json(t["coefficient"]))
            for t in params["terms"]
        ]
        return _tracial_multilinear_from_terms(
            domains, AlgebraShape(params["codomain"]), terms
        )
    if kind == "cp_multilinear":
        domains = tuple(AlgebraShape(d) for d in params["domains"])
        v = _matrix_from_json(params["isometry"])
        return _cp_multilinear_from_isometry(domains, v)
    if kind == "monomial":
        terms = [
            (
                t["powers"],
                t["conj_powers"],
                element_from_json(t["coefficient"]),
            )
            for t in params["terms"]
        ]
        return monomial_map(
            int(params["coords"]), terms, AlgebraShape(params["codomain"])
        )
    if kind == "center_trace":
        return center_trace_map([AlgebraShape(d) for d in params["domains"]])
    if kind == "center_restriction":
        return center_restriction_map(map_from_spec(params["of"]))
    if kind == "component_sum":
        from .decomposition import component_sum_from_spec

        return component_sum_from_spec(params)
    if kind == "composite":
        return composite_map(
            map_from_spec(params["outer"]), map_from_spec(params["inner"])
        )
    raise ValueError(f"unknown map spec kind {kind!r}")
