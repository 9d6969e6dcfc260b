"""Variance, covariance and uncertainty-relation checkers.

For a map between block algebras and elements A, B of its domain,

    Cov(A, B) = map(A* B) - map(A*) map(B),     Var(A) = Cov(A, A).

Multi-slot maps are treated as maps on the direct sum of their slots, so
A and B are tuples and products act componentwise.  Each theorem-shaped
inequality is computed literally and reported as a signed margin (the
smallest eigenvalue of the asserted-PSD matrix, or the coordinatewise
worst LHS - RHS for scalar inequalities); nothing is clipped.

The matrix inequalities here condition on structural hypotheses (a
positivity order, or a factorization through a commutative algebra).
Those hypotheses are carried by map metadata set at construction time;
checkers refuse to run when the metadata is absent rather than guessing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .algebra import (
    AlgebraShape,
    DEFAULT_TOL,
    Element,
    ToleranceConfig,
    add,
    adjoint,
    anticommutator,
    block_matrix,
    commutator,
    element_to_json,
    hermitian_deviation,
    identity,
    is_positive,
    min_eig_hermitian_part,
    multiply,
    norm,
    scale,
    smallest_disk_center,
    smallest_disk_radius,
    subtract,
    zero,
)
from .maps import MapDescriptor, claims_n_positive, evaluate

__all__ = [
    "DensityOperator",
    "InequalityReport",
    "Observable",
    "SpectralFunctionPair",
    "composite_matrix",
    "covariance",
    "density_modified_map",
    "heisenberg_suite",
    "partial_covariance",
    "partial_variance",
    "pvc_matrix",
    "schrodinger_margin",
    "skew_correlation",
    "skew_information",
    "skew_matrix",
    "slot_compress",
    "slot_pair",
    "spectral_apply",
    "tensor_uncertainty_bound",
    "variance",
    "variance_upper_bound",
    "vc_matrix",
]

Bold = tuple[Element, ...]


@dataclass(frozen=True)
class Observable:
    """A self-adjoint element (verified within tolerance)."""

    element: Element

    def __post_init__(self):
        dev = hermitian_deviation(self.element)
        if dev > DEFAULT_TOL.herm_tol * (1.0 + norm(self.element)):
            raise ValueError(f"observable is not self-adjoint (deviation {dev:.3e})")


@dataclass(frozen=True)
class DensityOperator:
    """A PSD element with a declared normalization.

    ``trace_one`` requires unit total trace; ``map_unital`` couples the
    state to a map and requires ``map(P) = I`` (checked against
    ``bound_map``).
    """

    element: Element
    normalization: str = "trace_one"
    bound_map: MapDescriptor | None = None

    def __post_init__(self):
        ok, min_eig = is_positive(self.element)
        if not ok:
            raise ValueError(f"density operator is not PSD (min eig {min_eig:.3e})")
        if self.normalization == "trace_one":
            total = sum(float(np.trace(b).real) for b in self.element.blocks)
            if abs(total - 1.0) > 1e-9:
                raise ValueError(f"trace is {total:.6f}, expected 1")
        elif self.normalization == "map_unital":
            if self.bound_map is None:
                raise ValueError("map_unital normalization needs bound_map")
            out = evaluate(self.bound_map, (self.element,))
            dev = norm(subtract(out, identity(self.bound_map.codomain_shape)))
            if dev > 1e-8 * (1.0 + norm(out)):
                raise ValueError(f"map(P) differs from I by {dev:.3e}")
        else:
            raise ValueError(f"unknown normalization {self.normalization!r}")


@dataclass(frozen=True)
class SpectralFunctionPair:
    """Two real functions applied by spectral calculus.

    ``verify_same_monotonic`` checks the defining product inequality on
    every pair of supplied spectrum points.
    """

    f: Callable[[float], float]
    g: Callable[[float], float]

    def verify_same_monotonic(self, points: Sequence[float], tol: float = 1e-12):
        pts = list(points)
        for x in pts:
            for y in pts:
                val = (self.f(x) - self.f(y)) * (self.g(x) - self.g(y))
                if val < -tol:
                    raise ValueError(
                        f"functions are not of same monotonic type on the "
                        f"spectrum: ({x:.4g}, {y:.4g}) gives {val:.3e}"
                    )


@dataclass(frozen=True)
class InequalityReport:
    quantity: str
    margin: float
    verdict: str  # "holds" | "violated"
    witness: dict | None = None
    seed: int | None = None
    details: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "quantity": self.quantity,
            "margin": self.margin,
            "verdict": self.verdict,
            "witness": self.witness,
            "seed": self.seed,
            "details": self.details,
        }


def _report(
    quantity: str,
    margin: float,
    tol: float,
    witness_args: Sequence[Element] | None = None,
    seed: int | None = None,
    details: dict | None = None,
) -> InequalityReport:
    verdict = "holds" if margin >= -tol else "violated"
    witness = None
    if verdict == "violated" and witness_args is not None:
        witness = {"args": [element_to_json(a) for a in witness_args]}
    return InequalityReport(
        quantity=quantity,
        margin=float(margin),
        verdict=verdict,
        witness=witness,
        seed=seed,
        details=details or {},
    )


# ---------------------------------------------------------------------------
# Bold-tuple helpers
# ---------------------------------------------------------------------------


def _as_bold(md: MapDescriptor, x) -> Bold:
    bold = (x,) if isinstance(x, Element) else tuple(x)
    if len(bold) != md.arity:
        raise ValueError(f"expected {md.arity} components, got {len(bold)}")
    for a, s in zip(bold, md.domain_shapes):
        if a.shape != s:
            raise ValueError("component shape does not match the map domain")
    return bold


def _bold_mul(a: Bold, b: Bold) -> Bold:
    return tuple(multiply(x, y) for x, y in zip(a, b))


def _bold_adj(a: Bold) -> Bold:
    return tuple(adjoint(x) for x in a)


def _bold_scale(z: complex, a: Bold) -> Bold:
    return tuple(scale(z, x) for x in a)


def _bold_sub(a: Bold, b: Bold) -> Bold:
    return tuple(subtract(x, y) for x, y in zip(a, b))


def unit_padded(md: MapDescriptor, slot: int, x: Element) -> Bold:
    """The tuple with ``x`` in the given (1-based) slot and units elsewhere."""
    if not (1 <= slot <= md.arity):
        raise ValueError(f"slot {slot} out of range 1..{md.arity}")
    if x.shape != md.domain_shapes[slot - 1]:
        raise ValueError("element shape does not match the slot algebra")
    return tuple(
        x if i == slot - 1 else identity(s)
        for i, s in enumerate(md.domain_shapes)
    )


# ---------------------------------------------------------------------------
# Covariance and the basic matrices
# ---------------------------------------------------------------------------


def covariance(md: MapDescriptor, a, b) -> Element:
    """``map(A* B) - map(A*) map(B)`` on (tuples of) elements."""
    ba, bb = _as_bold(md, a), _as_bold(md, b)
    return subtract(
        evaluate(md, _bold_mul(_bold_adj(ba), bb)),
        multiply(evaluate(md, _bold_adj(ba)), evaluate(md, bb)),
    )


def variance(md: MapDescriptor, a) -> Element:
    return covariance(md, a, a)


def vc_matrix(
    md: MapDescriptor, a, b, tol: ToleranceConfig = DEFAULT_TOL
) -> tuple[Element, InequalityReport]:
    """The 2x2 variance-covariance block matrix with its PSD margin.

    Positivity is a theorem for unital maps of entrywise order 3, so both
    the unital flag and a 3-positivity claim are required.
    """
    if not md.is_unital():
        raise ValueError("variance-covariance matrix requires a unital map")
    if not claims_n_positive(md, 3):
        raise ValueError("variance-covariance matrix requires a 3-positivity claim")
    ba, bb = _as_bold(md, a), _as_bold(md, b)
    mat = block_matrix(
        [
            [variance(md, ba), covariance(md, ba, bb)],
            [covariance(md, bb, ba), variance(md, bb)],
        ]
    )
    _, min_eig = is_positive(mat, tol)
    rep = _report(
        "vc_matrix",
        min_eig,
        tol.psd_tol * (1.0 + norm(mat)),
        witness_args=list(ba) + list(bb),
    )
    return mat, rep


def _coords(x: Element) -> np.ndarray:
    if not x.shape.is_commutative():
        raise ValueError("expected an element of a commutative algebra")
    return np.array([b[0, 0] for b in x.blocks])


def schrodinger_margin(
    md: MapDescriptor, a, b, tol: float = 1e-12
) -> InequalityReport:
    """Coordinatewise margin of the commutative-range uncertainty relation

    ``Var(A) Var(B) >= |Re Cov(A, B)|^2 + (1/4) |map([A, B])|^2``

    for a unital linear map with all-scalar-blocks codomain and
    self-adjoint inputs.
    """
    if md.linearity != "linear":
        raise ValueError("the scalar uncertainty relation needs a linear map")
    if not md.codomain_shape.is_commutative():
        raise ValueError("the scalar uncertainty relation needs a commutative range")
    if not md.is_unital():
        raise ValueError("the scalar uncertainty relation needs a unital map")
    ba, bb = _as_bold(md, a), _as_bold(md, b)
    for x in ba + bb:
        Observable(x)
    var_a = np.real(_coords(variance(md, ba)))
    var_b = np.real(_coords(variance(md, bb)))
    cov_ab = _coords(covariance(md, ba, bb))
    comm = _coords(
        evaluate(md, tuple(commutator(x, y) for x, y in zip(ba, bb)))
    )
    margins = var_a * var_b - np.real(cov_ab) ** 2 - 0.25 * np.abs(comm) ** 2
    return _report(
        "schrodinger",
        float(margins.min()),
        tol,
        witness_args=list(ba) + list(bb),
        details={"per_coordinate": [float(m) for m in margins]},
    )


# ---------------------------------------------------------------------------
# The D_m suite
# ---------------------------------------------------------------------------


def _check_zero_fixed(md: MapDescriptor):
    z = evaluate(md, md.zero_args())
    if norm(z) > 1e-10:
        raise ValueError("this inequality requires map(0) = 0")


def _half_commutator_value(md: MapDescriptor, a: Bold, b: Bold) -> Element:
    return evaluate(
        md, tuple(scale(0.5, commutator(x, y)) for x, y in zip(a, b))
    )


def heisenberg_suite(
    md: MapDescriptor, a, b, tol: ToleranceConfig = DEFAULT_TOL
) -> list[InequalityReport]:
    """The four uncertainty inequalities for a map factoring through a
    commutative algebra (order >= 3; the anticommutator matrix needs 4).

    Reports: the variance-covariance matrix; the commutator matrix; the
    two norm-weighted operator inequalities (both modulus-square
    conventions are computed, the theorem-backed one is the margin); and,
    at order >= 4, the anticommutator matrix.  A commutative codomain adds
    the scalar product inequality.
    """
    if md.dm_order < 3:
        raise ValueError(
            "the uncertainty suite needs a commutative factorization of "
            "order >= 3 (construct the map as a composition)"
        )
    _check_zero_fixed(md)
    ba, bb = _as_bold(md, a), _as_bold(md, b)
    for x in ba + bb:
        Observable(x)
    reports: list[InequalityReport] = []
    floor = lambda m: tol.psd_tol * (1.0 + norm(m))  # noqa: E731

    mat_vc, rep_vc = vc_matrix(md, ba, bb, tol)
    reports.append(
        InequalityReport(
            "heisenberg[vc]", rep_vc.margin, rep_vc.verdict, rep_vc.witness
        )
    )

    var_a, var_b = variance(md, ba), variance(md, bb)
    t_ab = _half_commutator_value(md, ba, bb)
    t_ba = _half_commutator_value(md, bb, ba)
    mat_comm = block_matrix([[var_a, t_ab], [t_ba, var_b]])
    _, min_eig = is_positive(mat_comm, tol)
    reports.append(
        _report(
            "heisenberg[commutator]", min_eig, floor(mat_comm),
            witness_args=list(ba) + list(bb),
        )
    )

    tsq = multiply(adjoint(t_ab), t_ab)  # T* T
    tqs = multiply(t_ab, adjoint(t_ab))  # T T*
    lhs_a = subtract(scale(norm(var_a), var_b), tsq)
    lhs_b = subtract(scale(norm(var_b), var_a), tqs)
    alt_a = min_eig_hermitian_part(subtract(scale(norm(var_a), var_b), tqs))
    alt_b = min_eig_hermitian_part(subtract(scale(norm(var_b), var_a), tsq))
    _, margin_a = is_positive(lhs_a, tol)
    _, margin_b = is_positive(lhs_b, tol)
    details = {
        "norm_var_a": norm(var_a),
        "norm_var_b": norm(var_b),
        "swapped_convention_margins": [alt_a, alt_b],
    }
    if md.codomain_shape.is_commutative():
        scalar = np.real(_coords(var_a)) * np.real(_coords(var_b)) - np.abs(
            _coords(t_ab)
        ) ** 2
        details["scalar_product_margin"] = float(scalar.min())
    reports.append(
        _report(
            "heisenberg[norm_product]",
            min(margin_a, margin_b),
            max(floor(lhs_a), floor(lhs_b)),
            witness_args=list(ba) + list(bb),
            details=details,
        )
    )

    if md.dm_order >= 4:
        half_anti = evaluate(
            md, tuple(scale(0.5, anticommutator(x, y)) for x, y in zip(ba, bb))
        )
        phi_a, phi_b = evaluate(md, ba), evaluate(md, bb)
        off_1 = subtract(half_anti, multiply(phi_a, phi_b))
        off_2 = subtract(half_anti, multiply(phi_b, phi_a))
        mat_anti = block_matrix([[var_a, off_1], [off_2, var_b]])
        _, min_eig = is_positive(mat_anti, tol)
        reports.append(
            _report(
                "heisenberg[anticommutator]", min_eig, floor(mat_anti),
                witness_args=list(ba) + list(bb),
            )
        )
    return reports


# ---------------------------------------------------------------------------
# Slot compressions and partial covariance
# ---------------------------------------------------------------------------


def slot_compress(md: MapDescriptor, slot: int) -> MapDescriptor:
    """The unary map obtained by fixing every other slot at its unit."""
    if not (1 <= slot <= md.arity):
        raise ValueError(f"slot {slot} out of range 1..{md.arity}")
    dom = md.domain_shapes[slot - 1]

    def ev(x: Element) -> Element:
        return md.evaluator(*unit_padded(md, slot, x))

    flags = [f for f in ("unital", "positive", "completely_positive") if f in md.flags]
    return MapDescriptor(
        arity=1,
        domain_shapes=(dom,),
        codomain_shape=md.codomain_shape,
        linearity="linear" if md.linearity in ("linear", "multilinear") else md.linearity,
        evaluator=ev,
        flags=frozenset(flags),
        n_positive=md.n_positive,
        name=f"{md.name}({slot})",
    )


def _pair_value(md: MapDescriptor, i: int, j: int, x: Element, y: Element) -> Element:
    # map at the componentwise product of the two unit-padded tuples;
    # also meaningful for i = j, where the product lands in one slot
    return evaluate(md, _bold_mul(unit_padded(md, i, x), unit_padded(md, j, y)))


def slot_pair(md: MapDescriptor, i: int, j: int) -> MapDescriptor:
    """The two-slot compression ``(x, y) -> map(pad_i(x) pad_j(y))``."""
    if i == j:
        raise ValueError("slot_pair needs two distinct slots")
    if not (1 <= i <= md.arity and 1 <= j <= md.arity):
        raise ValueError("slot index out of range")
    doms = (md.domain_shapes[i - 1], md.domain_shapes[j - 1])

    def ev(x: Element, y: Element) -> Element:
        return _pair_value(md, i, j, x, y)

    flags = [f for f in ("unital", "positive", "completely_positive") if f in md.flags]
    return MapDescriptor(
        arity=2,
        domain_shapes=doms,
        codomain_shape=md.codomain_shape,
        linearity="multilinear" if md.linearity in ("linear", "multilinear") else md.linearity,
        evaluator=ev,
        flags=frozenset(flags),
        n_positive=md.n_positive,
        name=f"{md.name}({i},{j})",
    )


def partial_covariance(md: MapDescriptor, a, b) -> Element:
    """The k-by-k block matrix of slot-compressed covariances."""
    if not md.is_unital():
        raise ValueError("partial covariance is defined for unital maps")
    ba, bb = _as_bold(md, a), _as_bold(md, b)
    k = md.arity
    entries = []
    for i in range(1, k + 1):
        row = []
        for j in range(1, k + 1):
            first = _pair_value(md, i, j, adjoint(ba[i - 1]), bb[j - 1])
            second = multiply(
                evaluate(md, unit_padded(md, i, adjoint(ba[i - 1]))),
                evaluate(md, unit_padded(md, j, bb[j - 1])),
            )
            row.append(subtract(first, second))
        entries.append(row)
    return block_matrix(entries)


def partial_variance(md: MapDescriptor, a) -> Element:
    return partial_covariance(md, a, a)


def pvc_matrix(
    md: MapDescriptor,
    a,
    b=None,
    tol: ToleranceConfig = DEFAULT_TOL,
) -> tuple[Element, InequalityReport]:
    """Partial variance-covariance matrix with its PSD margin.

    With both tuples this is the 2k-by-2k matrix and requires an
    entrywise positivity order of 2k + 1; with ``b`` omitted only the
    partial variance is checked, requiring order k + 1.
    """
    k = md.arity
    ba = _as_bold(md, a)
    if b is None:
        if not claims_n_positive(md, k + 1):
            raise ValueError(
                f"partial variance needs a {k + 1}-positivity claim"
            )
        mat = partial_variance(md, ba)
        _, min_eig = is_positive(mat, tol)
        rep = _report(
            "partial_variance", min_eig, tol.psd_tol * (1.0 + norm(mat)),
            witness_args=list(ba),
        )
        return mat, rep
    bb = _as_bold(md, b)
    if not claims_n_positive(md, 2 * k + 1):
        raise ValueError(
            f"the partial variance-covariance matrix needs a "
            f"{2 * k + 1}-positivity claim"
        )
    k_entries: list[list[Element]] = [[None] * (2 * k) for _ in range(2 * k)]

    def quadrant(x: Bold, y: Bold) -> list[list[Element]]:
        rows = []
        for i in range(1, k + 1):
            row = []
            for j in range(1, k + 1):
                first = _pair_value(md, i, j, adjoint(x[i - 1]), y[j - 1])
                second = multiply(
                    evaluate(md, unit_padded(md, i, adjoint(x[i - 1]))),
                    evaluate(md, unit_padded(md, j, y[j - 1])),
                )
                row.append(subtract(first, second))
            rows.append(row)
        return rows

    q_aa, q_ab = quadrant(ba, ba), quadrant(ba, bb)
    q_ba, q_bb = quadrant(bb, ba), quadrant(bb, bb)
    for i in range(k):
        for j in range(k):
            k_entries[i][j] = q_aa[i][j]
            k_entries[i][k + j] = q_ab[i][j]
            k_entries[k + i][j] = q_ba[i][j]
            k_entries[k + i][k + j] = q_bb[i][j]
    mat = block_matrix(k_entries)
    _, min_eig = is_positive(mat, tol)
    rep = _report(
        "pvc_matrix", min_eig, tol.psd_tol * (1.0 + norm(mat)),
        witness_args=list(ba) + list(bb),
    )
    return mat, rep


# ---------------------------------------------------------------------------
# Composite-system matrices
# ---------------------------------------------------------------------------


def composite_matrix(
    md: MapDescriptor,
    i: int,
    j: int,
    a: Element,
    b: Element,
    c: Element,
    d: Element,
    tol: ToleranceConfig = DEFAULT_TOL,
) -> tuple[Element, InequalityReport]:
    """The 4x4 matrix coupling two slots of a composite system.

    ``a, c`` pad into slot i and ``b, d`` into slot j (i != j); diagonal
    entries are variances of the padded tuples, off-diagonal entries are
    the map at half commutators (evaluated at the unit-padded commutator
    for multilinear maps, at the componentwise-product difference
    otherwise).  Requires a completely positive commutative factorization
    (``dm_order = inf``) and a unital map.
    """
    if i == j:
        raise ValueError("composite matrix needs two distinct slots")
    if md.dm_order != math.inf:
        raise ValueError(
            "composite matrix requires a completely positive commutative "
            "factorization (dm_order = inf)"
        )
    if not md.is_unital():
        raise ValueError("composite matrix requires a unital map")
    _check_zero_fixed(md)
    for x in (a, c):
        Observable(x)
        if x.shape != md.domain_shapes[i - 1]:
            raise ValueError("slot-i observables must live on that slot's algebra")
    for x in (b, d):
        Observable(x)
        if x.shape != md.domain_shapes[j - 1]:
            raise ValueError("slot-j observables must live on that slot's algebra")

    bold_a = unit_padded(md, i, a)
    bold_b = unit_padded(md, j, b)
    bold_c = unit_padded(md, i, c)
    bold_d = unit_padded(md, j, d)

    def half_comm_at(slot: int, x: Element, y: Element) -> Element:
        # multilinear maps take the unit-padded commutator; general maps
        # take the componentwise product difference (zero off the slot)
        if md.linearity == "multilinear":
            return scale(
                0.5, evaluate(md, unit_padded(md, slot, commutator(x, y)))
            )
        bx, by = unit_padded(md, slot, x), unit_padded(md, slot, y)
        return evaluate(
            md, _bold_scale(0.5, _bold_sub(_bold_mul(bx, by), _bold_mul(by, bx)))
        )

    var_a, var_b = variance(md, bold_a), variance(md, bold_b)
    var_c, var_d = variance(md, bold_c), variance(md, bold_d)
    z = zero(md.codomain_shape)
    off_ac = half_comm_at(i, a, c)
    off_ca = half_comm_at(i, c, a)
    off_bd = half_comm_at(j, b, d)
    off_db = half_comm_at(j, d, b)
    mat = block_matrix(
        [
            [var_a, z, off_ac, z],
            [z, var_b, z, off_bd],
            [off_ca, z, var_c, z],
            [z, off_db, z, var_d],
        ]
    )
    _, min_eig = is_positive(mat, tol)
    details = {}
    if md.codomain_shape.is_commutative():
        # quadruple-product inequality on each center coordinate
        prod = (
            np.real(_coords(var_a))
            * np.real(_coords(var_b))
            * np.real(_coords(var_c))
            * np.real(_coords(var_d))
        )
        rhs = (
            np.abs(_coords(scale(2.0, off_ac))) ** 2
            * np.abs(_coords(scale(2.0, off_bd))) ** 2
            / 16.0
        )
        details["quadruple_product_margin"] = float((prod - rhs).min())
    rep = _report(
        "composite_4x4", min_eig, tol.psd_tol * (1.0 + norm(mat)),
        witness_args=[a, b, c, d], details=details,
    )
    return mat, rep


def tensor_uncertainty_bound(
    md: MapDescriptor,
    a: Element,
    b: Element,
    c: Element,
    d: Element,
    alpha: complex | None = None,
    beta: complex | None = None,
    tol: float = 1e-12,
) -> InequalityReport:
    """Uncertainty bound for commuting observables of a two-factor system.

    The map is linear and completely positive with commutative range on
    the tensor-product algebra of the factors carrying ``a, c`` and
    ``b, d``.  The margin is the coordinatewise worst of

        Var(a (x) I) Var(I (x) b)
          - (1/16) |map([a,c] (x) I) map(I (x) [b,d])|^2
            / (norm(c - alpha I) norm(d - beta I))^2.

    Omitted shift parameters default to the spectral disk centers (the
    minimizers of the denominators).  Positive-contraction inputs also get
    the shift-free product bound in the details.
    """
    if md.arity != 1 or md.linearity != "linear":
        raise ValueError("tensor bound needs a unary linear map")
    if "completely_positive" not in md.flags:
        raise ValueError("tensor bound needs a completely positive map")
    if not md.codomain_shape.is_commutative():
        raise ValueError("tensor bound needs a commutative range")
    if not md.is_unital():
        raise ValueError("tensor bound needs a unital map")
    for x in (a, b, c, d):
        Observable(x)
    da = a.shape.block_dims[0]
    db = b.shape.block_dims[0]
    dom = md.domain_shapes[0]
    if dom.block_dims != (da * db,):
        raise ValueError(
            f"map domain {dom.block_dims} is not the tensor algebra of the "
            f"factors ({da} x {db})"
        )
    if c.shape != a.shape or d.shape != b.shape:
        raise ValueError("shift observables must match their factor algebras")

    alpha = complex(smallest_disk_center(c)) if alpha is None else complex(alpha)
    beta = complex(smallest_disk_center(d)) if beta is None else complex(beta)
    shift_c = subtract(c, scale(alpha, identity(c.shape)))
    shift_d = subtract(d, scale(beta, identity(d.shape)))
    denom_c, denom_d = norm(shift_c), norm(shift_d)
    if denom_c <= 1e-14 or denom_d <= 1e-14:
        raise ValueError("vanishing denominator: shift equals the observable")

    def lift_left(x: Element) -> Element:
        return Element(dom, [np.kron(x.blocks[0], np.eye(db))])

    def lift_right(x: Element) -> Element:
        return Element(dom, [np.kron(np.eye(da), x.blocks[0])])

    var_a = np.real(_coords(variance(md, lift_left(a))))
    var_b = np.real(_coords(variance(md, lift_right(b))))
    f_ac = _coords(evaluate(md, (lift_left(commutator(a, c)),)))
    f_bd = _coords(evaluate(md, (lift_right(commutator(b, d)),)))
    rhs = np.abs(f_ac * f_bd) ** 2 / (16.0 * (denom_c * denom_d) ** 2)
    margins = var_a * var_b - rhs
    details = {
        "alpha": [alpha.real, alpha.imag],
        "beta": [beta.real, beta.imag],
        "denominators": [denom_c, denom_d],
    }
    ok_c, _ = is_positive(c)
    ok_d, _ = is_positive(d)
    if ok_c and ok_d and norm(c) <= 1.0 + 1e-12 and norm(d) <= 1.0 + 1e-12:
        contraction = var_a * var_b - np.abs(f_ac) ** 2 * np.abs(f_bd) ** 2
        details["contraction_margin"] = float(contraction.min())
    return _report(
        "tensor_bound", float(margins.min()), tol,
        witness_args=[a, b, c, d], details=details,
    )


# ---------------------------------------------------------------------------
# Skew information
# ---------------------------------------------------------------------------


def spectral_apply(
    fn: Callable[[float], float], x: Element, clamp_at_zero: bool = True
) -> Element:
    """Apply a real function blockwise by Hermitian eigendecomposition.

    Negative round-off eigenvalues are clamped at zero by default so that
    fractional powers of PSD inputs stay real.
    """
    dev = hermitian_deviation(x)
    if dev > DEFAULT_TOL.herm_tol * (1.0 + norm(x)):
        raise ValueError("spectral calculus needs a self-adjoint element")
    blocks = []
    for b in x.blocks:
        w, u = np.linalg.eigh((b + b.conj().T) / 2.0)
        if clamp_at_zero:
            w = np.maximum(w, 0.0)
        vals = np.array([fn(float(v)) for v in w])
        blocks.append((u * vals) @ u.conj().T)
    return Element(x.shape, blocks)


def _spectrum_points(x: Element) -> list[float]:
    pts: list[float] = []
    for b in x.blocks:
        pts.extend(float(v) for v in np.linalg.eigvalsh((b + b.conj().T) / 2.0))
    return [max(p, 0.0) for p in pts]


def skew_correlation(
    md: MapDescriptor,
    rho: DensityOperator,
    pair: SpectralFunctionPair,
    a: Element,
    b: Element,
) -> Element:
    """``map(f(rho) g(rho) A B) - map(f(rho) A g(rho) B)``."""
    if md.arity != 1:
        raise ValueError("skew correlation is defined for unary maps")
    pair.verify_same_monotonic(_spectrum_points(rho.element))
    f_rho = spectral_apply(pair.f, rho.element)
    g_rho = spectral_apply(pair.g, rho.element)
    first = multiply(multiply(f_rho, g_rho), multiply(a, b))
    second = multiply(multiply(f_rho, a), multiply(g_rho, b))
    return subtract(evaluate(md, (first,)), evaluate(md, (second,)))


def skew_information(
    md: MapDescriptor, rho: DensityOperator, pair: SpectralFunctionPair, a: Element
) -> Element:
    return skew_correlation(md, rho, pair, a, a)


def skew_matrix(
    md: MapDescriptor,
    rho: DensityOperator,
    pair: SpectralFunctionPair,
    a: Element,
    b: Element,
    tol: ToleranceConfig = DEFAULT_TOL,
) -> tuple[Element, InequalityReport]:
    """Skew-information matrix for a tracial map with a CP commutative
    factorization of order >= 4 fixing zero."""
    if not md.is_tracial():
        raise ValueError("the skew matrix requires a tracial map")
    if md.dm_order < 4:
        raise ValueError(
            "the skew matrix requires a commutative factorization of order >= 4"
        )
    _check_zero_fixed(md)
    Observable(a)
    Observable(b)
    pair.verify_same_monotonic(_spectrum_points(rho.element))
    f_rho = spectral_apply(pair.f, rho.element)
    g_rho = spectral_apply(pair.g, rho.element)
    fg = multiply(f_rho, g_rho)
    info_a = skew_information(md, rho, pair, a)
    info_b = skew_information(md, rho, pair, b)
    cross = subtract(
        evaluate(md, (scale(0.5, multiply(fg, anticommutator(a, b))),)),
        evaluate(
            md,
            (
                scale(
                    0.5,
                    add(
                        multiply(multiply(f_rho, a), multiply(g_rho, b)),
                        multiply(multiply(f_rho, b), multiply(g_rho, a)),
                    ),
                ),
            ),
        ),
    )
    mat = block_matrix([[info_a, cross], [cross, info_b]])
    _, min_eig = is_positive(mat, tol)
    rep = _report(
        "skew_matrix", min_eig, tol.psd_tol * (1.0 + norm(mat)),
        witness_args=[rho.element, a, b],
    )
    return mat, rep


# ---------------------------------------------------------------------------
# Variance upper bound and density-modified maps
# ---------------------------------------------------------------------------


def variance_upper_bound(
    md: MapDescriptor, x: Element, slot: int | None = None, tol: float = 1e-10
) -> InequalityReport:
    """``Var(X) <= (min over alpha of norm(X - alpha I))^2`` as a margin.

    For multi-slot maps, ``slot`` selects the unit-padded variant.  The
    shift minimum is the spectral disk radius, valid for normal inputs
    only (verified).
    """
    if not md.is_unital():
        raise ValueError("the variance bound requires a unital map")
    if md.linearity not in ("linear", "multilinear"):
        raise ValueError("the variance bound requires a (multi)linear map")
    if not ({"positive", "completely_positive"} & md.flags) and md.n_positive < 1:
        raise ValueError("the variance bound requires a positive map")
    if md.arity == 1 and slot is None:
        bold = (x,)
    else:
        if slot is None:
            raise ValueError("multi-slot maps need an explicit slot")
        bold = unit_padded(md, slot, x)
    radius = smallest_disk_radius(x)
    var = variance(md, bold)
    bound = scale(radius**2, identity(md.codomain_shape))
    margin = min_eig_hermitian_part(subtract(bound, var))
    return _report(
        "variance_upper_bound", margin, tol, witness_args=[x],
        details={"disk_radius": radius},
    )


def density_modified_map(
    md: MapDescriptor, rho: DensityOperator, convention: str = "symmetric"
) -> MapDescriptor:
    """``X -> map(P^(1/2) X P^(1/2))`` or, for tracial maps, ``X -> map(P X)``.

    With ``map(P) = I`` the modified map is unital and inherits the
    positivity order; when the source is tracial the commutative
    factorization survives as well.
    """
    if md.arity != 1:
        raise ValueError("density modification is defined for unary maps")
    p = rho.element
    if convention == "tracial":
        if not md.is_tracial():
            raise ValueError("the one-sided convention needs a tracial map")

        def ev(x: Element) -> Element:
            return md.evaluator(multiply(p, x))

    elif convention == "symmetric":
        root = spectral_apply(np.sqrt, p)

        def ev(x: Element) -> Element:
            return md.evaluator(multiply(multiply(root, x), root))

    else:
        raise ValueError(f"unknown convention {convention!r}")
    out_unit = ev(identity(md.domain_shapes[0]))
    unital = norm(subtract(out_unit, identity(md.codomain_shape))) <= 1e-8
    flags = [f for f in ("positive", "completely_positive") if f in md.flags]
    if unital:
        flags.append("unital")
    return MapDescriptor(
        arity=1,
        domain_shapes=md.domain_shapes,
        codomain_shape=md.codomain_shape,
        linearity="opaque" if md.linearity != "linear" else "linear",
        evaluator=ev,
        flags=frozenset(flags),
        n_positive=md.n_positive,
        dm_order=md.dm_order if md.is_tracial() else 0.0,
        name=f"{md.name}[density]",
    )
