"""Factoring tracial positive maps through a commutative algebra.

In finite dimensions the compact space carrying the commutative factor is
just the discrete set of center coordinates: every block contributes one
scalar (its normalized trace).  For a tracial positive (multi)linear map
the factorization

    map = (map restricted to block-scalar elements) . (center traces)

holds exactly, because within each block the normalized trace is a finite
average of unitary conjugates and traciality makes the map invariant under
slot-wise unitary conjugation.

Nonlinear tracial completely positive maps factor the same way after
splitting them into mixed-homogeneous components: the part of a map that
scales as ``z^m conj(z)^n`` is isolated by a phase Fourier transform and a
radial interpolation, and each component transports traciality and
positivity on its own.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .algebra import (
    AlgebraShape,
    Element,
    add,
    identity,
    norm,
    scale,
    subtract,
    zero,
)
from .builders import (
    center_lift,
    center_restriction_map,
    center_trace_map,
    map_from_spec,
)
from .maps import MapDescriptor, evaluate
from .sampling import random_element, rng_for_trial

__all__ = [
    "HomogeneousComponentTable",
    "TracialDecomposition",
    "component_sum_from_spec",
    "decompose_tracial",
    "decompose_tracial_nonlinear",
    "extract_all_components",
    "extract_homogeneous_components",
    "multilinear_lift",
    "tracial_linear_canonical_form",
]

CONDITION_LIMIT = 1e8


@dataclass(frozen=True)
class TracialDecomposition:
    """A certified factorization through the center coordinates.

    ``phi1`` maps into an all-scalar-blocks algebra, ``phi2`` maps the
    scalar coordinates onward, and ``factored`` is their composition as a
    single descriptor (carrying ``dm_order = inf`` by construction).
    ``residual`` is the largest deviation from the original map over the
    fresh verification samples; the decomposition is ``certified`` when it
    stays below the requested tolerance.
    """

    phi1: MapDescriptor
    phi2: MapDescriptor
    factored: MapDescriptor
    residual: float
    samples: int
    seed: int
    certified: bool
    witness: tuple[dict, ...] | None = None
    condition_number: float = 1.0

    def to_json(self) -> dict:
        return {
            "phi1": self.phi1.spec,
            "phi2": self.phi2.spec,
            "residual": self.residual,
            "samples": self.samples,
            "seed": self.seed,
            "certified": self.certified,
            "condition_number": self.condition_number,
        }


def _slot_split(coords: Element, domain_shapes: Sequence[AlgebraShape]) -> tuple[Element, ...]:
    # flat center coordinates -> one scalar-blocks element per slot
    out = []
    pos = 0
    for s in domain_shapes:
        p = s.num_blocks
        out.append(
            Element(AlgebraShape((1,) * p), coords.blocks[pos : pos + p])
        )
        pos += p
    return tuple(out)


def decompose_tracial(
    md: MapDescriptor,
    samples: int = 50,
    seed: int = 0xC5A1,
    tol: float = 1e-9,
) -> TracialDecomposition:
    """Factor a tracial positive (multi)linear map through the center.

    ``phi1`` is the slot-wise center-valued trace flattened to scalar
    coordinates; ``phi2`` evaluates the original map on the coordinates
    lifted back to block scalars.  The factorization is certified on
    ``samples`` fresh random inputs.
    """
    if "tracial" not in md.flags:
        raise ValueError("decompose_tracial requires a verified tracial flag")
    if not ({"positive", "completely_positive"} & md.flags):
        raise ValueError("decompose_tracial requires a positivity flag")
    if md.linearity not in ("linear", "multilinear"):
        raise ValueError(
            "decompose_tracial handles (multi)linear maps; use "
            "decompose_tracial_nonlinear for general maps"
        )
    phi1 = center_trace_map(md.domain_shapes)
    phi2 = center_restriction_map(md)

    def factored_ev(*args: Element) -> Element:
        coords = phi1.evaluator(*args)
        return phi2.evaluator(*_slot_split(coords, md.domain_shapes))

    factored = MapDescriptor(
        arity=md.arity,
        domain_shapes=md.domain_shapes,
        codomain_shape=md.codomain_shape,
        linearity=md.linearity,
        evaluator=factored_ev,
        flags=md.flags | {"completely_positive"},
        dm_order=math.inf,
        name=f"factored({md.name})",
        spec=md.spec,  # identical to the source map once certified
    )

    residual = 0.0
    witness = None
    for t in range(samples):
        rng = rng_for_trial(seed, t)
        args = tuple(random_element(rng, s) for s in md.domain_shapes)
        direct = evaluate(md, args)
        via_center = factored_ev(*args)
        dev = norm(subtract(direct, via_center)) / (1.0 + norm(direct))
        if dev > residual:
            residual = dev
            if dev > tol:
                from .maps import _serialize_args

                witness = _serialize_args(args)
    return TracialDecomposition(
        phi1=phi1,
        phi2=phi2,
        factored=factored,
        residual=residual,
        samples=samples,
        seed=seed,
        certified=residual <= tol,
        witness=witness,
    )


def tracial_linear_canonical_form(
    md: MapDescriptor,
    samples: int = 100,
    seed: int = 0xC5A1,
    rel_tol: float = 1e-10,
) -> Element:
    """Coefficient P with ``map(A) = tr(A) P`` for a tracial linear map
    on one matrix block; certified against random inputs."""
    if md.arity != 1 or md.linearity != "linear":
        raise ValueError("canonical form needs a unary linear map")
    dom = md.domain_shapes[0]
    if dom.num_blocks != 1:
        raise ValueError("canonical form needs a single-block domain")
    d = dom.block_dims[0]
    p = scale(1.0 / d, evaluate(md, (identity(dom),)))
    worst = 0.0
    for t in range(samples):
        rng = rng_for_trial(seed, t)
        a = random_element(rng, dom)
        expected = scale(complex(np.trace(a.blocks[0])), p)
        got = evaluate(md, (a,))
        worst = max(worst, norm(subtract(got, expected)) / (1.0 + norm(got)))
    if worst > rel_tol:
        raise ValueError(
            f"map is not of the form tr(A) P (residual {worst:.3e}); "
            "the tracial/linear claims do not hold"
        )
    return p


# ---------------------------------------------------------------------------
# Mixed-homogeneous components
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HomogeneousComponentTable:
    """All components of bidegree (m, n) with m + n <= degree.

    Component evaluators re-run the phase/radial extraction grid on every
    input, which is exact for polynomial maps of total degree within the
    bound; ``extraction_error`` reports the held-out truncation residual
    and never claims exactness beyond the bound.
    """

    source: MapDescriptor
    degree: int
    radii: tuple[float, ...]
    angular_count: int
    components: dict[tuple[int, int], MapDescriptor]
    base_point_value: Element
    extraction_error: float
    condition_number: float

    def component(self, m: int, n: int) -> MapDescriptor:
        return self.components[(m, n)]

    def evaluate_sum(self, a: Element) -> Element:
        """Base point plus all extracted components at ``a``."""
        total = self.base_point_value
        for part in extract_all_components(self, a).values():
            total = add(total, part)
        return total


def _degree_lists(degree: int) -> dict[int, list[int]]:
    # frequency nu = m - n  ->  total degrees s = m + n >= 1 compatible with nu
    table: dict[int, list[int]] = {}
    for nu in range(-degree, degree + 1):
        degs = [
            s
            for s in range(max(1, abs(nu)), degree + 1)
            if (s - abs(nu)) % 2 == 0
        ]
        if degs:
            table[nu] = degs
    return table


def _radial_systems(
    radii: Sequence[float], degree: int
) -> tuple[dict[int, np.ndarray], float]:
    systems = {}
    worst_cond = 1.0
    for nu, degs in _degree_lists(degree).items():
        v = np.array([[r**s for s in degs] for r in radii])
        worst_cond = max(worst_cond, float(np.linalg.cond(v)))
        systems[nu] = v
    return systems, worst_cond


def extract_all_components(
    table: HomogeneousComponentTable, a: Element
) -> dict[tuple[int, int], Element]:
    """One grid pass returning every component value at ``a`` at once."""
    md = table.source
    radii = table.radii
    t_count = table.angular_count
    degree = table.degree
    angles = 2.0 * np.pi * np.arange(t_count) / t_count
    base = table.base_point_value
    cod = md.codomain_shape

    # grid[r][t] = map(r e^{i theta} a) - map(0), flattened per codomain entry
    flat_len = sum(d * d for d in cod.block_dims)

    def flatten(e: Element) -> np.ndarray:
        return np.concatenate([b.reshape(-1) for b in e.blocks])

    grid = np.zeros((len(radii), t_count, flat_len), dtype=np.complex128)
    for ri, r in enumerate(radii):
        for ti, th in enumerate(angles):
            z = r * np.exp(1j * th)
            val = subtract(md.evaluator(scale(z, a)), base)
            grid[ri, ti, :] = flatten(val)

    def unflatten(vec: np.ndarray) -> Element:
        blocks = []
        pos = 0
        for d in cod.block_dims:
            blocks.append(vec[pos : pos + d * d].reshape(d, d))
            pos += d * d
        return Element(cod, blocks)

    out: dict[tuple[int, int], Element] = {}
    phase = np.exp(-1j * np.outer(np.arange(-degree, degree + 1), angles))
    for nu, degs in _degree_lists(degree).items():
        # DFT in the angle isolates the frequency m - n = nu
        coeff = phase[nu + degree] @ grid / t_count  # (radii, flat)
        v = np.array([[r**s for s in degs] for r in radii])
        sol, *_ = np.linalg.lstsq(v, coeff, rcond=None)
        for row, s in zip(sol, degs):
            m = (s + nu) // 2
            n = (s - nu) // 2
            out[(m, n)] = unflatten(row)
    return out


def extract_homogeneous_components(
    md: MapDescriptor,
    degree: int | None = None,
    radii: Sequence[float] | None = None,
    angular_count: int | None = None,
    probes: int = 10,
    seed: int = 0xC5A1,
) -> HomogeneousComponentTable:
    """Split a unary map into its mixed-homogeneous components.

    Evaluates the map on a polar grid of scaled inputs; the discrete
    Fourier transform in the phase separates ``m - n`` and a Vandermonde
    solve across the radii separates the total degree.  The (0, 0)
    component is the value at zero and is represented exactly.  Raises
    when the radial system is ill-conditioned (widen the radii).
    """
    if md.arity != 1:
        raise ValueError("component extraction handles single-slot maps")
    d = md.degree_bound if degree is None else int(degree)
    if d < 1:
        raise ValueError("degree bound must be >= 1")
    radii = (
        tuple(0.5 + 0.25 * j for j in range(d + 1))
        if radii is None
        else tuple(float(r) for r in radii)
    )
    if len(radii) != d + 1 or any(r <= 0 for r in radii):
        raise ValueError("need degree+1 positive radii")
    t_count = (4 * d + 4) if angular_count is None else int(angular_count)
    if t_count <= 2 * d:
        raise ValueError("angular count must exceed twice the degree bound")

    _, cond = _radial_systems(radii, d)
    if cond > CONDITION_LIMIT:
        raise ValueError(
            f"radial system condition number {cond:.3e} exceeds "
            f"{CONDITION_LIMIT:.0e}; widen the radii"
        )
    base = evaluate(md, (zero(md.domain_shapes[0]),))

    components: dict[tuple[int, int], MapDescriptor] = {}
    placeholder = HomogeneousComponentTable(
        source=md,
        degree=d,
        radii=radii,
        angular_count=t_count,
        components=components,
        base_point_value=base,
        extraction_error=0.0,
        condition_number=cond,
    )

    def make_component(m: int, n: int) -> MapDescriptor:
        if m == 0 and n == 0:

            def ev(a: Element) -> Element:
                return base

        else:

            def ev(a: Element, _m=m, _n=n) -> Element:
                return extract_all_components(placeholder, a)[(_m, _n)]

        flags = [f for f in ("tracial",) if f in md.flags]
        if "completely_positive" in md.flags:
            flags.append("completely_positive")
            flags.append("positive")
        # built directly: the scaling law is certified by tests and by
        # multilinear_lift's diagonal check, not by registration sampling
        return MapDescriptor(
            arity=1,
            domain_shapes=md.domain_shapes,
            codomain_shape=md.codomain_shape,
            linearity="mixed_homogeneous",
            evaluator=ev,
            flags=frozenset(flags),
            homogeneity=(m, n),
            degree_bound=d,
            name=f"{md.name}[{m},{n}]",
        )

    components[(0, 0)] = make_component(0, 0)
    for s in range(1, d + 1):
        for m in range(s + 1):
            components[(m, s - m)] = make_component(m, s - m)

    err = 0.0
    for t in range(probes):
        rng = rng_for_trial(seed, t)
        a = random_element(rng, md.domain_shapes[0])
        direct = evaluate(md, (a,))
        summed = placeholder.evaluate_sum(a)
        err = max(err, norm(subtract(direct, summed)) / (1.0 + norm(direct)))
    return HomogeneousComponentTable(
        source=md,
        degree=d,
        radii=radii,
        angular_count=t_count,
        components=components,
        base_point_value=base,
        extraction_error=err,
        condition_number=cond,
    )


# ---------------------------------------------------------------------------
# Multilinear lift of a mixed-homogeneous component
# ---------------------------------------------------------------------------


def multilinear_lift(
    component: MapDescriptor,
    args: Sequence[Element],
    rel_tol: float = 1e-8,
) -> Element:
    """Symmetric multilinear lift of an (m, n)-homogeneous map.

    ``args`` supplies the m holomorphic slots followed by the n conjugate
    slots.  The lift is the coefficient of ``s_1 ... s_m conj(t_1) ...
    conj(t_n)`` in the component evaluated at the phase combination of the
    arguments, normalized by m! n!; it is extracted over per-scalar phase
    grids.  Each call certifies the diagonal identity (the lift at m + n
    copies of the first argument equals the component there) and raises if
    the supplied map is not actually (m, n)-homogeneous.
    """
    if component.homogeneity is None:
        raise ValueError("component carries no (m, n) bidegree")
    m, n = component.homogeneity
    q = m + n
    if q > 3:
        raise ValueError("lift supports total degree m + n <= 3")
    if q == 0:
        raise ValueError("the constant component has no multilinear lift")
    if len(args) != q:
        raise ValueError(f"expected {q} arguments, got {len(args)}")

    def coefficient(at: Sequence[Element]) -> Element:
        t_count = q + 2  # separates phase exponents in [-n, m]
        acc = zero(component.codomain_shape)
        count = 0
        for ks in np.ndindex(*([t_count] * q)):
            phases = [np.exp(2j * np.pi * k / t_count) for k in ks]
            combo = zero(component.domain_shapes[0])
            for ph, c in zip(phases, at):
                combo = add(combo, scale(ph, c))
            weight = 1.0 + 0.0j
            for i, ph in enumerate(phases):
                weight *= np.conj(ph) if i < m else ph
            acc = add(acc, scale(weight, component.evaluator(combo)))
            count += 1
        return scale(1.0 / count, acc)

    factor = 1.0 / (math.factorial(m) * math.factorial(n))
    lifted = scale(factor, coefficient(args))

    # diagonal certificate at the first argument
    probe = args[0]
    diag = scale(factor, coefficient([probe] * q))
    direct = component.evaluator(probe)
    dev = norm(subtract(diag, direct)) / (1.0 + norm(direct))
    if dev > rel_tol:
        raise ValueError(
            f"inconsistent diagonal (residual {dev:.3e}): the supplied map "
            f"is not ({m},{n})-homogeneous"
        )
    return lifted


# ---------------------------------------------------------------------------
# Nonlinear tracial decomposition
# ---------------------------------------------------------------------------


def _center_bundle_map(shape: AlgebraShape) -> MapDescriptor:
    """Center coordinates of A and of its conjugate, as one scalar tuple.

    Real-linear but conjugate-linear in its second half, so it is
    registered structurally rather than as a complex-linear map.
    """
    p = shape.num_blocks
    cod = AlgebraShape((1,) * (2 * p))

    def ev(a: Element) -> Element:
        coords = [np.trace(b) / d for d, b in zip(shape.block_dims, a.blocks)]
        coords = coords + [np.conj(c) for c in coords]
        return Element(cod, [np.array([[c]]) for c in coords])

    return MapDescriptor(
        arity=1,
        domain_shapes=(shape,),
        codomain_shape=cod,
        linearity="opaque",
        evaluator=ev,
        flags=frozenset({"tracial", "positive", "completely_positive", "unital"}),
        name="center_bundle",
        spec={"kind": "center_bundle", "params": {"shape": list(shape.block_dims)}},
    )


def _component_sum_on_center(
    table: HomogeneousComponentTable, shape: AlgebraShape
) -> MapDescriptor:
    """Truncated component sum evaluated on lifted center coordinates."""
    p = shape.num_blocks
    dom = AlgebraShape((1,) * (2 * p))
    md = table.source

    def ev(coord_elem: Element) -> Element:
        coords = [complex(b[0, 0]) for b in coord_elem.blocks[:p]]
        lifted = center_lift(shape, coords)
        total = table.base_point_value
        for part in extract_all_components(table, lifted).values():
            total = add(total, part)
        return total

    flags = ["positive", "completely_positive", "tracial"]
    if "unital" in md.flags:
        flags.append("unital")
    spec = None
    if md.spec is not None:
        spec = {
            "kind": "component_sum",
            "params": {
                "of": md.spec,
                "degree": table.degree,
                "radii": list(table.radii),
                "angles": table.angular_count,
                "shape": list(shape.block_dims),
            },
        }
    return MapDescriptor(
        arity=1,
        domain_shapes=(dom,),
        codomain_shape=md.codomain_shape,
        linearity=md.linearity if md.linearity != "linear" else "polynomial",
        evaluator=ev,
        flags=frozenset(flags),
        degree_bound=table.degree,
        name=f"component_sum({md.name})",
        spec=spec,
    )


def component_sum_from_spec(params: dict) -> MapDescriptor:
    md = map_from_spec(params["of"])
    shape = AlgebraShape(params["shape"])
    table = extract_homogeneous_components(
        md,
        degree=int(params["degree"]),
        radii=params.get("radii"),
        angular_count=params.get("angles"),
        probes=0,
    )
    return _component_sum_on_center(table, shape)


def decompose_tracial_nonlinear(
    md: MapDescriptor,
    degree: int | None = None,
    samples: int = 50,
    seed: int = 0xC5A1,
    tol: float = 1e-9,
) -> TracialDecomposition:
    """Factor a tracial completely positive map through the center bundle.

    Components up to the degree bound are extracted; each one is tracial,
    so it agrees with its own value on the lifted center coordinates, and
    the truncated sum factors through the bundle of center traces of the
    input and its conjugate.  The residual certifies the factorization on
    fresh samples (for degree-bounded maps it reflects only extraction
    round-off; beyond the bound it includes the truncation error).
    """
    if "tracial" not in md.flags:
        raise ValueError("nonlinear decomposition requires a tracial flag")
    if "completely_positive" not in md.flags:
        raise ValueError("nonlinear decomposition requires complete positivity")
    if md.arity != 1:
        raise ValueError("nonlinear decomposition handles single-slot maps")
    shape = md.domain_shapes[0]
    table = extract_homogeneous_components(md, degree=degree, seed=seed)
    phi1 = _center_bundle_map(shape)
    phi2 = _component_sum_on_center(table, shape)

    def factored_ev(a: Element) -> Element:
        return phi2.evaluator(phi1.evaluator(a))

    factored = MapDescriptor(
        arity=1,
        domain_shapes=(shape,),
        codomain_shape=md.codomain_shape,
        linearity=md.linearity,
        evaluator=factored_ev,
        flags=md.flags,
        degree_bound=table.degree,
        dm_order=math.inf,
        name=f"factored({md.name})",
        spec=md.spec,
    )

    residual = 0.0
    witness = None
    for t in range(samples):
        rng = rng_for_trial(seed ^ 0xF00D, t)
        a = random_element(rng, shape)
        direct = evaluate(md, (a,))
        via = factored_ev(a)
        dev = norm(subtract(direct, via)) / (1.0 + norm(direct))
        if dev > residual:
            residual = dev
            if dev > tol:
                from .maps import _serialize_args

                witness = _serialize_args((a,))
    return TracialDecomposition(
        phi1=phi1,
        phi2=phi2,
        factored=factored,
        residual=residual,
        samples=samples,
        seed=seed,
        certified=residual <= tol,
        witness=witness,
        condition_number=table.condition_number,
    )
