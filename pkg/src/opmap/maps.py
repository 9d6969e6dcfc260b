"""Maps between block algebras and their positivity testers.

A map of arity k takes a k-tuple of elements (one per domain algebra) to
an element of the codomain algebra.  Two canonical matrix amplifications
are implemented:

* entrywise (``amplify_type2``): the n-by-n operator matrix whose (i, j)
  entry is the map applied to the (i, j) sub-blocks of the inputs;
* contracted (``amplify_type1``): the amplification that sums over
  internal indices like a k-fold matrix product, defined only when all
  domain algebras coincide.

Positivity with respect to the entrywise amplification is tested on random
PSD inputs; positivity with respect to the contracted amplification is
tested on the mirrored-tuple constraint set ``(A_1, ..., A_k) =
(A_k*, ..., A_1*)`` (with a PSD midpoint when k is odd).  Randomized
testers can refute but never certify; the only exact certificate is the
Choi matrix of a linear map on a single matrix block.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .algebra import (
    AlgebraShape,
    DEFAULT_TOL,
    hermitian_deviation,
    Element,
    ToleranceConfig,
    add,
    adjoint,
    block_matrix,
    direct_sum_matrix,
    element_from_json,
    element_to_json,
    identity,
    is_positive,
    min_eig_hermitian_part,
    multiply,
    norm,
    subtract,
    zero,
)
from .sampling import (
    random_element,
    random_hermitian,
    random_normal,
    random_psd,
    rng_for_trial,
)

__all__ = [
    "ChoiMatrix",
    "KrausSet",
    "MapDescriptor",
    "Notion",
    "PositivityReport",
    "RegistrationError",
    "TracialReport",
    "amplify_type1",
    "amplify_type2",
    "choi_matrix",
    "claims_n_positive",
    "evaluate",
    "is_completely_positive_exact",
    "register_map",
    "replay_witness",
    "split_amplified",
    "test_choi_inequality",
    "test_positive",
    "test_superadditive",
    "test_tracial",
]

LINEARITY_CLASSES = ("linear", "multilinear", "mixed_homogeneous", "polynomial", "opaque")
FLAGS = ("unital", "tracial", "positive", "completely_positive")


class RegistrationError(ValueError):
    """A claimed structural property failed its registration spot check."""


@dataclass(frozen=True, eq=False)
class MapDescriptor:
    """A k-ary map between block algebras plus its structural metadata.

    ``flags`` carries claims that were spot-checked at registration
    (unital, tracial) or hold by construction (positive,
    completely_positive); ``n_positive`` is the largest claimed
    entrywise-amplification positivity order (0 = no claim).  ``dm_order``
    records, for maps built as a composition through a commutative
    algebra, the positivity order of the outer factor (``math.inf`` when
    the outer factor is completely positive); it is set only by
    constructors, never inferred.
    """

    arity: int
    domain_shapes: tuple[AlgebraShape, ...]
    codomain_shape: AlgebraShape
    linearity: str
    evaluator: Callable[..., Element]
    flags: frozenset[str] = frozenset()
    n_positive: int = 0
    homogeneity: tuple[int, int] | None = None
    degree_bound: int = 6
    dm_order: float = 0.0
    name: str = ""
    spec: dict | None = None

    def is_unital(self) -> bool:
        return "unital" in self.flags

    def is_tracial(self) -> bool:
        return "tracial" in self.flags

    def identity_args(self) -> tuple[Element, ...]:
        return tuple(identity(s) for s in self.domain_shapes)

    def zero_args(self) -> tuple[Element, ...]:
        return tuple(zero(s) for s in self.domain_shapes)


def claims_n_positive(md: MapDescriptor, n: int) -> bool:
    if "completely_positive" in md.flags:
        return True
    return md.n_positive >= n or md.dm_order >= n


@dataclass(frozen=True)
class Notion:
    """A positivity notion: which amplification, at which order."""

    kind: str  # "type1" | "type2"
    n: int

    def __post_init__(self):
        if self.kind not in ("type1", "type2"):
            raise ValueError(f"unknown notion kind {self.kind!r}")
        if self.n < 1:
            raise ValueError(f"amplification order must be >= 1, got {self.n}")

    def __str__(self):
        return f"{self.kind}({self.n})"

    @staticmethod
    def parse(text: str) -> "Notion":
        text = text.strip()
        if "(" in text and text.endswith(")"):
            kind, rest = text.split("(", 1)
            return Notion(kind.strip(), int(rest[:-1]))
        raise ValueError(f"cannot parse notion {text!r}; expected e.g. 'type2(2)'")


@dataclass(frozen=True)
class KrausSet:
    """Operators of a map A -> sum_r V_r A V_r*; all codomain x domain."""

    operators: tuple[np.ndarray, ...]

    def __post_init__(self):
        if not self.operators:
            raise ValueError("KrausSet needs at least one operator")
        shape0 = self.operators[0].shape
        if any(op.shape != shape0 for op in self.operators):
            raise ValueError("all Kraus operators must share dimensions")

    @property
    def codomain_dim(self) -> int:
        return self.operators[0].shape[0]

    @property
    def domain_dim(self) -> int:
        return self.operators[0].shape[1]


@dataclass(frozen=True)
class ChoiMatrix:
    matrix: np.ndarray
    domain_dim: int
    codomain_dim: int


@dataclass(frozen=True)
class PositivityReport:
    """Outcome of a positivity check, with enough state to replay it."""

    verdict: str  # certified_positive | violated | exhausted_trials
    witness: tuple[dict, ...] | None
    min_eig: float
    trials: int
    seed: int
    notion: str
    witness_level: int = 1  # amplification order at which the witness lives
    herm_dev: float = 0.0  # self-adjointness deviation of the violating output

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "witness": list(self.witness) if self.witness is not None else None,
            "min_eig": self.min_eig,
            "trials": self.trials,
            "seed": self.seed,
            "notion": self.notion,
            "witness_level": self.witness_level,
            "herm_dev": self.herm_dev,
        }

    @staticmethod
    def from_json(obj: dict) -> "PositivityReport":
        witness = obj.get("witness")
        return PositivityReport(
            verdict=obj["verdict"],
            witness=tuple(witness) if witness is not None else None,
            min_eig=float(obj["min_eig"]),
            trials=int(obj["trials"]),
            seed=int(obj["seed"]),
            notion=obj["notion"],
            witness_level=int(obj.get("witness_level", 1)),
            herm_dev=float(obj.get("herm_dev", 0.0)),
        )


@dataclass(frozen=True)
class TracialReport:
    residual: float
    per_slot: tuple[float, ...]
    scale: float
    trials: int
    seed: int
    tracial: bool

    def to_json(self) -> dict:
        return {
            "residual": self.residual,
            "per_slot": list(self.per_slot),
            "scale": self.scale,
            "trials": self.trials,
            "seed": self.seed,
            "tracial": self.tracial,
        }


# ---------------------------------------------------------------------------
# Evaluation and amplification
# ---------------------------------------------------------------------------


def evaluate(md: MapDescriptor, args: Sequence[Element]) -> Element:
    if len(args) != md.arity:
        raise ValueError(f"expected {md.arity} arguments, got {len(args)}")
    for a, s in zip(args, md.domain_shapes):
        if a.shape != s:
            raise ValueError(
                f"argument shape {a.shape.block_dims} does not match domain "
                f"{s.block_dims}"
            )
    out = md.evaluator(*args)
    if out.shape != md.codomain_shape:
        raise ValueError(
            f"evaluator returned shape {out.shape.block_dims}, expected "
            f"{md.codomain_shape.block_dims}"
        )
    return out


def split_amplified(x: Element, n: int) -> list[list[Element]]:
    """Decompose an element on an n-amplified shape into an n-by-n array."""
    base_dims = []
    for d in x.shape.block_dims:
        if d % n != 0:
            raise ValueError(f"block side {d} is not divisible by {n}")
        base_dims.append(d // n)
    base = AlgebraShape(base_dims)
    out: list[list[Element]] = []
    for i in range(n):
        row = []
        for j in range(n):
            blocks = []
            for d, b in zip(base_dims, x.blocks):
                blocks.append(b[i * d : (i + 1) * d, j * d : (j + 1) * d])
            row.append(Element(base, blocks))
        out.append(row)
    return out


def amplify_type2(md: MapDescriptor, n: int, args: Sequence[Element]) -> Element:
    """Entrywise amplification: output (i, j) entry = map at (i, j) entries."""
    if n == 1:
        return evaluate(md, args)
    if len(args) != md.arity:
        raise ValueError(f"expected {md.arity} arguments, got {len(args)}")
    subs = [split_amplified(a, n) for a in args]
    for sub, s in zip(subs, md.domain_shapes):
        if sub[0][0].shape != s:
            raise ValueError("argument does not live on the n-amplified domain")
    entries = [
        [md.evaluator(*(sub[i][j] for sub in subs)) for j in range(n)]
        for i in range(n)
    ]
    return block_matrix(entries)


def amplify_type1(md: MapDescriptor, n: int, args: Sequence[Element]) -> Element:
    """Contracted amplification; requires all domain algebras identical."""
    if any(s != md.domain_shapes[0] for s in md.domain_shapes):
        raise ValueError("contracted amplification needs homogeneous domains")
    if len(args) != md.arity:
        raise ValueError(f"expected {md.arity} arguments, got {len(args)}")
    k = md.arity
    subs = [split_amplified(a, n) for a in args]
    if subs[0][0][0].shape != md.domain_shapes[0]:
        raise ValueError("argument does not live on the n-amplified domain")
    entries: list[list[Element]] = []
    for i in range(n):
        row = []
        for j in range(n):
            acc = zero(md.codomain_shape)
            for path in itertools.product(range(n), repeat=k - 1):
                idx = (i,) + path + (j,)
                tup = tuple(subs[l][idx[l]][idx[l + 1]] for l in range(k))
                acc = add(acc, md.evaluator(*tup))
            row.append(acc)
        entries.append(row)
    return block_matrix(entries)


# ---------------------------------------------------------------------------
# Choi certificate for linear maps on one matrix block
# ---------------------------------------------------------------------------


def choi_matrix(md: MapDescriptor) -> ChoiMatrix:
    """Sum over matrix units E_ij of E_ij tensor Phi(E_ij).

    Multi-block codomains are embedded block-diagonally (a *-homomorphism,
    so complete positivity is unaffected); multi-block domains are not
    supported and must use the randomized tester instead.
    """
    if md.linearity != "linear" or md.arity != 1:
        raise ValueError("Choi matrix is defined for linear maps only")
    dom = md.domain_shapes[0]
    if dom.num_blocks != 1:
        raise ValueError(
            "Choi certificate needs a single-block domain; use test_positive"
        )
    d = dom.block_dims[0]
    c = sum(md.codomain_shape.block_dims)
    out = np.zeros((d * c, d * c), dtype=np.complex128)
    for i in range(d):
        for j in range(d):
            unit = np.zeros((d, d))
            unit[i, j] = 1.0
            img = direct_sum_matrix(evaluate(md, (Element(dom, [unit]),)))
            out[i * c : (i + 1) * c, j * c : (j + 1) * c] = img
    return ChoiMatrix(out, d, c)


def is_completely_positive_exact(
    choi: ChoiMatrix, tol: ToleranceConfig = DEFAULT_TOL
) -> tuple[bool, float]:
    m = choi.matrix
    scale_ref = 1.0 + float(np.linalg.norm(m, 2))
    herm_dev = float(np.linalg.norm(m - m.conj().T, 2))
    min_eig = float(np.linalg.eigvalsh((m + m.conj().T) / 2.0)[0])
    if herm_dev > DEFAULT_TOL.herm_tol * scale_ref:
        return False, min_eig
    return min_eig >= -tol.psd_tol * scale_ref, min_eig


def _entangled_witness(d: int) -> Element:
    # element of M_{d*d} whose (i, j) sub-block is the matrix unit E_ij;
    # rank one, PSD, and its entrywise amplification at order d is the Choi
    w = np.zeros(d * d, dtype=np.complex128)
    for i in range(d):
        w[i * d + i] = 1.0
    return Element(AlgebraShape((d * d,)), [np.outer(w, w.conj())])


# ---------------------------------------------------------------------------
# Trial driver (deterministic under any thread count)
# ---------------------------------------------------------------------------


def _scan_trials(trials: int, fn, threads: int = 1):
    """Evaluate fn(0..trials-1), stopping at the first "stop" result.

    Returns the list of results in trial order, truncated just after the
    first result whose first component is True.  With threads > 1, trials
    run in chunks; the returned list is identical to the sequential one.
    """
    results = []
    if threads <= 1:
        for t in range(trials):
            r = fn(t)
            results.append(r)
            if r[0]:
                break
        return results
    chunk = max(1, 4 * threads)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for start in range(0, trials, chunk):
            idx = range(start, min(start + chunk, trials))
            batch = list(pool.map(fn, idx))
            for r in batch:
                results.append(r)
                if r[0]:
                    return results
    return results


def _serialize_args(args: Sequence[Element]) -> tuple[dict, ...]:
    return tuple(element_to_json(a) for a in args)


def _deserialize_args(witness: Sequence[dict]) -> tuple[Element, ...]:
    return tuple(element_from_json(w) for w in witness)


# ---------------------------------------------------------------------------
# Positivity testers
# ---------------------------------------------------------------------------


def _type1_sample(
    md: MapDescriptor, n: int, rng: np.random.Generator
) -> tuple[Element, ...]:
    amp = md.domain_shapes[0].amplified(n)
    k = md.arity
    half = k // 2
    free = [random_element(rng, amp) for _ in range(half)]
    mid = [random_psd(rng, amp)] if k % 2 == 1 else []
    mirrored = [adjoint(a) for a in reversed(free)]
    return tuple(free + mid + mirrored)


def test_positive(
    md: MapDescriptor,
    notion: Notion,
    trials: int = 1000,
    seed: int = 0xC5A1,
    tol: ToleranceConfig = DEFAULT_TOL,
    threads: int = 1,
    exact_upgrade: bool = True,
) -> PositivityReport:
    """Randomized refutation of n-positivity; exact for eligible linear maps.

    Entrywise-amplification checks sample Gram-built PSD tuples on the
    amplified domain; contracted-amplification checks sample the mirrored
    constraint set.  A violation returns the witness tuple.  Linear maps on
    a single matrix block of side d are upgraded to the exact Choi
    certificate whenever the requested entrywise order is at least d
    (disable with ``exact_upgrade=False`` to force sampling).
    """
    dom = md.domain_shapes[0]
    if (
        exact_upgrade
        and notion.kind == "type2"
        and md.linearity == "linear"
        and md.arity == 1
        and dom.num_blocks == 1
        and notion.n >= dom.block_dims[0]
    ):
        d = dom.block_dims[0]
        ch = choi_matrix(md)
        ok, min_eig = is_completely_positive_exact(ch, tol)
        if ok:
            return PositivityReport(
                "certified_positive", None, min_eig, 0, seed, "choi_exact", d
            )
        witness = (_entangled_witness(d),)
        return PositivityReport(
            "violated", _serialize_args(witness), min_eig, 0, seed, "choi_exact", d
        )

    if notion.kind == "type1" and any(
        s != md.domain_shapes[0] for s in md.domain_shapes
    ):
        raise ValueError("type1 testing needs homogeneous domains")

    def one_trial(t: int):
        rng = rng_for_trial(seed, t)
        if notion.kind == "type2":
            args = tuple(
                random_psd(rng, s.amplified(notion.n)) for s in md.domain_shapes
            )
            out = amplify_type2(md, notion.n, args)
        else:
            args = _type1_sample(md, notion.n, rng)
            out = amplify_type1(md, notion.n, args)
        ok, min_eig = is_positive(out, tol)
        dev = hermitian_deviation(out) if not ok else 0.0
        return (not ok, min_eig, dev, args)

    results = _scan_trials(trials, one_trial, threads)
    if results and results[-1][0]:
        _, min_eig, dev, args = results[-1]
        return PositivityReport(
            "violated",
            _serialize_args(args),
            min_eig,
            len(results),
            seed,
            str(notion),
            notion.n,
            dev,
        )
    min_eig = min((r[1] for r in results), default=float("inf"))
    return PositivityReport(
        "exhausted_trials", None, min_eig, len(results), seed, str(notion), notion.n
    )


def test_tracial(
    md: MapDescriptor,
    trials: int = 100,
    seed: int = 0xC5A1,
    rel_tol: float = 1e-9,
) -> TracialReport:
    """Largest residual of swapping a product inside any single slot."""
    per_slot = []
    scale_ref = 1.0
    for slot in range(md.arity):
        worst = 0.0
        for t in range(trials):
            rng = rng_for_trial(seed ^ (0x51A7 + slot), t)
            args = [random_element(rng, s) for s in md.domain_shapes]
            a = random_element(rng, md.domain_shapes[slot])
            b = random_element(rng, md.domain_shapes[slot])
            args_ab = list(args)
            args_ab[slot] = multiply(a, b)
            args_ba = list(args)
            args_ba[slot] = multiply(b, a)
            out_ab = evaluate(md, args_ab)
            out_ba = evaluate(md, args_ba)
            worst = max(worst, norm(subtract(out_ab, out_ba)))
            scale_ref = max(scale_ref, 1.0 + norm(out_ab))
        per_slot.append(worst)
    residual = max(per_slot)
    return TracialReport(
        residual=residual,
        per_slot=tuple(per_slot),
        scale=scale_ref,
        trials=trials,
        seed=seed,
        tracial=residual <= rel_tol * scale_ref,
    )


def _tuple_mul(xs: Sequence[Element], ys: Sequence[Element]) -> tuple[Element, ...]:
    return tuple(multiply(x, y) for x, y in zip(xs, ys))


def _tuple_adj(xs: Sequence[Element]) -> tuple[Element, ...]:
    return tuple(adjoint(x) for x in xs)


def _check_unital(md: MapDescriptor, rel_tol: float = 1e-8):
    out = evaluate(md, md.identity_args())
    dev = norm(subtract(out, identity(md.codomain_shape)))
    if dev > rel_tol * (1.0 + norm(out)):
        raise ValueError(f"map is not unital (deviation {dev:.3e})")


def test_choi_inequality(
    md: MapDescriptor,
    trials: int = 500,
    seed: int = 0xC5A1,
    tol: ToleranceConfig = DEFAULT_TOL,
    population: str = "auto",
    threads: int = 1,
) -> PositivityReport:
    """Check ``Phi(A*A) - Phi(A*) Phi(A) >= 0`` on sampled tuples.

    ``population`` selects the inputs: "normal" draws normal tuples (the
    regime where unital positive multilinear maps must satisfy the
    inequality), "arbitrary" draws general tuples (the 2-positive regime).
    "auto" picks "arbitrary" when the map claims 2-positivity and "normal"
    otherwise.
    """
    _check_unital(md)
    if population == "auto":
        population = "arbitrary" if claims_n_positive(md, 2) else "normal"
    if population not in ("normal", "arbitrary"):
        raise ValueError(f"unknown population {population!r}")

    def one_trial(t: int):
        rng = rng_for_trial(seed, t)
        bold = []
        for s in md.domain_shapes:
            if population == "arbitrary":
                bold.append(random_element(rng, s))
            elif int(rng.integers(2)) == 0:
                bold.append(random_hermitian(rng, s))
            else:
                bold.append(random_normal(rng, s))
        bold = tuple(bold)
        diff = subtract(
            evaluate(md, _tuple_mul(_tuple_adj(bold), bold)),
            multiply(evaluate(md, _tuple_adj(bold)), evaluate(md, bold)),
        )
        ok, min_eig = is_positive(diff, tol)
        dev = hermitian_deviation(diff) if not ok else 0.0
        return (not ok, min_eig, dev, bold)

    notion = f"choi_inequality[{population}]"
    results = _scan_trials(trials, one_trial, threads)
    if results and results[-1][0]:
        _, min_eig, dev, bold = results[-1]
        return PositivityReport(
            "violated", _serialize_args(bold), min_eig, len(results), seed, notion,
            herm_dev=dev,
        )
    min_eig = min((r[1] for r in results), default=float("inf"))
    return PositivityReport(
        "exhausted_trials", None, min_eig, len(results), seed, notion
    )


def test_superadditive(
    md: MapDescriptor,
    trials: int = 200,
    seed: int = 0xC5A1,
    tol: ToleranceConfig = DEFAULT_TOL,
    threads: int = 1,
) -> PositivityReport:
    """Check ``Phi(A) - Phi(B) - Phi(A - B) >= 0`` for ``A >= B >= 0``.

    Applicable only to maps claiming at least 3-positivity with
    ``Phi(0) = 0``; the hypothesis is necessary, so the checker refuses
    weaker claims instead of reporting vacuous violations.
    """
    if not claims_n_positive(md, 3):
        raise ValueError(
            "superadditivity requires a 3-positivity claim; checker not applicable"
        )
    z = evaluate(md, md.zero_args())
    if norm(z) > 1e-10:
        raise ValueError("superadditivity requires Phi(0) = 0")

    def one_trial(t: int):
        rng = rng_for_trial(seed, t)
        b = tuple(random_psd(rng, s) for s in md.domain_shapes)
        c = tuple(random_psd(rng, s) for s in md.domain_shapes)
        a = tuple(add(x, y) for x, y in zip(b, c))
        diff = subtract(
            subtract(evaluate(md, a), evaluate(md, b)), evaluate(md, c)
        )
        ok, min_eig = is_positive(diff, tol)
        dev = hermitian_deviation(diff) if not ok else 0.0
        return (not ok, min_eig, dev, a + b)

    results = _scan_trials(trials, one_trial, threads)
    if results and results[-1][0]:
        _, min_eig, dev, pair = results[-1]
        return PositivityReport(
            "violated",
            _serialize_args(pair),
            min_eig,
            len(results),
            seed,
            "superadditive",
            herm_dev=dev,
        )
    min_eig = min((r[1] for r in results), default=float("inf"))
    return PositivityReport(
        "exhausted_trials", None, min_eig, len(results), seed, "superadditive"
    )


def replay_witness(
    md: MapDescriptor, report: PositivityReport, tol: ToleranceConfig = DEFAULT_TOL
) -> float:
    """Re-evaluate a violation witness; returns the reproduced min eigenvalue."""
    if report.witness is None:
        raise ValueError("report carries no witness")
    args = _deserialize_args(report.witness)
    notion = report.notion
    if notion == "choi_exact" or notion.startswith("type2"):
        out = amplify_type2(md, report.witness_level, args)
        return min_eig_hermitian_part(out)
    if notion.startswith("type1"):
        out = amplify_type1(md, report.witness_level, args)
        return min_eig_hermitian_part(out)
    if notion.startswith("choi_inequality"):
        diff = subtract(
            evaluate(md, _tuple_mul(_tuple_adj(args), args)),
            multiply(evaluate(md, _tuple_adj(args)), evaluate(md, args)),
        )
        return min_eig_hermitian_part(diff)
    if notion == "superadditive":
        k = md.arity
        a, b = args[:k], args[k:]
        c = tuple(subtract(x, y) for x, y in zip(a, b))
        diff = subtract(
            subtract(evaluate(md, a), evaluate(md, b)), evaluate(md, c)
        )
        return min_eig_hermitian_part(diff)
    raise ValueError(f"cannot replay notion {notion!r}")


# ---------------------------------------------------------------------------
# Registration
# ---------------------------------------------------------------------------


def _spot_check_linearity(md: MapDescriptor, rel_tol: float, trials: int):
    if md.linearity in ("polynomial", "opaque"):
        return
    for t in range(trials):
        rng = rng_for_trial(0xB11D, t)
        z = complex(rng.standard_normal(), rng.standard_normal())
        if md.linearity == "mixed_homogeneous":
            if md.homogeneity is None:
                raise RegistrationError("mixed_homogeneous needs a bidegree")
            m, n = md.homogeneity
            a = tuple(random_element(rng, s) for s in md.domain_shapes)
            lhs = evaluate(md, tuple((z * x) for x in a))
            rhs = (z**m) * (np.conj(z) ** n) * evaluate(md, a)
            ref = 1.0 + norm(rhs)
            if norm(subtract(lhs, rhs)) > rel_tol * ref:
                raise RegistrationError(
                    f"map is not ({m},{n})-mixed homogeneous"
                )
            continue
        a = tuple(random_element(rng, s) for s in md.domain_shapes)
        b = tuple(random_element(rng, s) for s in md.domain_shapes)
        if md.linearity == "linear":
            lhs = evaluate(md, tuple(add(x, z * y) for x, y in zip(a, b)))
            rhs = add(evaluate(md, a), z * evaluate(md, b))
            ref = 1.0 + norm(rhs)
            if norm(subtract(lhs, rhs)) > rel_tol * ref:
                raise RegistrationError("map failed the joint-linearity spot check")
        else:  # multilinear: one slot per trial, round robin
            slot = t % md.arity
            modified = list(a)
            modified[slot] = add(a[slot], z * b[slot])
            lhs = evaluate(md, modified)
            other = list(a)
            other[slot] = b[slot]
            rhs = add(evaluate(md, a), z * evaluate(md, other))
            ref = 1.0 + norm(rhs)
            if norm(subtract(lhs, rhs)) > rel_tol * ref:
                raise RegistrationError(
                    f"map failed the multilinearity spot check in slot {slot}"
                )


def _spot_check_positivity(md: MapDescriptor, tol: ToleranceConfig, trials: int):
    for t in range(trials):
        rng = rng_for_trial(0xA05, t)
        args = tuple(random_psd(rng, s) for s in md.domain_shapes)
        ok, min_eig = is_positive(evaluate(md, args), tol)
        if not ok:
            raise RegistrationError(
                f"positivity claim refuted on a PSD sample (min eig {min_eig:.3e})"
            )


def _superadditivity_probes(md: MapDescriptor) -> list[tuple[Element, ...]]:
    # deterministic pair stressing norms and other non-superadditive maps:
    # B supported on the first coordinate, increment on the second
    probes = []
    shapes = md.domain_shapes
    if any(d >= 2 for s in shapes for d in s.block_dims):
        b_blocks, c_blocks = [], []
        for s in shapes:
            bb, cb = [], []
            for d in s.block_dims:
                e1 = np.zeros((d, d))
                e2 = np.zeros((d, d))
                e1[0, 0] = 1.0
                e2[(1 if d >= 2 else 0), (1 if d >= 2 else 0)] = 1.0
                bb.append(e1)
                cb.append(e2)
            b_blocks.append(Element(s, bb))
            c_blocks.append(Element(s, cb))
        probes.append((tuple(b_blocks), tuple(c_blocks)))
    return probes


def _spot_check_superadditive(md: MapDescriptor, tol: ToleranceConfig, trials: int):
    z = evaluate(md, md.zero_args())
    if norm(z) > 1e-10:
        return  # hypothesis class requires Phi(0)=0; nothing to refute here
    pairs = _superadditivity_probes(md)
    for t in range(trials):
        rng = rng_for_trial(0x5AD, t)
        b = tuple(random_psd(rng, s) for s in md.domain_shapes)
        c = tuple(random_psd(rng, s) for s in md.domain_shapes)
        pairs.append((b, c))
    for b, c in pairs:
        a = tuple(add(x, y) for x, y in zip(b, c))
        diff = subtract(subtract(evaluate(md, a), evaluate(md, b)), evaluate(md, c))
        ok, min_eig = is_positive(diff, tol)
        if not ok:
            raise RegistrationError(
                "3-positivity claim rejected: superadditivity (a necessary "
                f"consequence) fails with min eig {min_eig:.3e}"
            )


def register_map(
    arity: int,
    domain_shapes: Sequence[AlgebraShape],
    codomain_shape: AlgebraShape,
    linearity: str,
    evaluator: Callable[..., Element],
    flags: Sequence[str] = (),
    n_positive: int = 0,
    homogeneity: tuple[int, int] | None = None,
    degree_bound: int = 6,
    dm_order: float = 0.0,
    name: str = "",
    spec: dict | None = None,
    check_trials: int = 20,
    check_tol: float = 1e-9,
) -> MapDescriptor:
    """Build a MapDescriptor and spot-check its claimed structure.

    Claimed linearity class, traciality, unitality and (for nonlinear maps
    claiming 3-positivity with a fixed point at zero) superadditivity are
    verified on ``check_trials`` random draws; failures raise
    ``RegistrationError`` instead of silently downgrading the claims.
    """
    if linearity not in LINEARITY_CLASSES:
        raise RegistrationError(f"unknown linearity class {linearity!r}")
    bad = set(flags) - set(FLAGS)
    if bad:
        raise RegistrationError(f"unknown flags {sorted(bad)}")
    if arity < 1 or len(domain_shapes) != arity:
        raise RegistrationError("arity must match the number of domain shapes")
    md = MapDescriptor(
        arity=arity,
        domain_shapes=tuple(domain_shapes),
        codomain_shape=codomain_shape,
        linearity=linearity,
        evaluator=evaluator,
        flags=frozenset(flags),
        n_positive=int(n_positive),
        homogeneity=homogeneity,
        degree_bound=degree_bound,
        dm_order=dm_order,
        name=name,
        spec=spec,
    )
    evaluate(md, md.identity_args())  # shape contract
    _spot_check_linearity(md, check_tol, check_trials)
    if "unital" in md.flags:
        try:
            _check_unital(md)
        except ValueError as exc:
            raise RegistrationError(str(exc)) from exc
    if "tracial" in md.flags:
        rep = test_tracial(md, trials=check_trials, rel_tol=check_tol)
        if not rep.tracial:
            raise RegistrationError(
                f"traciality claim refuted (residual {rep.residual:.3e})"
            )
    if (
        "positive" in md.flags
        or "completely_positive" in md.flags
        or md.n_positive >= 1
        or md.dm_order >= 1
    ):
        _spot_check_positivity(md, DEFAULT_TOL, check_trials)
    if (
        claims_n_positive(md, 3)
        and md.linearity not in ("linear", "multilinear")
        and md.arity == 1
    ):
        _spot_check_superadditive(md, DEFAULT_TOL, check_trials)
    return md
