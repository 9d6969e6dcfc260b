"""Named example and counterexample cases with expected verdicts.

Each case packages a concrete map construction, the check to run, a
deterministic stored witness where one exists (replayed before any random
search), and the expected outcome.  ``reproduce_all`` reruns the whole
catalog and compares observed against expected verdicts; seeds change the
random searches but never the verdict of a case with a stored witness.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .algebra import (
    AlgebraShape,
    Element,
    element_to_json,
    identity,
    is_positive,
    norm,
    scale,
    subtract,
)
from .builders import (
    conjugate_power_multimap,
    hadamard_power_multimap,
    operator_norm_map,
    product_map,
    projection_multimap,
    schur_multimap,
    tensor_map,
    trace_multimap,
    transpose_tensor_map,
)
from .maps import (
    Notion,
    RegistrationError,
    amplify_type1,
    amplify_type2,
    test_positive,
    test_tracial,
)
from .sampling import rng_for_trial

__all__ = ["CaseRecord", "list_cases", "reproduce_all", "run_case"]


@dataclass(frozen=True)
class CaseRecord:
    id: str
    description: str
    expected: str
    runner: Callable[[dict, int, int], dict]
    defaults: dict = field(default_factory=dict)


def _verdict_report(case, observed, margin, seed, witness=None, extra=None):
    out = {
        "id": case.id,
        "description": case.description,
        "expected": case.expected,
        "observed": observed,
        "margin": float(margin),
        "matches": observed == case.expected,
        "seed": seed,
    }
    if witness is not None:
        out["witness"] = witness
    if extra:
        out.update(extra)
    return out


# ---------------------------------------------------------------------------
# Stored witnesses
# ---------------------------------------------------------------------------


def _matrix_unit_block_witness() -> Element:
    # the 4x4 element whose (i, j) sub-block is the matrix unit E_ij of M_2
    e = np.zeros((4, 4), dtype=complex)
    for i in range(2):
        for j in range(2):
            e[2 * i : 2 * i + 2, 2 * j : 2 * j + 2] = np.outer(
                np.eye(2)[i], np.eye(2)[j]
            )
    return Element(AlgebraShape((4,)), [e])


def _theta_case(params, seed, trials):
    case = _CASES["theta_transpose_tensor"]
    theta = transpose_tensor_map()
    witness = _matrix_unit_block_witness()
    out = amplify_type2(theta, 2, (witness, witness))
    ok, min_eig = is_positive(out)
    observed = "violated" if not ok else "exhausted_trials"
    return _verdict_report(
        case, observed, min_eig, seed,
        witness=[element_to_json(witness)] * 2,
    )


def _projection_case(params, seed, trials):
    case = _CASES["projection_Lambda"]
    k = int(params.get("k", 4))
    shape = AlgebraShape((2,))
    lam = projection_multimap(shape, k)
    minus = scale(-1.0, identity(shape))
    witness = (minus,) + (identity(shape),) * (k - 2) + (minus,)
    out = amplify_type1(lam, 1, witness)
    ok, min_eig = is_positive(out)
    observed = "violated" if not ok else "exhausted_trials"
    return _verdict_report(
        case, observed, min_eig, seed,
        witness=[element_to_json(w) for w in witness],
    )


def _product_type1_case(params, seed, trials):
    case = _CASES["product_Pi_type1_cp"]
    k = int(params.get("k", 2))
    n = int(params.get("n", 3))
    pm = product_map(AlgebraShape((2,)), k)
    worst = np.inf
    for order in range(1, n + 1):
        rep = test_positive(pm, Notion("type1", order), trials=trials, seed=seed)
        if rep.verdict == "violated":
            return _verdict_report(case, "violated", rep.min_eig, seed)
        worst = min(worst, rep.min_eig)
    return _verdict_report(case, "exhausted_trials", worst, seed)


def _product_type2_case(params, seed, trials):
    case = _CASES["product_Pi_type2_noncommutative"]
    pm = product_map(AlgebraShape((2,)), int(params.get("k", 2)))
    rep = test_positive(pm, Notion("type2", 1), trials=trials, seed=seed)
    return _verdict_report(
        case, rep.verdict, rep.min_eig, seed, witness=rep.witness,
        extra={"herm_dev": rep.herm_dev, "trials": rep.trials},
    )


def _product_commutative_case(params, seed, trials):
    case = _CASES["product_Pi_commutative_cp"]
    p = int(params.get("points", 3))
    pm = product_map(AlgebraShape((1,) * p), int(params.get("k", 2)))
    rep = test_positive(pm, Notion("type2", 3), trials=trials, seed=seed)
    return _verdict_report(case, rep.verdict, rep.min_eig, seed)


def _tensor_case(params, seed, trials):
    case = _CASES["tensor_map_cp"]
    tm = tensor_map([2, 2])
    rep = test_positive(tm, Notion("type2", 2), trials=trials, seed=seed)
    return _verdict_report(case, rep.verdict, rep.min_eig, seed)


def _trace_case(params, seed, trials):
    case = _CASES["trace_multimap_tracial"]
    tr = trace_multimap(AlgebraShape((2,)), int(params.get("k", 3)))
    rep = test_tracial(tr, trials=min(trials, 100), seed=seed)
    observed = "tracial" if rep.residual <= 1e-12 else "not_tracial"
    return _verdict_report(case, observed, rep.residual, seed)


def _norm_map_case(params, seed, trials):
    case = _CASES["operator_norm_not_3_positive"]
    try:
        operator_norm_map(AlgebraShape((2,)), claim_n_positive=3)
        return _verdict_report(case, "accepted", 0.0, seed)
    except RegistrationError:
        return _verdict_report(case, "rejected", 0.0, seed)


# ---------------------------------------------------------------------------
# Entrywise power thresholds
# ---------------------------------------------------------------------------


def _fitzgerald_probes(size: int) -> list[np.ndarray]:
    # rank-perturbed all-ones matrices stress non-integer entrywise powers;
    # the strictly positive ones also witness negative powers
    theta = np.arange(size, dtype=float)
    probes = [np.ones((size, size)) + np.eye(size)]
    for eps in (0.5, 0.1, 0.05, 0.01, 0.005, 0.001):
        probes.append(np.ones((size, size)) + eps * np.outer(theta, theta))
    return probes


def _hadamard_case(params, seed, trials):
    case = _CASES["hadamard_power_threshold"]
    m = int(params.get("m", 3))
    n = int(params.get("n", 1))
    alpha = float(params.get("alpha", 0.5))
    hp = hadamard_power_multimap(m, (alpha,))
    size = n * m
    threshold = n * m - 2
    expected = "exhausted_trials" if alpha >= threshold else "violated"
    amp_shape = AlgebraShape((size,))

    def check(mat: np.ndarray):
        elem = Element(amp_shape, [mat])
        ok_in, _ = is_positive(elem)
        if not ok_in:
            return None
        out = amplify_type2(hp, n, (elem,))
        ok, min_eig = is_positive(out)
        return None if ok else (elem, min_eig)

    for probe in _fitzgerald_probes(size):
        hit = check(probe)
        if hit is not None:
            elem, min_eig = hit
            return _verdict_report(
                case, "violated", min_eig, seed,
                witness=[element_to_json(elem)],
                extra={"expected_for": {"m": m, "n": n, "alpha": alpha, "threshold": threshold}},
            )

    worst = np.inf
    populations = {"real_symmetric": np.inf, "complex_hermitian": np.inf}
    for t in range(trials):
        rng = rng_for_trial(seed, t)
        g = rng.standard_normal((size, size))
        if t % 2 == 0:
            mat = g @ g.T
            key = "real_symmetric"
        else:
            g = g + 1j * rng.standard_normal((size, size))
            mat = (g @ g.conj().T).astype(complex)
            key = "complex_hermitian"
        mat = mat / np.linalg.norm(mat, 2)
        hit = check(mat)
        if hit is not None:
            elem, min_eig = hit
            return _verdict_report(
                case, "violated", min_eig, seed,
                witness=[element_to_json(elem)],
                extra={"population": key,
                       "expected_for": {"m": m, "n": n, "alpha": alpha, "threshold": threshold}},
            )
        out = amplify_type2(hp, n, (Element(amp_shape, [mat]),))
        _, min_eig = is_positive(out)
        worst = min(worst, min_eig)
        populations[key] = min(populations[key], min_eig)
    return _verdict_report(
        case, "exhausted_trials", worst, seed,
        extra={"per_population_min_eig": populations,
               "expected_for": {"m": m, "n": n, "alpha": alpha, "threshold": threshold}},
    )


def _conjugate_power_case(params, seed, trials):
    case = _CASES["conjugate_power"]
    m = int(params.get("m", 2))
    n = int(params.get("n", 2))
    alphas = tuple(params.get("alphas", (2.0, 3.0)))
    cp = conjugate_power_multimap(m, alphas)
    rep = test_positive(cp, Notion("type2", n), trials=trials, seed=seed)
    return _verdict_report(case, rep.verdict, rep.min_eig, seed)


# ---------------------------------------------------------------------------
# The function-algebra counterexample
# ---------------------------------------------------------------------------


def _c01_case(params, seed, trials):
    case = _CASES["c01_hadamard_type1"]
    points = int(params.get("points", 32))
    xs = np.linspace(0.0, 1.0, points)
    shape = AlgebraShape((2,) * points)
    sm = schur_multimap(shape, 4)

    def fn_matrix(entries: Callable[[float], np.ndarray]) -> Element:
        return Element(shape, [entries(x) for x in xs])

    a1 = fn_matrix(lambda x: np.array([[x, x], [1.0, 0.0]]))
    ones = fn_matrix(lambda x: np.ones((2, 2)))
    a4 = fn_matrix(lambda x: np.array([[x, 1.0], [x, 0.0]]))
    witness = (a1, ones, ones, a4)
    # mirrored tuple: (A1, A2, A3, A4) = (A4*, A3*, A2*, A1*)
    from .algebra import adjoint

    assert norm(subtract(a1, adjoint(a4))) == 0.0
    out = amplify_type1(sm, 1, witness)
    ok, min_eig = is_positive(out)
    observed = "violated" if not ok else "exhausted_trials"
    return _verdict_report(
        case, observed, min_eig, seed,
        witness=[element_to_json(w) for w in witness],
    )


# ---------------------------------------------------------------------------
# Catalog
# ---------------------------------------------------------------------------


_CASES: dict[str, CaseRecord] = {}


def _register(case: CaseRecord):
    _CASES[case.id] = case


_register(CaseRecord(
    id="theta_transpose_tensor",
    description="transpose-tensor bilinear map on M2: positive but its "
                "order-2 entrywise amplification fails on the matrix-unit "
                "block witness",
    expected="violated",
    runner=_theta_case,
))
_register(CaseRecord(
    id="projection_Lambda",
    description="drop-last-slot multimap (even k): entrywise-CP yet not "
                "positive for the contracted amplification; witness "
                "(-I, I, ..., I, -I)",
    expected="violated",
    runner=_projection_case,
    defaults={"k": 4},
))
_register(CaseRecord(
    id="product_Pi_type1_cp",
    description="k-fold product map: positive for the contracted "
                "amplification at every tested order",
    expected="exhausted_trials",
    runner=_product_type1_case,
    defaults={"k": 2, "n": 3},
))
_register(CaseRecord(
    id="product_Pi_type2_noncommutative",
    description="product map on noncommutative M2 fails entrywise "
                "positivity already at order 1",
    expected="violated",
    runner=_product_type2_case,
    defaults={"k": 2},
))
_register(CaseRecord(
    id="product_Pi_commutative_cp",
    description="product map on a commutative diagonal algebra is "
                "entrywise completely positive",
    expected="exhausted_trials",
    runner=_product_commutative_case,
    defaults={"k": 2, "points": 3},
))
_register(CaseRecord(
    id="hadamard_power_threshold",
    description="entrywise |x|^alpha on M_m is order-n positive iff "
                "alpha >= n*m - 2; below threshold a witness is found by "
                "deterministic probes or sampling (both real-symmetric and "
                "complex-Hermitian populations)",
    expected="violated",
    runner=_hadamard_case,
    defaults={"m": 3, "n": 1, "alpha": 0.5},
))
_register(CaseRecord(
    id="conjugate_power",
    description="entrywise squared-modulus powers composed by Schur "
                "products stay order-n positive at or above the threshold",
    expected="exhausted_trials",
    runner=_conjugate_power_case,
    defaults={"m": 2, "n": 2, "alphas": (2.0, 3.0)},
))
_register(CaseRecord(
    id="c01_hadamard_type1",
    description="slotwise Schur product over a sampled function algebra: "
                "entrywise-CP but the contracted amplification fails on a "
                "function-valued mirrored tuple",
    expected="violated",
    runner=_c01_case,
    defaults={"points": 32},
))
_register(CaseRecord(
    id="tensor_map_cp",
    description="tensor-product bilinear map is entrywise completely "
                "positive",
    expected="exhausted_trials",
    runner=_tensor_case,
))
_register(CaseRecord(
    id="trace_multimap_tracial",
    description="product-of-traces multimap is tracial to machine precision",
    expected="tracial",
    runner=_trace_case,
    defaults={"k": 3},
))
_register(CaseRecord(
    id="operator_norm_not_3_positive",
    description="the operator norm is 2-positive but registering a "
                "3-positivity claim fails the superadditivity spot check",
    expected="rejected",
    runner=_norm_map_case,
))


def list_cases() -> list[dict]:
    """Catalog of registered cases, ordered by id."""
    return [
        {
            "id": c.id,
            "description": c.description,
            "expected": c.expected,
            "defaults": dict(c.defaults),
        }
        for c in sorted(_CASES.values(), key=lambda c: c.id)
    ]


def run_case(case_id: str, params: dict | None = None, seed: int = 0xC5A1,
             trials: int = 1000) -> dict:
    """Execute one case; raises ``KeyError`` for unknown ids."""
    if case_id not in _CASES:
        raise KeyError(f"unknown case {case_id!r}")
    case = _CASES[case_id]
    merged = dict(case.defaults)
    merged.update(params or {})
    return case.runner(merged, seed, trials)


def reproduce_all(seed: int = 0xC5A1, trials: int = 1000) -> tuple[list[dict], bool]:
    """Run every case with default parameters; ok iff all verdicts match."""
    rows = [run_case(cid, seed=seed, trials=trials) for cid in sorted(_CASES)]
    return rows, all(r["matches"] for r in rows)
