import numpy as np
import pytest

from opmap.algebra import (
    AlgebraShape,
    Element,
    add,
    adjoint,
    identity,
    multiply,
    norm,
    scale,
    subtract,
)
from opmap.builders import (
    random_center_poly_map,
    random_kraus_map,
    random_tracial_linear,
    random_tracial_multilinear,
    trace_multimap,
)
from opmap.decomposition import (
    TracialDecomposition,
    decompose_tracial,
    decompose_tracial_nonlinear,
    extract_all_components,
    extract_homogeneous_components,
    multilinear_lift,
    tracial_linear_canonical_form,
)
from opmap.maps import MapDescriptor, Notion, evaluate
from opmap.maps import test_positive as run_positive
from opmap.maps import test_tracial as run_tracial
from opmap.sampling import random_element, random_psd

M2 = AlgebraShape((2,))
M3 = AlgebraShape((3,))
M23 = AlgebraShape((2, 3))


def poly_map(dom, fn, degree=2, flags=(), name="poly"):
    return MapDescriptor(
        1, (dom,), dom, "polynomial", fn, frozenset(flags),
        degree_bound=degree, name=name,
    )


class TestDecomposeTracial:
    def test_normalized_trace_functional(self):
        md = trace_multimap(M3, 1, normalized=True)
        dec = decompose_tracial(md, samples=20, seed=0)
        assert dec.certified and dec.residual <= 1e-12
        assert dec.phi1.is_unital() and dec.phi2.is_unital()

    def test_random_tracial_linear(self):
        for seed in range(20):
            md = random_tracial_linear(seed, M23, M2)
            dec = decompose_tracial(md, samples=20, seed=seed)
            assert dec.residual <= 1e-9

    def test_random_tracial_bilinear_and_cp(self):
        md = random_tracial_multilinear(5, (M2, M3), M2, unital=True)
        dec = decompose_tracial(md, samples=20, seed=1)
        assert dec.residual <= 1e-9
        rep = run_positive(dec.factored, Notion("type2", 3), trials=100, seed=2)
        assert rep.verdict == "exhausted_trials"
        assert rep.min_eig >= -1e-9

    def test_unitality_preserved(self):
        md = random_tracial_multilinear(7, (M2, M2), M2, unital=True)
        dec = decompose_tracial(md, samples=10, seed=3)
        assert dec.phi1.is_unital()
        out = dec.phi2.evaluator(*(identity(s) for s in dec.phi2.domain_shapes))
        assert norm(subtract(out, identity(md.codomain_shape))) <= 1e-10

    def test_idempotence(self):
        md = random_tracial_multilinear(9, (M2,), M2, unital=True)
        dec = decompose_tracial(md, samples=10, seed=4)
        again = decompose_tracial(dec.factored, samples=10, seed=5)
        assert again.residual <= 1e-9

    def test_requires_tracial_flag(self):
        md = random_kraus_map(1, 2)
        with pytest.raises(ValueError):
            decompose_tracial(md)


class TestCanonicalForm:
    def test_recovers_coefficient(self):
        md = random_tracial_linear(3, M3, M2)
        p = tracial_linear_canonical_form(md)
        # the generator is exactly tr(A) P, so P = Phi(I)/3
        expected = scale(1.0 / 3.0, evaluate(md, (identity(M3),)))
        assert norm(subtract(p, expected)) <= 1e-12

    def test_scaled_identity(self):
        dom = M2
        cod = M2

        def ev(a):
            return scale(0.5 * complex(np.trace(a.blocks[0])), identity(cod))

        md = MapDescriptor(1, (dom,), cod, "linear", ev, frozenset({"tracial"}))
        p = tracial_linear_canonical_form(md)
        assert norm(subtract(p, scale(0.5, identity(cod)))) <= 1e-12

    def test_residual_certified(self):
        for seed in range(30):
            d = 2 + seed % 3
            md = random_tracial_linear(seed, AlgebraShape((d,)), M2)
            tracial_linear_canonical_form(md, samples=20, seed=seed)

    def test_rejects_non_tracial(self):
        md = random_kraus_map(2, 2, count=3)
        with pytest.raises(ValueError):
            tracial_linear_canonical_form(md)


class TestExtraction:
    def test_sandwich_is_pure_11(self):
        rng = np.random.default_rng(0)
        x = random_psd(rng, M2)
        md = poly_map(M2, lambda a: multiply(multiply(adjoint(a), x), a))
        table = extract_homogeneous_components(md, degree=2, probes=5, seed=1)
        a = random_element(rng, M2)
        comps = extract_all_components(table, a)
        assert norm(subtract(comps[(1, 1)], evaluate(md, (a,)))) <= 1e-8
        foreign = max(norm(v) for k, v in comps.items() if k != (1, 1))
        assert foreign <= 1e-8

    def test_square_plus_sandwich_splits(self):
        md = poly_map(M2, lambda a: add(multiply(a, a), multiply(adjoint(a), a)))
        table = extract_homogeneous_components(md, degree=2, probes=5, seed=2)
        rng = np.random.default_rng(3)
        a = random_element(rng, M2)
        comps = extract_all_components(table, a)
        assert norm(subtract(comps[(2, 0)], multiply(a, a))) <= 1e-8
        assert norm(subtract(comps[(1, 1)], multiply(adjoint(a), a))) <= 1e-8
        assert norm(comps[(0, 2)]) <= 1e-8
        assert table.extraction_error <= 1e-10

    def test_base_point_component(self):
        md = poly_map(M2, lambda a: add(identity(M2), multiply(a, a)))
        table = extract_homogeneous_components(md, degree=2, probes=3, seed=3)
        assert norm(subtract(table.base_point_value, identity(M2))) == 0.0
        rng = np.random.default_rng(4)
        a = random_element(rng, M2)
        zero_comp = evaluate(table.component(0, 0), (a,))
        assert norm(subtract(zero_comp, identity(M2))) == 0.0

    def test_tracial_components_stay_tracial(self):
        md = random_center_poly_map(5, M23, M2, degree=2, terms=3)
        table = extract_homogeneous_components(md, degree=2, probes=3, seed=5)
        rep = run_tracial(table.component(1, 1), trials=10, seed=6)
        assert rep.residual <= 1e-9

    def test_homogeneity_certificate(self):
        md = random_center_poly_map(8, M2, M2, degree=2, terms=2)
        table = extract_homogeneous_components(md, degree=2, probes=3, seed=7)
        rng = np.random.default_rng(8)
        for _ in range(50):
            z = complex(rng.standard_normal(), rng.standard_normal())
            a = random_element(rng, M2)
            for (m, n), comp in table.components.items():
                if m + n == 0:
                    continue
                lhs = evaluate(comp, (scale(z, a),))
                rhs = scale((z**m) * np.conj(z) ** n, evaluate(comp, (a,)))
                assert norm(subtract(lhs, rhs)) <= 1e-8 * (1 + norm(rhs))

    def test_extraction_linearity(self):
        rng = np.random.default_rng(9)
        x = random_psd(rng, M2)
        md1 = poly_map(M2, lambda a: multiply(multiply(adjoint(a), x), a))
        md2 = poly_map(M2, lambda a: multiply(a, a))
        md_sum = poly_map(
            M2,
            lambda a: add(
                multiply(multiply(adjoint(a), x), a), multiply(a, a)
            ),
        )
        t1 = extract_homogeneous_components(md1, degree=2, probes=2, seed=10)
        t2 = extract_homogeneous_components(md2, degree=2, probes=2, seed=10)
        ts = extract_homogeneous_components(md_sum, degree=2, probes=2, seed=10)
        a = random_element(rng, M2)
        for key in ts.components:
            if key == (0, 0):
                continue
            combined = add(
                evaluate(t1.component(*key), (a,)),
                evaluate(t2.component(*key), (a,)),
            )
            assert norm(
                subtract(evaluate(ts.component(*key), (a,)), combined)
            ) <= 1e-9 * (1 + norm(combined))

    def test_ill_conditioned_radii_rejected(self):
        md = poly_map(M2, lambda a: multiply(a, a), degree=6)
        with pytest.raises(ValueError):
            extract_homogeneous_components(
                md, degree=6, radii=[1.0, 1.0 + 1e-9] + [1.0 + k * 1e-9 for k in range(2, 6)] + [2.0],
                probes=0,
            )

    def test_angular_count_validated(self):
        md = poly_map(M2, lambda a: multiply(a, a))
        with pytest.raises(ValueError):
            extract_homogeneous_components(md, degree=2, angular_count=4, probes=0)


class TestMultilinearLift:
    def test_square_polarization(self):
        md = poly_map(M2, lambda a: multiply(a, a))
        table = extract_homogeneous_components(md, degree=2, probes=2, seed=11)
        rng = np.random.default_rng(12)
        a, b = random_element(rng, M2), random_element(rng, M2)
        lift = multilinear_lift(table.component(2, 0), (a, b))
        expected = scale(0.5, add(multiply(a, b), multiply(b, a)))
        assert norm(subtract(lift, expected)) <= 1e-10

    def test_sandwich_lift(self):
        rng = np.random.default_rng(13)
        x = random_psd(rng, M2)
        md = poly_map(M2, lambda a: multiply(multiply(adjoint(a), x), a))
        table = extract_homogeneous_components(md, degree=2, probes=2, seed=14)
        a, b = random_element(rng, M2), random_element(rng, M2)
        lift = multilinear_lift(table.component(1, 1), (a, b))
        # the unique lift linear in slot 1 and conjugate-linear in slot 2
        expected = multiply(multiply(adjoint(b), x), a)
        assert norm(subtract(lift, expected)) <= 1e-10

    def test_diagonal_reproduces_component(self):
        md = random_center_poly_map(15, M2, M2, degree=3, terms=2)
        table = extract_homogeneous_components(md, degree=3, probes=2, seed=16)
        rng = np.random.default_rng(17)
        for (m, n), comp in table.components.items():
            if not (1 <= m + n <= 3):
                continue
            a = random_element(rng, M2)
            lift = multilinear_lift(comp, (a,) * (m + n))
            assert norm(subtract(lift, evaluate(comp, (a,)))) <= 1e-8

    def test_rejects_wrong_bidegree(self):
        md = MapDescriptor(
            1, (M2,), M2, "mixed_homogeneous",
            lambda a: multiply(adjoint(a), a), frozenset(), homogeneity=(2, 0),
        )
        rng = np.random.default_rng(18)
        with pytest.raises(ValueError, match="diagonal"):
            multilinear_lift(md, (random_element(rng, M2), random_element(rng, M2)))

    def test_rejects_high_degree(self):
        md = MapDescriptor(
            1, (M2,), M2, "mixed_homogeneous",
            lambda a: a, frozenset(), homogeneity=(3, 1),
        )
        rng = np.random.default_rng(19)
        with pytest.raises(ValueError, match="3"):
            multilinear_lift(md, tuple(random_element(rng, M2) for _ in range(4)))


class TestNonlinearDecomposition:
    def test_center_polynomial_family(self):
        for seed in range(10):
            md = random_center_poly_map(seed, M2, M2, degree=2, terms=3)
            dec = decompose_tracial_nonlinear(md, degree=2, samples=10, seed=seed)
            assert dec.certified and dec.residual <= 1e-9

    def test_conjugate_bilinear_trace_form(self):
        # Phi(A) = tr(A) tr(A*) P: the (1, 1) trace monomial
        rng = np.random.default_rng(20)
        p = random_psd(rng, M2)

        def ev(a):
            t = complex(np.trace(a.blocks[0])) / 2.0
            return scale(t * np.conj(t), p)

        md = MapDescriptor(
            1, (M2,), M2, "polynomial", ev,
            frozenset({"tracial", "positive", "completely_positive"}),
            degree_bound=2, name="trtr",
        )
        dec = decompose_tracial_nonlinear(md, degree=2, samples=10, seed=21)
        assert dec.certified
        table = extract_homogeneous_components(md, degree=2, probes=3, seed=22)
        a = random_element(rng, M2)
        comps = extract_all_components(table, a)
        foreign = max(norm(v) for k, v in comps.items() if k != (1, 1))
        assert foreign <= 1e-9

    def test_linear_reduces_to_linear_decomposition(self):
        md = random_tracial_linear(23, M2, M2)
        nonlinear = decompose_tracial_nonlinear(md, degree=2, samples=10, seed=24)
        linear = decompose_tracial(md, samples=10, seed=24)
        assert nonlinear.residual <= 1e-9 and linear.residual <= 1e-9

    def test_requires_cp_flag(self):
        md = MapDescriptor(
            1, (M2,), M2, "polynomial",
            lambda a: multiply(a, a), frozenset({"tracial"}),
        )
        with pytest.raises(ValueError):
            decompose_tracial_nonlinear(md)

    def test_json_shape(self):
        md = random_center_poly_map(25, M2, M2, degree=2, terms=2)
        dec = decompose_tracial_nonlinear(md, degree=2, samples=5, seed=26)
        blob = dec.to_json()
        assert blob["certified"] is True
        assert blob["phi1"]["kind"] == "center_bundle"
        assert blob["phi2"]["kind"] == "component_sum"
