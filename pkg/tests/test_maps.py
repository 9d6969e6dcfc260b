import numpy as np
import pytest

from opmap.algebra import (
    AlgebraShape,
    Element,
    adjoint,
    identity,
    is_positive,
    multiply,
    norm,
    scale,
    subtract,
)
from opmap.builders import (
    hadamard_power_map,
    kraus_map,
    operator_norm_map,
    product_map,
    projection_multimap,
    random_center_poly_map,
    random_cp_multilinear,
    random_hermitian_preserving_linear,
    random_kraus_map,
    random_tracial_linear,
    state_functional,
    tensor_map,
    trace_multimap,
    transpose_map,
    transpose_tensor_map,
)
from opmap.maps import (
    Notion,
    RegistrationError,
    amplify_type1,
    amplify_type2,
    choi_matrix,
    evaluate,
    is_completely_positive_exact,
    register_map,
    replay_witness,
    split_amplified,
)
from opmap.maps import test_choi_inequality as run_choi_inequality
from opmap.maps import test_positive as run_positive
from opmap.maps import test_superadditive as run_superadditive
from opmap.maps import test_tracial as run_tracial
from opmap.sampling import ginibre_matrix, random_psd, random_unitary

M2 = AlgebraShape((2,))
M3 = AlgebraShape((3,))


class TestEvaluate:
    def test_product_at_identities(self):
        pm = product_map(M2, 3)
        out = evaluate(pm, pm.identity_args())
        assert norm(subtract(out, identity(M2))) == 0.0

    def test_tensor_at_matrix_units(self):
        tm = tensor_map([2, 2])
        e11 = Element(M2, [np.array([[1.0, 0], [0, 0]])])
        out = evaluate(tm, (e11, e11))
        expected = np.zeros((4, 4))
        expected[0, 0] = 1.0
        assert np.allclose(out.blocks[0], expected)

    def test_trace_multimap_at_identities(self):
        for k in (1, 2, 3):
            tr = trace_multimap(M2, k)
            out = evaluate(tr, tr.identity_args())
            assert abs(out.blocks[0][0, 0] - 2.0**k) < 1e-12

    def test_arity_mismatch(self):
        pm = product_map(M2, 2)
        with pytest.raises(ValueError):
            evaluate(pm, (identity(M2),))


class TestAmplifications:
    def test_type2_order_one_is_evaluate(self):
        pm = product_map(M2, 2)
        rng = np.random.default_rng(0)
        a = Element(M2, [ginibre_matrix(rng, 2)])
        b = Element(M2, [ginibre_matrix(rng, 2)])
        out = amplify_type2(pm, 1, (a, b))
        assert norm(subtract(out, evaluate(pm, (a, b)))) == 0.0

    def test_identity_map_amplifies_to_identity(self):
        idm = kraus_map([np.eye(2)])
        out = amplify_type2(idm, 2, (identity(AlgebraShape((4,))),))
        assert norm(subtract(out, identity(AlgebraShape((4,))))) == 0.0

    def test_hadamard_amplification_is_entrywise(self):
        hp = hadamard_power_map(2, 1.7)
        rng = np.random.default_rng(1)
        big = random_psd(rng, AlgebraShape((4,)))
        out = amplify_type2(hp, 2, (big,))
        assert np.allclose(out.blocks[0], np.abs(big.blocks[0]) ** 1.7)

    def test_type1_reduces_to_type2_for_unary(self):
        t = transpose_map(2)
        rng = np.random.default_rng(2)
        x = Element(AlgebraShape((4,)), [ginibre_matrix(rng, 4)])
        assert (
            norm(subtract(amplify_type1(t, 2, (x,)), amplify_type2(t, 2, (x,))))
            < 1e-14
        )

    def test_type1_product_is_matrix_product(self):
        pm = product_map(M2, 2)
        rng = np.random.default_rng(3)
        big = AlgebraShape((6,))
        a = Element(big, [ginibre_matrix(rng, 6)])
        b = Element(big, [ginibre_matrix(rng, 6)])
        out = amplify_type1(pm, 3, (a, b))
        assert norm(subtract(out, multiply(a, b))) < 1e-12

    def test_theta_witness_not_psd(self):
        theta = transpose_tensor_map()
        e = np.zeros((4, 4), dtype=complex)
        for i in range(2):
            for j in range(2):
                e[2 * i : 2 * i + 2, 2 * j : 2 * j + 2] = np.outer(
                    np.eye(2)[i], np.eye(2)[j]
                )
        witness = Element(AlgebraShape((4,)), [e])
        ok_in, _ = is_positive(witness)
        assert ok_in
        ok, min_eig = is_positive(amplify_type2(theta, 2, (witness, witness)))
        assert not ok and min_eig < -0.5

    def test_split_roundtrip(self):
        rng = np.random.default_rng(4)
        x = Element(AlgebraShape((4, 6)), [ginibre_matrix(rng, 4), ginibre_matrix(rng, 6)])
        sub = split_amplified(x, 2)
        from opmap.algebra import block_matrix

        assert norm(subtract(block_matrix(sub), x)) == 0.0

    def test_type1_heterogeneous_rejected(self):
        tm = tensor_map([2, 3])
        with pytest.raises(ValueError):
            amplify_type1(tm, 1, tm.identity_args())


class TestChoi:
    def test_kraus_choi_psd(self):
        for seed in range(30):
            md = random_kraus_map(seed, 3, count=4)
            ok, min_eig = is_completely_positive_exact(choi_matrix(md))
            assert ok and min_eig >= -1e-10

    def test_transpose_spectrum(self):
        ch = choi_matrix(transpose_map(2))
        eigs = np.linalg.eigvalsh(ch.matrix)
        assert np.allclose(sorted(eigs), [-1.0, 1.0, 1.0, 1.0], atol=1e-10)

    def test_identity_choi_is_entangled_projector(self):
        for d in (2, 3):
            ch = choi_matrix(kraus_map([np.eye(d)]))
            eigs = np.linalg.eigvalsh(ch.matrix)
            assert abs(eigs[-1] - d) < 1e-10
            assert abs(eigs[0]) < 1e-12
            assert np.sum(eigs > 1e-8) == 1  # rank one

    def test_multiblock_domain_rejected(self):
        md = random_tracial_linear(0, AlgebraShape((2, 2)), M2)
        with pytest.raises(ValueError):
            choi_matrix(md)


class TestPositiveTester:
    def test_commutative_product_exhausts(self):
        pm = product_map(AlgebraShape((1, 1, 1)), 2)
        rep = run_positive(pm, Notion("type2", 3), trials=200, seed=5)
        assert rep.verdict == "exhausted_trials"

    def test_noncommutative_product_violated(self):
        pm = product_map(M2, 2)
        rep = run_positive(pm, Notion("type2", 1), trials=1000, seed=5)
        assert rep.verdict == "violated"
        assert rep.witness is not None
        assert replay_witness(pm, rep) == rep.min_eig

    def test_projection_type1_violated(self):
        lam = projection_multimap(M2, 4)
        rep = run_positive(lam, Notion("type1", 1), trials=500, seed=5)
        assert rep.verdict == "violated"
        assert replay_witness(lam, rep) == rep.min_eig

    def test_product_type1_positive(self):
        pm = product_map(M2, 2)
        for n in (1, 2, 3):
            rep = run_positive(pm, Notion("type1", n), trials=100, seed=5)
            assert rep.verdict == "exhausted_trials"

    def test_choi_upgrade_certifies(self):
        md = random_kraus_map(3, 2, count=3)
        rep = run_positive(md, Notion("type2", 2), trials=10, seed=5)
        assert rep.verdict == "certified_positive"
        assert rep.notion == "choi_exact"

    def test_choi_upgrade_refutes_with_witness(self):
        t = transpose_map(2)
        rep = run_positive(t, Notion("type2", 2), trials=10, seed=5)
        assert rep.verdict == "violated"
        assert abs(rep.min_eig + 1.0) < 1e-10
        assert replay_witness(t, rep) == pytest.approx(rep.min_eig, abs=1e-10)

    def test_exactness_bridge(self):
        # sampling never contradicts the exact certificate
        for seed in range(25):
            md = random_hermitian_preserving_linear(seed, 3)
            ok, choi_min = is_completely_positive_exact(choi_matrix(md))
            rep = run_positive(
                md, Notion("type2", 3), trials=300, seed=seed, exact_upgrade=False
            )
            if rep.verdict == "violated":
                assert choi_min < 0
            if ok:
                assert rep.verdict == "exhausted_trials"

    def test_invalid_order(self):
        with pytest.raises(ValueError):
            Notion("type2", 0)


class TestTracialTester:
    def test_trace_multimap(self):
        tr = trace_multimap(M2, 3)
        rep = run_tracial(tr, trials=30, seed=1)
        assert rep.tracial and rep.residual <= 1e-12

    def test_unitary_conjugation_not_tracial(self):
        rng = np.random.default_rng(10)
        u = random_unitary(rng, 2)
        md = register_map(
            1, (M2,), M2, "linear",
            lambda a: Element(M2, [u @ a.blocks[0] @ u.conj().T]),
            flags=["positive", "completely_positive", "unital"],
        )
        rep = run_tracial(md, trials=30, seed=1)
        assert not rep.tracial and rep.residual > 1e-3

    def test_commutative_domain_residual_zero(self):
        pm = product_map(AlgebraShape((1, 1)), 2)
        rep = run_tracial(pm, trials=20, seed=1)
        assert rep.residual == 0.0


class TestChoiInequality:
    def test_state_functional(self):
        rng = np.random.default_rng(11)
        rho = scale(0.5, random_psd(rng, M2))
        rho = scale(1.0 / (np.trace(rho.blocks[0]).real), rho)
        st = state_functional(rho)
        rep = run_choi_inequality(st, trials=100, seed=2, population="arbitrary")
        assert rep.verdict == "exhausted_trials"
        assert rep.min_eig >= -1e-12

    def test_cp_multilinear_normal_inputs(self):
        md = random_cp_multilinear(4, (M2, M2), codomain_dim=2, unital=True)
        rep = run_choi_inequality(md, trials=200, seed=3, population="normal")
        assert rep.verdict == "exhausted_trials"
        assert rep.min_eig >= -1e-9

    def test_transpose_violates_on_arbitrary(self):
        t = transpose_map(2)
        rep = run_choi_inequality(t, trials=500, seed=4, population="arbitrary")
        assert rep.verdict == "violated"
        assert replay_witness(t, rep) == rep.min_eig

    def test_requires_unital(self):
        md = random_kraus_map(6, 2, count=2, unital=False)
        with pytest.raises(ValueError):
            run_choi_inequality(md, trials=5)


class TestSuperadditive:
    def test_linear_map_difference_vanishes(self):
        md = random_kraus_map(7, 2, count=2)
        rep = run_superadditive(md, trials=50, seed=5)
        assert rep.verdict == "exhausted_trials"
        assert abs(rep.min_eig) <= 1e-10

    def test_center_poly_superadditive(self):
        md = random_center_poly_map(8, M2, M2, degree=2, terms=2)
        rep = run_superadditive(md, trials=100, seed=6)
        assert rep.verdict == "exhausted_trials"
        assert rep.min_eig >= -1e-9

    def test_refuses_without_claim(self):
        t = transpose_map(2)
        with pytest.raises(ValueError):
            run_superadditive(t, trials=5)

    def test_norm_map_claim_rejected_at_registration(self):
        with pytest.raises(RegistrationError):
            operator_norm_map(M2, claim_n_positive=3)
        md = operator_norm_map(M2, claim_n_positive=2)
        assert md.n_positive == 2


class TestGenerators:
    def test_tracial_linear_is_tracial(self):
        for seed in range(20):
            md = random_tracial_linear(seed, AlgebraShape((2, 3)), M2)
            rep = run_tracial(md, trials=10, seed=seed)
            assert rep.residual <= 1e-12

    def test_cp_multilinear_positive(self):
        md = random_cp_multilinear(9, (M2, M2), codomain_dim=3)
        rep = run_positive(md, Notion("type2", 2), trials=100, seed=7)
        assert rep.verdict == "exhausted_trials"
        assert rep.min_eig >= -1e-10

    def test_kraus_unitality_criterion(self):
        md = random_kraus_map(10, 3, count=3, unital=True)
        assert md.is_unital()
        out = evaluate(md, md.identity_args())
        assert norm(subtract(out, identity(md.codomain_shape))) <= 1e-10
        md2 = random_kraus_map(10, 3, count=3, unital=False)
        assert not md2.is_unital()


class TestStructuralInvariants:
    def test_positive_multilinear_self_adjoint(self):
        md = random_cp_multilinear(12, (M2, M3), codomain_dim=2)
        rng = np.random.default_rng(13)
        for _ in range(50):
            args = (
                Element(M2, [ginibre_matrix(rng, 2)]),
                Element(M3, [ginibre_matrix(rng, 3)]),
            )
            lhs = evaluate(md, tuple(adjoint(a) for a in args))
            rhs = adjoint(evaluate(md, args))
            assert norm(subtract(lhs, rhs)) <= 1e-9 * (1 + norm(rhs))

    def test_monotonicity_of_cp_maps(self):
        md = random_kraus_map(14, 3, count=3)
        rng = np.random.default_rng(15)
        for _ in range(50):
            b = random_psd(rng, M3)
            a = b + random_psd(rng, M3)
            diff = subtract(evaluate(md, (a,)), evaluate(md, (b,)))
            ok, _ = is_positive(diff)
            assert ok

    def test_registration_rejects_false_linearity(self):
        with pytest.raises(RegistrationError):
            register_map(
                1, (M2,), M2, "linear",
                lambda a: multiply(a, a),
            )

    def test_registration_rejects_false_traciality(self):
        rng = np.random.default_rng(16)
        u = random_unitary(rng, 2)
        with pytest.raises(RegistrationError):
            register_map(
                1, (M2,), M2, "linear",
                lambda a: Element(M2, [u @ a.blocks[0] @ u.conj().T]),
                flags=["tracial"],
            )

    def test_report_json_roundtrip(self):
        pm = product_map(M2, 2)
        rep = run_positive(pm, Notion("type2", 1), trials=50, seed=8)
        from opmap.maps import PositivityReport

        again = PositivityReport.from_json(rep.to_json())
        assert again == rep

    def test_thread_count_is_immaterial(self):
        pm = product_map(M2, 2)
        rep1 = run_positive(pm, Notion("type2", 1), trials=64, seed=9, threads=1)
        rep8 = run_positive(pm, Notion("type2", 1), trials=64, seed=9, threads=8)
        assert rep1 == rep8
        km = random_kraus_map(11, 2, count=2)
        rep1 = run_positive(km, Notion("type2", 1), trials=64, seed=9, threads=1)
        rep8 = run_positive(km, Notion("type2", 1), trials=64, seed=9, threads=8)
        assert rep1 == rep8
