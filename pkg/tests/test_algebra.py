import json

import numpy as np
import pytest

from opmap.algebra import (
    AlgebraShape,
    Element,
    ToleranceConfig,
    add,
    adjoint,
    anticommutator,
    block_matrix,
    block_positive_2x2,
    center_valued_trace,
    commutator,
    element_from_json,
    element_to_json,
    identity,
    is_positive,
    multiply,
    norm,
    scale,
    schur,
    smallest_disk_radius,
    subtract,
    tensor,
    zero,
)
from opmap.sampling import ginibre_matrix, random_hermitian, random_psd

M2 = AlgebraShape((2,))
M23 = AlgebraShape((2, 3))


def elem(*mats):
    return Element(AlgebraShape(tuple(m.shape[0] for m in mats)), list(mats))


def unit_matrix(d, i, j):
    m = np.zeros((d, d))
    m[i, j] = 1.0
    return m


class TestArithmetic:
    def test_unit_law(self):
        rng = np.random.default_rng(0)
        x = Element(M23, [ginibre_matrix(rng, 2), ginibre_matrix(rng, 3)])
        assert norm(subtract(multiply(identity(M23), x), x)) == 0.0

    def test_adjoint_of_hermitian(self):
        rng = np.random.default_rng(1)
        h = random_hermitian(rng, M23)
        assert norm(subtract(adjoint(h), h)) < 1e-15

    def test_blockwise_product(self):
        rng = np.random.default_rng(2)
        a = Element(M23, [ginibre_matrix(rng, 2), ginibre_matrix(rng, 3)])
        b = Element(M23, [ginibre_matrix(rng, 2), ginibre_matrix(rng, 3)])
        prod = multiply(a, b)
        assert np.allclose(prod.blocks[0], a.blocks[0] @ b.blocks[0])
        assert np.allclose(prod.blocks[1], a.blocks[1] @ b.blocks[1])

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            multiply(identity(M2), identity(M23))

    def test_cstar_identity(self):
        for seed in range(50):
            rng = np.random.default_rng(seed)
            x = Element(M23, [ginibre_matrix(rng, 2), ginibre_matrix(rng, 3)])
            lhs = norm(multiply(adjoint(x), x))
            rhs = norm(x) ** 2
            assert abs(lhs - rhs) <= 1e-10 * rhs

    def test_immutability(self):
        x = identity(M2)
        with pytest.raises(AttributeError):
            x.shape = M23
        with pytest.raises(ValueError):
            x.blocks[0][0, 0] = 5.0


class TestPositivity:
    def test_identity(self):
        ok, min_eig = is_positive(identity(M23))
        assert ok and abs(min_eig - 1.0) < 1e-14

    def test_indefinite_diagonal(self):
        ok, min_eig = is_positive(elem(np.diag([1.0, -1.0])))
        assert not ok and abs(min_eig + 1.0) < 1e-14

    def test_gram_is_psd(self):
        tol = ToleranceConfig()
        for seed in range(200):
            rng = np.random.default_rng(seed)
            g = ginibre_matrix(rng, 3)
            ok, min_eig = is_positive(elem(g @ g.conj().T), tol)
            assert ok
            assert min_eig >= -tol.psd_tol * (1 + norm(elem(g @ g.conj().T)))

    def test_non_hermitian_is_negative_verdict(self):
        x = elem(np.array([[1.0, 1.0], [0.0, 1.0]]))
        ok, _ = is_positive(x)
        assert not ok


class TestBlockPositive2x2:
    def test_all_identity(self):
        i = identity(M2)
        assert block_positive_2x2(i, i, i)

    def test_vanishing_corner(self):
        # positivity of [[A, X], [X*, 0]] forces X = 0
        i = identity(M2)
        assert not block_positive_2x2(i, i, zero(M2))

    def test_gram_factorization(self):
        for seed in range(100):
            rng = np.random.default_rng(seed)
            g = Element(M23, [ginibre_matrix(rng, 2), ginibre_matrix(rng, 3)])
            gg = multiply(g, adjoint(g))
            assert block_positive_2x2(gg, g, identity(M23))

    def test_rejects_non_hermitian_corner(self):
        rng = np.random.default_rng(7)
        g = Element(M2, [ginibre_matrix(rng, 2)])
        with pytest.raises(ValueError):
            block_positive_2x2(g, g, identity(M2))


class TestTensor:
    def test_identity(self):
        t = tensor(identity(M2), identity(M23))
        assert t.shape.block_dims == (4, 6)
        assert norm(subtract(t, identity(t.shape))) == 0.0

    def test_matrix_units(self):
        e11 = elem(unit_matrix(2, 0, 0))
        t = tensor(e11, e11)
        expected = np.zeros((4, 4))
        expected[0, 0] = 1.0
        assert np.allclose(t.blocks[0], expected)

    def test_kronecker_identity(self):
        # (X (x) I)(I (x) Y) = X (x) Y
        for seed in range(200):
            rng = np.random.default_rng(seed)
            x = Element(M2, [ginibre_matrix(rng, 2)])
            y = Element(AlgebraShape((3,)), [ginibre_matrix(rng, 3)])
            lhs = multiply(
                tensor(x, identity(y.shape)), tensor(identity(M2), y)
            )
            assert norm(subtract(lhs, tensor(x, y))) < 1e-12

    def test_psd_tensor_psd(self):
        for seed in range(50):
            rng = np.random.default_rng(seed)
            p = random_psd(rng, M2)
            q = random_psd(rng, M23)
            ok, _ = is_positive(tensor(p, q))
            assert ok


class TestSchur:
    def test_ones_is_unit(self):
        rng = np.random.default_rng(3)
        x = Element(M2, [ginibre_matrix(rng, 2)])
        ones = elem(np.ones((2, 2)))
        assert norm(subtract(schur(x, ones), x)) == 0.0

    def test_schur_product_theorem(self):
        for seed in range(100):
            rng = np.random.default_rng(seed)
            p = random_psd(rng, AlgebraShape((4,)))
            q = random_psd(rng, AlgebraShape((4,)))
            ok, _ = is_positive(schur(p, q))
            assert ok

    def test_disjoint_supports(self):
        e12 = elem(unit_matrix(2, 0, 1))
        e21 = elem(unit_matrix(2, 1, 0))
        assert norm(schur(e12, e21)) == 0.0


class TestCommutators:
    def test_self_commutator(self):
        rng = np.random.default_rng(4)
        a = Element(M23, [ginibre_matrix(rng, 2), ginibre_matrix(rng, 3)])
        assert norm(commutator(a, a)) < 1e-14

    def test_matrix_units(self):
        e11 = elem(unit_matrix(2, 0, 0))
        e12 = elem(unit_matrix(2, 0, 1))
        assert norm(subtract(commutator(e11, e12), e12)) < 1e-15

    def test_pauli_anticommutator(self):
        sx = elem(np.array([[0, 1], [1, 0]], dtype=complex))
        sy = elem(np.array([[0, -1j], [1j, 0]]))
        assert norm(anticommutator(sx, sy)) < 1e-15


class TestCenterValuedTrace:
    def test_identity(self):
        assert norm(subtract(center_valued_trace(identity(M23)), identity(M23))) == 0.0

    def test_single_unit(self):
        e11 = elem(unit_matrix(2, 0, 0))
        assert np.allclose(center_valued_trace(e11).blocks[0], 0.5 * np.eye(2))

    def test_tracial_identity(self):
        for seed in range(500):
            rng = np.random.default_rng(seed)
            a = Element(M23, [ginibre_matrix(rng, 2), ginibre_matrix(rng, 3)])
            b = Element(M23, [ginibre_matrix(rng, 2), ginibre_matrix(rng, 3)])
            resid = norm(
                subtract(
                    center_valued_trace(multiply(a, b)),
                    center_valued_trace(multiply(b, a)),
                )
            )
            assert resid <= 1e-12

    def test_projection_properties(self):
        rng = np.random.default_rng(5)
        a = Element(M23, [ginibre_matrix(rng, 2), ginibre_matrix(rng, 3)])
        ct = center_valued_trace(a)
        # idempotent
        assert norm(subtract(center_valued_trace(ct), ct)) <= 1e-12
        # commutes with everything of the same shape
        b = Element(M23, [ginibre_matrix(rng, 2), ginibre_matrix(rng, 3)])
        assert norm(commutator(ct, b)) <= 1e-12 * (1 + norm(ct)) * (1 + norm(b))
        # positive and unital
        p = random_psd(rng, M23)
        ok, _ = is_positive(center_valued_trace(p))
        assert ok


class TestSmallestDisk:
    def test_two_point_spectrum(self):
        assert abs(smallest_disk_radius(elem(np.diag([0.0, 1.0]))) - 0.5) < 1e-14

    def test_identity(self):
        assert smallest_disk_radius(identity(M23)) < 1e-14

    def test_hermitian_equals_half_spread(self):
        for seed in range(100):
            rng = np.random.default_rng(seed)
            h = random_hermitian(rng, M23)
            eigs = np.concatenate([np.linalg.eigvalsh(b) for b in h.blocks])
            expected = (eigs.max() - eigs.min()) / 2.0
            assert abs(smallest_disk_radius(h) - expected) <= 1e-10

    def test_grid_search_oracle(self):
        for seed in range(20):
            rng = np.random.default_rng(seed)
            h = random_hermitian(rng, AlgebraShape((4,)))
            eigs = np.linalg.eigvalsh(h.blocks[0])
            grid = np.linspace(eigs.min(), eigs.max(), 2_000_001)
            g = np.maximum(eigs.max() - grid, grid - eigs.min())
            assert abs(smallest_disk_radius(h) - g.min()) <= 1e-6

    def test_non_normal_rejected(self):
        with pytest.raises(ValueError):
            smallest_disk_radius(elem(np.array([[0.0, 1.0], [0.0, 0.0]])))


class TestBlockMatrix:
    def test_singleton(self):
        rng = np.random.default_rng(6)
        x = Element(M23, [ginibre_matrix(rng, 2), ginibre_matrix(rng, 3)])
        y = block_matrix([[x]])
        assert y.shape == M23
        assert norm(subtract(x, y)) == 0.0

    def test_scalar_identity(self):
        one = elem(np.array([[1.0]]))
        z = elem(np.array([[0.0]]))
        m = block_matrix([[one, z], [z, one]])
        assert np.allclose(m.blocks[0], np.eye(2))

    def test_cross_check_with_2x2(self):
        for seed in range(200):
            rng = np.random.default_rng(seed)
            a = random_psd(rng, M2)
            b = random_psd(rng, M2)
            g = Element(M2, [ginibre_matrix(rng, 2)])
            x = scale(0.3, g)
            assembled = block_matrix([[a, x], [adjoint(x), b]])
            ok_direct, _ = is_positive(assembled)
            assert ok_direct == block_positive_2x2(a, x, b)


class TestSerialization:
    def test_roundtrip(self):
        rng = np.random.default_rng(8)
        x = Element(M23, [ginibre_matrix(rng, 2), ginibre_matrix(rng, 3)])
        obj = element_to_json(x)
        text = json.dumps(obj)
        y = element_from_json(json.loads(text))
        assert norm(subtract(x, y)) == 0.0

    def test_rejects_ragged(self):
        bad = {"shape": [2], "blocks": [[[[1.0, 0.0]], [[0.0, 0.0], [1.0, 0.0]]]]}
        with pytest.raises(ValueError):
            element_from_json(bad)

    def test_rejects_block_count_mismatch(self):
        good = element_to_json(identity(M2))
        good["shape"] = [2, 2]
        with pytest.raises(ValueError):
            element_from_json(good)

    def test_rejects_bad_entries(self):
        bad = {"shape": [1], "blocks": [[[[1.0]]]]}
        with pytest.raises(ValueError):
            element_from_json(bad)


def test_add_scale_algebra():
    rng = np.random.default_rng(9)
    x = random_hermitian(rng, M23)
    y = random_hermitian(rng, M23)
    assert norm(subtract(add(x, y), add(y, x))) == 0.0
    assert norm(subtract(scale(2.0, x), add(x, x))) < 1e-15
