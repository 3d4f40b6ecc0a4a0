import numpy as np
import pytest

from gibbs_maxent.operators import (
    DensityOperator,
    LocalOperator,
    SiteSystem,
    embed_local,
    frobenius_norm,
    herm_fn,
    norms,
    operator_norm,
    parse_pauli,
    partial_trace,
    pauli_operator,
    product_state,
    trace_norm,
    weighted_two_norm,
)

from conftest import random_hermitian, random_state

Z = np.diag([1.0, -1.0])


def taylor_exp(H, order=30):
    out = np.eye(H.shape[0], dtype=complex)
    term = np.eye(H.shape[0], dtype=complex)
    for k in range(1, order + 1):
        term = term @ H / k
        out = out + term
    return out


class TestSiteSystem:
    def test_dimension(self):
        assert SiteSystem(3).dim == 8
        assert SiteSystem(2, d=3).dim == 9

    @pytest.mark.parametrize("n, d", [(0, 2), (2, 1)])
    def test_rejects_bad_sizes(self, n, d):
        with pytest.raises(ValueError):
            SiteSystem(n, d)

    def test_dimension_cap(self):
        with pytest.raises(ValueError):
            SiteSystem(13)
        assert SiteSystem(13, max_dim=2**13).dim == 8192


class TestPauliText:
    def test_parse_one_indexed(self):
        assert parse_pauli("Z1*Z2") == {0: "Z", 1: "Z"}
        assert parse_pauli("x3") == {2: "X"}

    def test_identity(self):
        assert parse_pauli("I") == {}

    def test_rejects_duplicate_site(self):
        with pytest.raises(ValueError):
            parse_pauli("Z1*X1")

    def test_rejects_site_zero(self):
        with pytest.raises(ValueError):
            parse_pauli("Z0")


class TestEmbedLocal:
    def test_z_on_single_site(self):
        op = LocalOperator((0,), Z)
        np.testing.assert_array_equal(embed_local(op, SiteSystem(1)), Z)

    def test_z_on_second_of_two(self):
        op = LocalOperator((1,), Z)
        np.testing.assert_array_equal(embed_local(op, SiteSystem(2)).real, np.diag([1, -1, 1, -1]))

    def test_identity(self):
        op = LocalOperator((1,), np.eye(2))
        np.testing.assert_array_equal(embed_local(op, SiteSystem(3)), np.eye(8))

    def test_reversed_support_order(self, rng):
        A = random_hermitian(rng, 2)
        B = random_hermitian(rng, 2)
        op = LocalOperator((2, 0), np.kron(A, B))
        expected = np.kron(np.kron(B, np.eye(2)), A)
        np.testing.assert_allclose(embed_local(op, SiteSystem(3)), expected, atol=1e-14)

    def test_norm_preserved(self, rng):
        M = random_hermitian(rng, 4)
        op = LocalOperator((0, 2), M)
        full = embed_local(op, SiteSystem(3))
        assert operator_norm(full) == pytest.approx(operator_norm(M), rel=1e-12)

    def test_support_out_of_range(self):
        with pytest.raises(ValueError):
            embed_local(LocalOperator((3,), Z), SiteSystem(2))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            embed_local(LocalOperator((0,), np.eye(3)), SiteSystem(2))

    def test_pauli_operator_matches_kron(self):
        X = np.array([[0, 1], [1, 0]])
        np.testing.assert_array_equal(pauli_operator("X1*Z3", SiteSystem(3)), np.kron(np.kron(X, np.eye(2)), Z))


class TestHermFn:
    def test_exp_zero(self):
        np.testing.assert_allclose(herm_fn(np.zeros((4, 4)), np.exp), np.eye(4))

    def test_exp_diagonal(self):
        np.testing.assert_allclose(herm_fn(np.diag([1.0, -1.0]), np.exp), np.diag([np.e, 1 / np.e]))

    def test_matches_taylor_series(self, rng):
        H = random_hermitian(rng, 8, scale=0.3)
        np.testing.assert_allclose(herm_fn(H, np.exp), taylor_exp(H), atol=1e-9)

    def test_unitary_covariance(self, rng):
        H = random_hermitian(rng, 8, scale=0.5)
        U, _ = np.linalg.qr(rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8)))
        np.testing.assert_allclose(herm_fn(U @ H @ U.conj().T, np.exp), U @ herm_fn(H, np.exp) @ U.conj().T,
                                   atol=1e-9)

    def test_rejects_non_hermitian(self):
        with pytest.raises(ValueError):
            herm_fn(np.array([[0, 1], [0, 0]]), np.exp)


class TestPartialTrace:
    def test_product_state(self, rng):
        rho, tau = random_state(rng, 2), random_state(rng, 2)
        np.testing.assert_allclose(partial_trace(np.kron(rho, tau), [0], SiteSystem(2)), tau, atol=1e-14)

    def test_trace_all(self, rng):
        X = random_hermitian(rng, 8)
        out = partial_trace(X, [0, 1, 2], SiteSystem(3))
        assert out.shape == (1, 1)
        assert out[0, 0] == pytest.approx(np.trace(X))

    def test_bell_state(self):
        v = np.array([1, 0, 0, 1]) / np.sqrt(2)
        np.testing.assert_allclose(partial_trace(np.outer(v, v), [1], SiteSystem(2)), np.eye(2) / 2)

    def test_inverts_embedding(self, rng):
        M = random_hermitian(rng, 4)
        system = SiteSystem(4)
        full = embed_local(LocalOperator((1, 3), M), system)
        np.testing.assert_allclose(partial_trace(full, [0, 2], system), 4 * M, atol=1e-12)

    def test_linear_and_trace_preserving(self, rng):
        A, B = random_hermitian(rng, 8), random_hermitian(rng, 8)
        system = SiteSystem(3)
        lhs = partial_trace(2 * A - B, [1], system)
        np.testing.assert_allclose(lhs, 2 * partial_trace(A, [1], system) - partial_trace(B, [1], system),
                                   atol=1e-12)
        assert np.trace(lhs) == pytest.approx(np.trace(2 * A - B))

    def test_site_out_of_range(self):
        with pytest.raises(ValueError):
            partial_trace(np.eye(4), [2], SiteSystem(2))


class TestNorms:
    def test_weighted_identity(self, rng):
        sigma = random_state(rng, 4)
        assert weighted_two_norm(np.eye(4), sigma) == pytest.approx(1.0)

    def test_weighted_z_maximally_mixed(self):
        assert weighted_two_norm(Z, np.eye(2) / 2) == pytest.approx(1.0)

    def test_trace_norm(self):
        assert trace_norm(np.diag([1.0, -2.0])) == pytest.approx(3.0)

    def test_weighted_flat_reference(self, rng):
        X = random_hermitian(rng, 8)
        assert weighted_two_norm(X, np.eye(8) / 8) == pytest.approx(frobenius_norm(X) / np.sqrt(8))

    def test_frobenius_identity(self, rng):
        X = random_hermitian(rng, 8) + 1j * random_hermitian(rng, 8)
        assert frobenius_norm(X) ** 2 == pytest.approx(np.trace(X.conj().T @ X).real)

    def test_operator_norm_is_max_abs_eigenvalue(self, rng):
        X = random_hermitian(rng, 6)
        assert operator_norm(X) == pytest.approx(np.abs(np.linalg.eigvalsh(X)).max())

    def test_singular_reference_rejected(self):
        with pytest.raises(ValueError):
            weighted_two_norm(Z, np.diag([1.0, 0.0]))

    def test_norms_bundle(self):
        out = norms(Z, np.eye(2) / 2)
        assert set(out) >= {"operator_norm", "trace_norm", "frobenius", "weighted_two_norm"}


class TestDensityOperator:
    def test_valid(self, rng):
        rho = DensityOperator(random_state(rng, 4), SiteSystem(2))
        assert np.asarray(rho).shape == (4, 4)

    def test_rejects_bad_trace(self):
        with pytest.raises(ValueError):
            DensityOperator(np.eye(2), SiteSystem(1))

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            DensityOperator(np.diag([1.5, -0.5]), SiteSystem(1))

    def test_product_state(self):
        np.testing.assert_allclose(product_state([np.diag([1.0, 0]), np.eye(2) / 2]), np.diag([0.5, 0.5, 0, 0]))
