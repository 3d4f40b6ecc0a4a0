import itertools
import math

import numpy as np
import pytest

from gibbs_maxent import chain as ch
from gibbs_maxent.solver import SolverOptions


def enumerate_chain(spec):
    """Brute-force probabilities and configurations."""
    configs = np.array(list(itertools.product([1, -1], repeat=spec.n)), dtype=float)
    energy = configs @ spec.h
    for i, J in enumerate(spec.J):
        energy += J * configs[:, i] * configs[:, (i + 1) % spec.n]
    logw = -spec.beta * energy
    logz = np.logaddexp.reduce(logw)
    return configs, np.exp(logw - logz), logz


def dense_kron(ops):
    out = np.eye(1)
    for o in ops:
        out = np.kron(out, o)
    return out


def dense_circuit(circuit):
    n = circuit.n
    U = np.eye(2**n, dtype=complex)
    for layer in circuit.gates:
        L = np.eye(2**n, dtype=complex)
        for j, g in sorted(layer.items()):
            L = dense_kron([np.eye(2**j), g, np.eye(2 ** (n - j - 2))]) @ L
        U = L @ U
    return U


@pytest.fixture(params=["open", "periodic"])
def boundary(request):
    return request.param


class TestSpec:
    def test_lengths_checked(self):
        with pytest.raises(ValueError):
            ch.ChainSpec(4, np.zeros(4), np.zeros(4), 1.0, "open")

    def test_range_checked(self):
        with pytest.raises(ValueError):
            ch.ChainSpec(3, [1.5, 0], np.zeros(3), 1.0)

    def test_round_trip(self, rng):
        spec = ch.random_chain(6, 0.7, rng, "periodic", fields=True)
        again = ch.ChainSpec.from_dict(spec.to_dict())
        np.testing.assert_array_equal(again.J, spec.J)
        np.testing.assert_array_equal(again.h, spec.h)
        assert again.boundary == "periodic"


class TestPartition:
    def test_free_spins(self):
        spec = ch.ChainSpec(7, np.zeros(6), np.zeros(7), 1.0)
        assert ch.chain_log_partition(spec) == pytest.approx(7 * math.log(2))

    def test_three_sites(self):
        spec = ch.ChainSpec(3, [0.5, 0.5], np.zeros(3), 1.0)
        _, _, logz = enumerate_chain(spec)
        assert ch.chain_log_partition(spec) == pytest.approx(logz, abs=1e-12)
        # closed form: independent bonds
        assert logz == pytest.approx(math.log(2 * (2 * math.cosh(0.5)) ** 2), abs=1e-12)

    def test_random_twelve(self, rng, boundary):
        spec = ch.random_chain(12, 1.3, rng, boundary, fields=True)
        assert ch.chain_log_partition(spec) == pytest.approx(enumerate_chain(spec)[2], abs=1e-10)

    def test_large_chain_finite(self, rng):
        spec = ch.random_chain(2000, 5.0, rng, fields=True)
        assert math.isfinite(ch.chain_log_partition(spec))


class TestExpectations:
    def test_symmetric_chain(self, rng):
        spec = ch.random_chain(9, 1.0, rng)
        np.testing.assert_array_equal(ch.chain_expectations(spec)["z"], 0)

    def test_against_enumeration(self, rng, boundary):
        spec = ch.random_chain(10, 1.1, rng, boundary, fields=True)
        configs, p, _ = enumerate_chain(spec)
        ex = ch.chain_expectations(spec)
        np.testing.assert_allclose(ex["z"], p @ configs, atol=1e-10)
        bonds = len(spec.J)
        zz = [p @ (configs[:, i] * configs[:, (i + 1) % spec.n]) for i in range(bonds)]
        np.testing.assert_allclose(ex["zz"], zz, atol=1e-10)

    def test_infinite_temperature(self, rng):
        spec = ch.random_chain(8, 1e-12, rng, fields=True)
        ex = ch.chain_expectations(spec)
        assert np.abs(ex["zz"]).max() < 1e-10 and np.abs(ex["z"]).max() < 1e-10

    def test_window_marginal(self, rng, boundary):
        spec = ch.random_chain(8, 0.9, rng, boundary, fields=True)
        configs, p, _ = enumerate_chain(spec)
        idx = ((1 - configs[:, 2:6]) // 2).astype(int)
        expected = np.zeros((2,) * 4)
        np.add.at(expected, tuple(idx.T), p)
        np.testing.assert_allclose(ch.window_marginal(spec, 2, 4), expected, atol=1e-12)

    def test_window_out_of_range(self, rng):
        with pytest.raises(ValueError):
            ch.window_marginal(ch.random_chain(4, 1.0, rng), 2, 3)


class TestSampling:
    def test_infinite_temperature_uniform(self, rng):
        spec = ch.random_chain(5, 0.0, rng)
        s = ch.chain_sample(spec, 10_000, 1).configurations
        assert abs((s == 1).mean() - 0.5) < 0.02

    def test_pair_correlations(self, rng, boundary):
        spec = ch.random_chain(6, 1.0, rng, boundary, fields=True)
        s = ch.chain_sample(spec, 100_000, 2).configurations.astype(float)
        exact = ch.chain_expectations(spec)["zz"]
        for i, e in enumerate(exact):
            v = s[:, i] * s[:, (i + 1) % spec.n]
            assert abs(v.mean() - e) <= 4 * v.std() / math.sqrt(len(v))

    def test_determinism(self, rng):
        spec = ch.random_chain(6, 1.0, rng)
        a = ch.chain_sample(spec, 100, 9).configurations
        np.testing.assert_array_equal(a, ch.chain_sample(spec, 100, 9).configurations)

    def test_file_round_trip(self, rng, tmp_path):
        sample = ch.chain_sample(ch.random_chain(13, 1.0, rng), 37, 4)
        ch.write_samples(tmp_path / "s.bin", sample)
        back = ch.read_samples(tmp_path / "s.bin")
        np.testing.assert_array_equal(back.configurations, sample.configurations)
        assert back.seed == 4


class TestFamily:
    def test_relative_entropy_against_enumeration(self, rng):
        fam = ch.ChainFamily(6, 0.8, "open", fields=True)
        lam, mu = rng.uniform(-1, 1, fam.m), rng.uniform(-1, 1, fam.m)
        _, p, _ = enumerate_chain(fam.spec(lam))
        _, q, _ = enumerate_chain(fam.spec(mu))
        assert fam.relative_entropy_from(lam, mu) == pytest.approx(float(p @ np.log(p / q)), abs=1e-10)
        sym = float(p @ np.log(p / q) + q @ np.log(q / p))
        assert fam.symmetric_divergence(lam, mu) == pytest.approx(sym, abs=1e-10)

    def test_bond_hessian_bound(self, rng):
        fam = ch.ChainFamily(5, 1.3, "open", fields=False)
        mu = rng.uniform(-1, 1, fam.m)
        h = 1e-5
        H = np.array([(fam.expectations(mu + h * e) - fam.expectations(mu - h * e)) / (2 * h) for e in np.eye(4)])
        H = -fam.beta * H
        assert np.linalg.eigvalsh((H + H.T) / 2)[-1] <= fam.hessian_upper_bound() + 1e-8
        np.testing.assert_allclose(H - np.diag(np.diag(H)), 0, atol=1e-8)

    def test_observables(self):
        assert ch.ChainFamily(3, 1.0, "periodic", fields=True).observables() == [
            "Z1*Z2", "Z2*Z3", "Z3*Z1", "Z1", "Z2", "Z3"]


class TestReconstruct:
    def test_round_trip_exact(self, rng):
        spec = ch.random_chain(12, 1.0, rng, fields=True)
        fam = ch.ChainFamily(12, 1.0, "open", fields=True)
        rec, res = ch.chain_maxent_reconstruct(fam.expectations(fam.params(spec)), 12, 1.0,
                                               SolverOptions(delta_mu=1e-9, trace_every=0, U=2.0), fields=True)
        assert np.abs(fam.params(rec) - fam.params(spec)).max() <= 1e-4

    def test_zero_target(self):
        rec, res = ch.chain_maxent_reconstruct(np.zeros(9 + 10), 10, 1.0, fields=True)
        assert res.n_iters == 0
        np.testing.assert_array_equal(rec.J, 0)
        np.testing.assert_array_equal(rec.h, 0)

    def test_certificate_from_standard_errors(self, rng):
        from gibbs_maxent.shadows import estimate_classical

        spec = ch.random_chain(20, 1.0, rng)
        fam = ch.ChainFamily(20, 1.0, "open", fields=False)
        rep = estimate_classical(ch.chain_sample(spec, 1000, 5).configurations, fam.observables())
        delta_mu = float(np.linalg.norm(rep.stderr))
        rec, res = ch.chain_maxent_reconstruct(rep.estimates, 20, 1.0, SolverOptions(delta_mu=delta_mu, trace_every=0),
                                               fields=False)
        assert res.certificate.d_sym_bound == pytest.approx(2 * 45 * delta_mu * math.sqrt(19))
        assert res.halting == "stopping_rule"

    def test_length_checked(self):
        with pytest.raises(ValueError):
            ch.chain_maxent_reconstruct(np.zeros(3), 10, 1.0)


class TestCircuits:
    def test_brickwork_structure(self):
        c = ch.brickwork_circuit(7, 3, seed=1)
        assert [sorted(layer) for layer in c.gates] == [[0, 2, 4], [1, 3, 5], [0, 2, 4]]
        g = c.gates[0][0]
        np.testing.assert_allclose(g @ g.conj().T, np.eye(4), atol=1e-12)
        again = ch.BrickworkCircuit.from_dict(c.to_dict())
        np.testing.assert_array_equal(again.gates[1][3], c.gates[1][3])

    def test_evolved_diagonal_matches_dense(self):
        n = 7
        c = ch.brickwork_circuit(n, 3, seed=3, shared=False)
        U = dense_circuit(c)
        Z = np.diag([1.0, -1.0])
        O = dense_kron([np.eye(2**2), Z, np.eye(2), Z, np.eye(2**2)])
        full = np.diag(U @ O @ U.conj().T).real
        lo, diag = ch.evolved_diagonal(c, {2: "Z", 4: "Z"})
        # embed the window diagonal back into the full space
        width = diag.ndim
        embedded = np.kron(np.kron(np.ones(2**lo), diag.reshape(-1)), np.ones(2 ** (n - lo - width)))
        np.testing.assert_allclose(embedded, full, atol=1e-12)

    def test_width_cap(self):
        with pytest.raises(ValueError):
            ch.evolved_diagonal(ch.brickwork_circuit(30, 8, seed=0), {14: "Z", 16: "Z"}, max_width=12)

    def test_identity_circuit(self, rng):
        a, b = ch.random_chain(9, 1.0, rng), ch.random_chain(9, 1.0, rng)
        err = ch.windowed_observable_error(a, b, ch.identity_circuit(9))
        gap = 0.0
        for term in ch.next_nearest_zz(9):
            i, j = sorted(term)
            pa = ch.window_marginal(a, i, 3)
            pb = ch.window_marginal(b, i, 3)
            zz = np.einsum("i,k->ik", [1, -1], [1, -1])[:, None, :]
            gap += float(((pa - pb) * zz).sum())
        assert err == pytest.approx(abs(gap) / 9, abs=1e-14)

    def test_same_spec_zero(self, rng):
        spec = ch.random_chain(12, 1.0, rng)
        assert ch.windowed_observable_error(spec, spec, ch.brickwork_circuit(12, 3, seed=2)) == 0

    def test_matches_dense_oracle(self, rng):
        n = 7
        a = ch.random_chain(n, 1.0, rng, fields=True)
        b = ch.random_chain(n, 1.0, rng, fields=True)
        c = ch.brickwork_circuit(n, 3, seed=5)
        U = dense_circuit(c)
        Z = np.diag([1.0, -1.0])
        O = sum(dense_kron([np.eye(2**i), Z, np.eye(2), Z, np.eye(2 ** (n - i - 3))]) for i in range(n - 2)) / n
        diag = np.diag(U @ O @ U.conj().T).real
        _, pa, _ = enumerate_chain(a)
        _, pb, _ = enumerate_chain(b)
        assert ch.windowed_observable_error(a, b, c) == pytest.approx(abs(diag @ (pa - pb)), abs=1e-13)
