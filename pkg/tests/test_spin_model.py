import math

import numpy as np
import pytest

from spinproc.errors import ClusterError, ConfigError
from spinproc.models import TWO_PI
from spinproc.specs import ClusterSpec, load_cluster_spec
from spinproc.spin_model import (
    all_to_all,
    build_cluster,
    chain,
    eigensystem,
    internal_hamiltonian,
    make_cluster,
    random_geometric,
    single_spin_operator,
    spin_operators,
    spin_system,
    transition_bound,
)


def _generic_cluster(n_spins: int, seed: int):
    rng = np.random.default_rng(seed)
    offsets = TWO_PI * rng.uniform(-500.0, 500.0, size=n_spins)
    d = TWO_PI * rng.uniform(50.0, 300.0, size=(n_spins, n_spins))
    d = np.triu(d, 1)
    d = d + d.T
    return make_cluster(offsets.tolist(), d.tolist())


def _brute_force_count(h: np.ndarray, n_spins: int) -> int:
    """整体对角化后逐对统计 ⟨i|S_x|j⟩ ≠ 0 且 ΔM = 1 的跃迁"""
    ops = spin_operators(n_spins)
    values, vectors = np.linalg.eigh(h)
    m = np.real(np.einsum("ki,kl,li->i", vectors.conj(), ops.s_z, vectors))
    sx = vectors.conj().T @ ops.s_x @ vectors
    count = 0
    for a in range(values.size):
        for b in range(values.size):
            if abs(m[a] - m[b] - 1.0) < 0.25 and abs(sx[a, b]) ** 2 > 1e-12:
                count += 1
    return count


class TestClusters:
    def test_make_cluster_defaults_to_uncoupled(self):
        cluster = make_cluster([1.0, 2.0])
        assert cluster.couplings == ((0.0, 0.0), (0.0, 0.0))

    def test_asymmetric_couplings(self):
        with pytest.raises(ClusterError):
            make_cluster([0.0, 0.0], [[0.0, 1.0], [2.0, 0.0]])

    def test_nonzero_diagonal(self):
        with pytest.raises(ClusterError):
            make_cluster([0.0, 0.0], [[1.0, 0.0], [0.0, 0.0]])

    def test_size_limit(self):
        with pytest.raises(ClusterError):
            make_cluster([0.0] * 13)

    def test_chain_and_all_to_all(self):
        c = chain(4, 1.0)
        assert c.couplings[0][1] == 1.0 and c.couplings[0][2] == 0.0
        a = all_to_all(3, 2.0)
        assert a.couplings[0][2] == 2.0 and a.couplings[1][1] == 0.0

    def test_generator_rejects_bad_parameters(self):
        with pytest.raises(ClusterError):
            chain(3, 0.0)
        with pytest.raises(ClusterError):
            random_geometric(0, seed=1)

    def test_random_geometric_is_seeded(self):
        a = random_geometric(5, seed=3)
        b = random_geometric(5, seed=3)
        assert a == b
        assert np.abs(a.coupling_matrix).max() == pytest.approx(TWO_PI * 400.0)
        assert np.all(np.abs(a.offset_array) <= TWO_PI * 150.0)

    def test_build_from_spec_applies_frame_offset(self):
        spec = ClusterSpec(offsets_hz=[100.0, -50.0], frame_offset_hz=1000.0)
        cluster = build_cluster(spec)
        assert cluster.offsets == pytest.approx((TWO_PI * 1100.0, TWO_PI * 950.0))

    def test_build_generator_spec(self):
        spec = ClusterSpec(n_spins=3, generator="chain", params={"coupling_hz": 50.0})
        cluster = build_cluster(spec)
        assert cluster.couplings[0][1] == pytest.approx(TWO_PI * 50.0)

    def test_spec_requires_one_form(self):
        with pytest.raises(ConfigError):
            load_cluster_spec({"offsets_hz": [0.0], "generator": "chain", "n_spins": 1})
        with pytest.raises(ConfigError):
            load_cluster_spec({"generator": "random_geometric", "n_spins": 3})
        with pytest.raises(ConfigError):
            load_cluster_spec({})

    def test_coupling_rows_must_match(self):
        spec = ClusterSpec(offsets_hz=[0.0, 1.0], couplings_hz=[[0.0, 1.0]])
        with pytest.raises(ClusterError):
            build_cluster(spec)


class TestOperators:
    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_commutation(self, n):
        ops = spin_operators(n)
        comm = ops.s_x @ ops.s_y - ops.s_y @ ops.s_x
        assert np.allclose(comm, 1j * ops.s_z)
        assert np.allclose(ops.s_plus, ops.s_x + 1j * ops.s_y)

    def test_collective_matches_sum_of_singles(self):
        ops = spin_operators(3)
        assert np.allclose(ops.s_x, sum(ops.single_x(i) for i in range(3)))
        assert np.allclose(ops.s_z, sum(ops.single_z(i) for i in range(3)))

    def test_hamiltonian_matches_kron_construction(self, three_spin_cluster):
        ops = spin_operators(3)
        d = three_spin_cluster.coupling_matrix
        x = [single_spin_operator(3, i, "x") for i in range(3)]
        y = [single_spin_operator(3, i, "y") for i in range(3)]
        z = [single_spin_operator(3, i, "z") for i in range(3)]
        h = sum(three_spin_cluster.offsets[i] * z[i] for i in range(3))
        for i in range(3):
            for j in range(i + 1, 3):
                h = h + d[i, j] * (2 * z[i] @ z[j] - x[i] @ x[j] - y[i] @ y[j])
        assert np.allclose(internal_hamiltonian(three_spin_cluster), h)
        assert np.allclose(ops.s_z @ h, h @ ops.s_z)


class TestEigensystem:
    def test_two_spin_zero_offsets(self):
        d = TWO_PI * 100.0
        es = eigensystem(internal_hamiltonian(make_cluster([0.0, 0.0], [[0.0, d], [d, 0.0]])))
        assert es.eigenvalues == pytest.approx([-d, 0.0, d / 2, d / 2])
        assert es.degenerate

    def test_sorted_and_orthonormal(self, three_spin_cluster):
        es = eigensystem(internal_hamiltonian(three_spin_cluster))
        assert np.all(np.diff(es.eigenvalues) >= 0.0)
        v = es.eigenvectors
        assert np.allclose(v.conj().T @ v, np.eye(8))

    def test_rejects_bad_dimension(self):
        with pytest.raises(ClusterError):
            eigensystem(np.zeros((3, 3)))


class TestTransitionTable:
    @pytest.mark.parametrize("n, expected", [(2, 4), (3, 15), (4, 56), (5, 210)])
    def test_generic_counts(self, n, expected):
        cluster = _generic_cluster(n, seed=100 + n)
        system = spin_system(cluster)
        assert len(system.transitions) == expected == transition_bound(n)
        assert _brute_force_count(system.hamiltonian, n) == expected

    def test_random_geometric_count(self):
        system = spin_system(random_geometric(3, seed=5))
        assert len(system.transitions) == 15

    def test_single_spin_line(self):
        system = spin_system(make_cluster([TWO_PI * 250.0]))
        table = system.transitions
        assert len(table) == 1
        assert table.freqs_hz[0] == pytest.approx(250.0)
        assert table.weight[0] == pytest.approx(0.25)

    def test_uncoupled_lines_are_degenerate(self):
        table = spin_system(make_cluster([TWO_PI * 500.0, TWO_PI * 1000.0])).transitions
        assert len(table) == 4
        assert table.degenerate_flag
        assert sorted(set(np.round(table.freqs_hz, 6))) == [500.0, 1000.0]

    def test_orientation_and_sorting(self, three_spin_cluster):
        system = spin_system(three_spin_cluster)
        table = system.transitions
        m = system.eigen.magnetization
        assert np.allclose(m[table.i] - m[table.j], 1.0)
        assert np.all(np.diff(table.omega) >= 0.0)
        assert np.allclose(table.weight, np.abs(table.element) ** 2)

    def test_weight_sum_rule(self, three_spin_cluster):
        # Σ|⟨i|S_x|j⟩|² over ΔM = +1 pairs = Tr(S_x²)/2
        system = spin_system(three_spin_cluster)
        ops = system.operators
        assert system.transitions.weight.sum() == pytest.approx(
            np.trace(ops.s_x @ ops.s_x).real / 2.0
        )

    def test_spin_system_is_cached(self, three_spin_cluster):
        assert spin_system(three_spin_cluster) is spin_system(three_spin_cluster)

    def test_bound(self):
        assert [transition_bound(n) for n in range(2, 6)] == [4, 15, 56, 210]
        assert transition_bound(6) == math.comb(12, 7)
