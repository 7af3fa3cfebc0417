import numpy as np
import pytest

from spinqkff.model import build_total, initial_state_circuit, preset
from spinqkff.oracle import dense_propagate
from spinqkff.pauli import PauliSum, one_norm
from spinqkff.sqkff import Evolver, KrylovConfig, KrylovError, KrylovMatrices, ReferenceSet, assemble, \
    assemble_brute_force, autocorrelation, default_tau, distinct_element_count, propagate, reconstruct, \
    regularize, run_sqkff, select_references
from spinqkff.statevector import ShotPlan, basis_state, expectation

from conftest import random_state, random_sum


def small_problem(seed=0, n=3, terms=8):
    rng = np.random.default_rng(seed)
    return random_sum(rng, n, terms), random_state(rng, n)


class TestConfig:
    def test_defaults(self):
        cfg = KrylovConfig()
        assert (cfg.M, cfg.R, cfg.s_threshold, cfg.element_plan.mode) == (10, 1, 1e-8, "exact")

    def test_tau(self):
        h = PauliSum([(2.0, "XZ"), (-1.0, "ZI")])
        assert default_tau(h) == pytest.approx(np.pi / 30)
        assert KrylovConfig().resolved_tau(h) == pytest.approx(np.pi / 30)
        with pytest.raises(ValueError):
            KrylovConfig(tau=np.pi / 5).resolved_tau(h)
        with pytest.raises(ValueError):
            KrylovConfig(M=0)


class TestReferences:
    def test_r1(self):
        h, psi = small_problem()
        refs = select_references(h, psi, KrylovConfig(R=1))
        assert len(refs) == 1 and refs.bitstrings == []

    def test_stationary(self):
        refs = select_references(PauliSum.zero(2), basis_state("01"), KrylovConfig(R=2))
        assert refs.bitstrings == ["01"] and not refs.padded

    def test_padding(self):
        refs = select_references(PauliSum.zero(2), basis_state("01"), KrylovConfig(R=4))
        assert refs.bitstrings == ["01", "00", "10"] and refs.padded
        assert len(set(refs.bitstrings)) == 3

    def test_too_many(self):
        with pytest.raises(ValueError):
            select_references(PauliSum.zero(2), basis_state("01"), KrylovConfig(R=5))

    def test_ties_ascending(self):
        plus = np.ones(4) / 2
        refs = select_references(PauliSum.zero(2), plus, KrylovConfig(R=4))
        assert refs.bitstrings == ["00", "01", "10"]

    def test_config1_deterministic(self):
        spec = preset("config1")
        h, lay = build_total(spec)
        circ = initial_state_circuit(spec, lay)
        a = select_references(h, circ, KrylovConfig(R=5))
        b = select_references(h, circ, KrylovConfig(R=5))
        assert a.bitstrings == b.bitstrings and len(set(a.bitstrings)) == 4
        p = list(a.probabilities.values())
        assert p == sorted(p, reverse=True)
        plan = ShotPlan("sampled", 2000, 9)
        c = select_references(h, circ, KrylovConfig(R=5, element_plan=plan))
        d = select_references(h, circ, KrylovConfig(R=5, element_plan=plan))
        assert c.bitstrings == d.bitstrings and c.probabilities == d.probabilities


class TestAssemble:
    def test_element_count(self):
        assert distinct_element_count(10, 5) == 240
        h, psi = small_problem(n=4)
        cfg = KrylovConfig(M=10, R=5, exact_elements=True)
        mats = assemble(h, select_references(h, psi, cfg), cfg)
        assert mats.evaluated_count == 240 and mats.S.shape == (50, 50)

    def test_unit_diagonal(self):
        h, psi = small_problem()
        cfg = KrylovConfig(M=4, R=3, trotter_steps=5)
        mats = assemble(h, select_references(h, psi, cfg), cfg)
        assert np.allclose(np.diag(mats.S), 1)

    def test_single_vector(self):
        h, psi = small_problem()
        cfg = KrylovConfig(M=1, R=1)
        mats = assemble(h, select_references(h, psi, cfg), cfg)
        assert np.allclose(mats.S, [[1]])
        assert np.allclose(mats.H, [[expectation(psi, h)]])

    @pytest.mark.parametrize("exact", [True, False])
    def test_toeplitz_equals_brute_force(self, exact):
        h, psi = small_problem(seed=4)
        cfg = KrylovConfig(M=5, R=3, trotter_steps=3, exact_elements=exact)
        refs = select_references(h, psi, cfg)
        a, b = assemble(h, refs, cfg), assemble_brute_force(h, refs, cfg)
        assert np.abs(a.S - b.S).max() < 1e-10
        assert np.abs(a.H - b.H).max() < 1e-10

    def test_exact_elements_are_gram_matrices(self):
        h, psi = small_problem(seed=5)
        cfg = KrylovConfig(M=6, R=3, exact_elements=True)
        mats = assemble(h, select_references(h, psi, cfg), cfg)
        B = mats.basis
        assert np.abs(mats.S - B.conj().T @ B).max() < 1e-10
        assert np.abs(mats.H - B.conj().T @ (h.to_matrix() @ B)).max() < 1e-10

    def test_hermitian_psd(self):
        h, psi = small_problem(seed=6)
        cfg = KrylovConfig(M=8, R=4, exact_elements=True)
        mats = assemble(h, select_references(h, psi, cfg), cfg)
        assert np.abs(mats.S - mats.S.conj().T).max() < 1e-8
        assert np.abs(mats.H - mats.H.conj().T).max() < 1e-8
        assert np.linalg.eigvalsh(mats.S).min() > -1e-8

    def test_sampled_mode(self):
        h, psi = small_problem(seed=7)
        exact_cfg = KrylovConfig(M=3, R=2, exact_elements=True)
        refs = select_references(h, psi, exact_cfg)
        plan = ShotPlan("sampled", 20000, 3)
        cfg = KrylovConfig(M=3, R=2, exact_elements=True, element_plan=plan)
        a, b = assemble(h, refs, cfg), assemble(h, refs, cfg)
        assert np.array_equal(a.S, b.S) and np.array_equal(a.H, b.H)
        ref = assemble(h, refs, exact_cfg)
        assert np.abs(a.S - ref.S).max() < 10 / np.sqrt(plan.shots) * 2
        assert np.abs(a.H - ref.H).max() < 10 / np.sqrt(plan.shots) * 2 * one_norm(h, True)
        assert np.allclose(a.S, a.S.conj().T)


class TestRegularize:
    def test_identity(self):
        W, k = regularize(np.eye(4))
        assert k == 4 and np.allclose(W.conj().T @ W, np.eye(4))

    def test_tiny_eigenvalue(self):
        q, _ = np.linalg.qr(np.random.default_rng(0).normal(size=(4, 4)))
        S = q @ np.diag([1.0, 0.5, 0.2, 1e-12]) @ q.T
        W, k = regularize(S, 1e-8)
        assert k == 3
        assert np.allclose(W.conj().T @ S @ W, np.eye(3))

    def test_duplicated_reference(self):
        h, _ = small_problem(n=2)
        refs = ReferenceSet(basis_state("01"), ["01"], {})
        cfg = KrylovConfig(M=3, R=2, exact_elements=True)
        mats = assemble(h, refs, cfg)
        _, k = regularize(mats.S)
        assert k < 6
        traj = propagate(mats, np.linspace(0, 2, 5), cfg)
        assert np.all(np.isfinite(traj.autocorrelation))

    def test_empty(self):
        with pytest.raises(KrylovError):
            regularize(np.zeros((3, 3)))


class TestPropagate:
    def test_initial_condition(self):
        h, psi = small_problem()
        run = run_sqkff(h, psi, KrylovConfig(M=4, R=2, trotter_steps=4), [0.0, 0.5])
        assert np.allclose(run.traj.coefficients[0], np.eye(8)[0], atol=1e-8)
        assert run.traj.autocorrelation[0] == pytest.approx(1, abs=1e-6)

    def test_two_level_cosine(self):
        h = PauliSum([(1.0, "Z")])
        plus = np.ones(2) / np.sqrt(2)
        t = np.linspace(0, 10, 201)
        run = run_sqkff(h, plus, KrylovConfig(M=4, R=1), t)
        assert np.abs(run.traj.autocorrelation - np.cos(t) ** 2).max() < 1e-6

    def test_stationary(self):
        h = PauliSum([(0.7, "ZI"), (0.2, "ZZ")])
        run = run_sqkff(h, basis_state("10"), KrylovConfig(M=3, R=2), np.linspace(0, 5, 11))
        assert np.allclose(run.traj.autocorrelation, 1)

    @pytest.mark.parametrize("seed", range(3))
    def test_norm_conservation(self, seed):
        h, psi = small_problem(seed=seed)
        cfg = KrylovConfig(M=6, R=3, exact_elements=True)
        run = run_sqkff(h, psi, cfg, np.linspace(0, 30, 61))
        c, S = run.traj.coefficients, run.mats.S
        norms = np.einsum("ti,ij,tj->t", c.conj(), S, c).real
        assert np.abs(norms - 1).max() < 1e-6
        a = run.traj.autocorrelation
        assert a.min() >= 0 and a.max() <= 1 + 1e-6

    @pytest.mark.parametrize("seed", range(3))
    def test_saturation_exact(self, seed):
        h, psi = small_problem(seed=seed, n=2, terms=6)
        t = np.linspace(0, 20, 81)
        run = run_sqkff(h, psi, KrylovConfig(M=3, R=4, exact_elements=True), t)
        ref = dense_propagate(h, psi, t)
        assert np.abs(run.traj.autocorrelation - np.abs(ref @ psi.conj()) ** 2).max() < 1e-8
        assert np.abs(np.abs(np.einsum("ti,ti->t", reconstruct(run.mats, run.traj).conj(), ref)) - 1).max() < 1e-8

    def test_autocorrelation_helper(self):
        h, psi = small_problem()
        run = run_sqkff(h, psi, KrylovConfig(M=3, R=2), np.linspace(0, 1, 5))
        states = reconstruct(run.mats, run.traj)
        assert np.allclose(autocorrelation(run.mats, run.traj), np.abs(states @ psi.conj()) ** 2)

    def test_times_validation(self):
        h, psi = small_problem()
        cfg = KrylovConfig(M=2)
        mats = assemble(h, select_references(h, psi, cfg), cfg)
        with pytest.raises(ValueError):
            propagate(mats, [0.5, 1.0])
