import numpy as np
import pytest
from hypothesis import given, strategies as st

from spinqkff.observables import CoherencePartition, SpectrumConfig, absorption_spectrum, dominant_peaks, \
    l1_coherence_direct, l1_coherence_krylov, z_function
from spinqkff.oracle import dense_propagate, l1_offdiag, partial_trace_state
from spinqkff.pauli import PauliSum
from spinqkff.sqkff import KrylovConfig, reconstruct, run_sqkff
from spinqkff.statevector import basis_state, expectation

from conftest import random_state, random_sum


class TestSpectrumConfig:
    def test_defaults(self):
        s = SpectrumConfig()
        assert s.times.size == 2049 and s.times[-1] == pytest.approx(100)
        assert s.bin_width == pytest.approx(2 * np.pi / 100)
        assert s.omega_grid[0] == 0 and s.omega_grid[-1] <= 8

    @pytest.mark.parametrize("kw", [{"dt": 0}, {"damping_eta": -1}, {"t_max": 10, "dt": 0.3}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            SpectrumConfig(**kw)


class TestSpectrum:
    def test_single_oscillator(self):
        scfg = SpectrumConfig(t_max=100, dt=100 / 2048, omega_grid=np.linspace(0, 8, 801))
        w0 = 2.87
        w, inten = absorption_spectrum(np.exp(-1j * w0 * scfg.times), scfg)
        assert abs(w[np.argmax(inten)] - w0) <= scfg.bin_width
        assert inten.max() == pytest.approx(1)
        assert dominant_peaks(w, inten, 1) == [pytest.approx(w0, abs=scfg.bin_width)]

    def test_constant_real(self):
        scfg = SpectrumConfig()
        w, inten = absorption_spectrum(np.full(scfg.times.shape, 0.7 + 0j), scfg)
        assert np.all(inten == 0)

    def test_zero_frequency_vanishes(self):
        scfg = SpectrumConfig()
        z = np.exp(-1.3j * scfg.times) + 0.5 * np.exp(-4.1j * scfg.times)
        w, inten = absorption_spectrum(z, scfg)
        assert w[0] == 0 and inten[0] == 0 and np.isrealobj(inten)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            absorption_spectrum(np.zeros(5), SpectrumConfig())

    def test_dominant_peaks_signed(self):
        w = np.linspace(0, 1, 11)
        inten = np.array([0, .1, .5, .1, 0, -.2, -.9, -.2, 0, .3, 0])
        assert dominant_peaks(w, inten, 2) == [pytest.approx(0.2), pytest.approx(0.6)]


class TestZ:
    def test_initial_value(self):
        rng = np.random.default_rng(2)
        h, mx, psi = random_sum(rng, 3, 6), random_sum(rng, 3, 3), random_state(rng, 3)
        cfg = KrylovConfig(M=4, R=4, exact_elements=True)
        res = z_function(h, mx, psi, cfg, np.linspace(0, 2, 5))
        direct = expectation(psi, mx @ mx)
        assert res.z[0] == pytest.approx(direct, abs=1e-8)

    def test_matches_dense_at_saturation(self):
        rng = np.random.default_rng(3)
        h, mx, psi = random_sum(rng, 2, 5), random_sum(rng, 2, 3), random_state(rng, 2)
        t = np.linspace(0, 10, 41)
        res = z_function(h, mx, psi, KrylovConfig(M=3, R=4, exact_elements=True), t)
        m = mx.to_matrix()
        ref = np.einsum("ti,ti->t", (dense_propagate(h, psi, t) @ m.T).conj(), dense_propagate(h, m @ psi, t))
        assert np.abs(res.z - ref).max() < 1e-8

    def test_commuting_is_constant(self):
        h = PauliSum([(0.8, "ZZ"), (0.3, "XX")])
        mx = PauliSum([(1.0, "XX")])
        psi = random_state(np.random.default_rng(0), 2)
        res = z_function(h, mx, psi, KrylovConfig(M=3, R=3, exact_elements=True), np.linspace(0, 5, 11))
        assert np.allclose(res.z, res.z[0], atol=1e-8)

    def test_zero_moment(self):
        res = z_function(PauliSum([(1, "ZI")]), PauliSum.zero(2), basis_state("00"), KrylovConfig(), [0, 1])
        assert res.zero and np.all(res.z == 0)


class TestCoherence:
    def test_direct_examples(self):
        assert l1_coherence_direct(basis_state("010")) == 0
        assert l1_coherence_direct(np.ones(2) / np.sqrt(2)) == pytest.approx(1)
        ghz = (basis_state("000") + basis_state("111")) / np.sqrt(2)
        assert l1_coherence_direct(ghz) == pytest.approx(1)
        assert l1_coherence_direct(np.outer(ghz, ghz.conj())) == pytest.approx(1)

    @given(st.integers(0, 10 ** 6))
    def test_direct_invariants(self, seed):
        rng = np.random.default_rng(seed)
        psi = random_state(rng, 3)
        phases = np.exp(1j * rng.uniform(0, 2 * np.pi, 8))
        assert l1_coherence_direct(phases * psi) == pytest.approx(l1_coherence_direct(psi))
        assert l1_coherence_direct(np.diag(np.abs(psi) ** 2)) == 0

    def test_partition(self):
        p = CoherencePartition.from_a((0, 1), 4)
        assert p.subsystem_b_qubits == (2, 3)
        with pytest.raises(ValueError):
            CoherencePartition((0, 1), (1, 2))

    def test_basis_state_start(self):
        h = random_sum(np.random.default_rng(1), 3, 6)
        run = run_sqkff(h, basis_state("011"), KrylovConfig(M=3, R=2, exact_elements=True), [0.0, 1.0])
        assert l1_coherence_krylov(run.mats, run.refs, run.traj)[0] == pytest.approx(0, abs=1e-12)

    @pytest.mark.parametrize("seed", range(3))
    def test_krylov_matches_reconstructed_state(self, seed):
        rng = np.random.default_rng(seed)
        h, psi = random_sum(rng, 4, 10), random_state(rng, 4)
        run = run_sqkff(h, psi, KrylovConfig(M=4, R=3, exact_elements=True), np.linspace(0, 10, 21))
        states = reconstruct(run.mats, run.traj)
        full = l1_coherence_krylov(run.mats, run.refs, run.traj)
        assert np.abs(full - [l1_coherence_direct(s) for s in states]).max() < 1e-8
        part = CoherencePartition.from_a((0, 1), 4)
        sub = l1_coherence_krylov(run.mats, run.refs, run.traj, part)
        oracle = [l1_offdiag(partial_trace_state(s, (0, 1), 4)) for s in states]
        assert np.abs(sub - oracle).max() < 1e-8
        termwise = l1_coherence_krylov(run.mats, run.refs, run.traj, part, termwise=True)
        assert np.all(termwise >= sub - 1e-12)
