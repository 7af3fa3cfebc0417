import numpy as np
import pytest
from hypothesis import given, strategies as st

from spinqkff.circuit import KINDS, ROTATIONS, Circuit, Gate
from spinqkff.pauli import PauliSum, PauliWord
from spinqkff.statevector import ShotPlan, ancilla_zero_probability, apply_circuit, apply_pauli_sum, \
    apply_pauli_word, basis_state, binomial_estimate, hadamard_test, hadamard_test_circuit, prepare, \
    probabilities, sample_bitstrings, zero_state

from conftest import random_state, random_sum


def random_circuit(rng, n, length=12):
    kinds = sorted(KINDS - {"CNOT"}) + ["CNOT"] * (1 if n > 1 else 0)
    c = Circuit(n)
    for _ in range(length):
        k = rng.choice(kinds)
        if k == "CNOT":
            a, b = rng.choice(n, 2, replace=False)
            c.append(Gate("CNOT", (a, b)))
        else:
            c.append(Gate(k, (int(rng.integers(n)),), float(rng.normal()) if k in ROTATIONS else 0.0))
    return c


def test_basic_gates():
    plus = apply_circuit(zero_state(1), Circuit(1, [Gate("H", (0,))]))
    assert np.allclose(plus, [1 / np.sqrt(2)] * 2)
    s = (basis_state("00") + basis_state("10")) / np.sqrt(2)
    bell = apply_circuit(s, Circuit(2, [Gate("CNOT", (0, 1))]))
    assert np.allclose(bell, np.array([1, 0, 0, 1]) / np.sqrt(2))


@pytest.mark.parametrize("n", [1, 2, 3])
def test_random_circuit_matches_dense(rng, n):
    for _ in range(5):
        c = random_circuit(rng, n)
        psi = random_state(rng, n)
        out = apply_circuit(psi, c)
        assert np.allclose(out, c.to_matrix() @ psi)
        assert abs(np.linalg.norm(out) - 1) < 1e-10


def test_controlled_gates_match_dense(rng):
    c = Circuit(3, [Gate("Ry", (0,), 0.4, control=2), Gate("H", (1,), control=0), Gate("Sdg", (2,), control=1)])
    psi = random_state(rng, 3)
    assert np.allclose(apply_circuit(psi, c), c.to_matrix() @ psi)


@given(st.integers(0, 10 ** 6), st.complex_numbers(max_magnitude=2), st.complex_numbers(max_magnitude=2))
def test_linearity(seed, a, b):
    rng = np.random.default_rng(seed)
    c = random_circuit(rng, 3)
    s1, s2 = random_state(rng, 3), random_state(rng, 3)
    assert np.allclose(apply_circuit(a * s1 + b * s2, c), a * apply_circuit(s1, c) + b * apply_circuit(s2, c))


def test_pauli_sum_examples():
    psi = random_state(np.random.default_rng(0), 2)
    assert np.allclose(apply_pauli_sum(psi, PauliSum([(1, "II")])), psi)
    assert np.allclose(apply_pauli_sum(basis_state("10"), PauliSum([(1, "ZI")])), -basis_state("10"))
    assert np.allclose(apply_pauli_sum(basis_state("0"), PauliSum([(1, "X"), (1, "Z")])), [1, 1])


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_pauli_application_matches_matrix(rng, n):
    h = random_sum(rng, n, 8, hermitian=False)
    psi = random_state(rng, n)
    assert np.allclose(apply_pauli_sum(psi, h), h.to_matrix() @ psi)
    w = PauliWord("".join(rng.choice(list("IXYZ"), n)))
    assert np.allclose(apply_pauli_word(psi, w), w.to_matrix() @ psi)
    batch = np.stack([psi, random_state(rng, n)], axis=1)
    assert np.allclose(apply_pauli_sum(batch, h), h.to_matrix() @ batch)


def test_hadamard_examples():
    e = Circuit(1)
    assert hadamard_test(e, e, Circuit(1)) == pytest.approx(1)
    th = 0.37
    u = Circuit(1, [Gate("Rz", (0,), 2 * th)])
    assert hadamard_test(e, e, u) == pytest.approx(np.exp(-1j * th))


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_hadamard_exact_equals_inner_product(rng, n):
    for _ in range(4):
        bra, ket, u = random_circuit(rng, n), random_circuit(rng, n), random_circuit(rng, n, 20)
        direct = np.vdot(prepare(bra), u.to_matrix() @ prepare(ket))
        assert abs(hadamard_test(bra, ket, u) - direct) < 1e-10


def test_ancilla_circuit_statistics(rng):
    for _ in range(3):
        w = random_circuit(rng, 2)
        amp = (w.to_matrix() @ zero_state(2))[0]
        assert ancilla_zero_probability(hadamard_test_circuit(w)) == pytest.approx((1 + amp.real) / 2)
        assert ancilla_zero_probability(hadamard_test_circuit(w, True)) == pytest.approx((1 + amp.imag) / 2)


def test_hadamard_sampled_concentration():
    c = Circuit(2, [Gate("H", (0,)), Gate("Ry", (1,), 0.8)])
    u = Circuit(2, [Gate("Rz", (0,), 1.1), Gate("CNOT", (0, 1))])
    exact = hadamard_test(c, c, u)
    shots = 10 ** 5
    hits = sum(abs(hadamard_test(c, c, u, ShotPlan("sampled", shots, s)) - exact) <= 5 / np.sqrt(shots)
               for s in range(200))
    assert hits / 200 >= 0.99


def test_binomial_estimate_reproducible():
    a = binomial_estimate(0.3 - 0.2j, 1000, np.random.default_rng(5))
    b = binomial_estimate(0.3 - 0.2j, 1000, np.random.default_rng(5))
    assert a == b


def test_sampling():
    assert sample_bitstrings(basis_state("101"), 500, seed=1) == {"101": 500}
    plus = np.array([1, 1]) / np.sqrt(2)
    counts = sample_bitstrings(plus, 10 ** 4, seed=3)
    assert abs(counts["0"] / 1e4 - 0.5) <= 0.02 and abs(counts["1"] / 1e4 - 0.5) <= 0.02
    assert probabilities(random_state(np.random.default_rng(2), 3)).sum() == pytest.approx(1)
    assert sample_bitstrings(plus, 100, seed=4) == sample_bitstrings(plus, 100, seed=4)


def test_shot_plan_validation():
    with pytest.raises(ValueError):
        ShotPlan("sampled", 0)
    with pytest.raises(ValueError):
        ShotPlan("noisy")
