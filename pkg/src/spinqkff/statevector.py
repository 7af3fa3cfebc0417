"""Dense statevector engine.

States are plain ``numpy`` complex vectors of length ``2**n``; the basis
index reads qubit 0 as its most significant bit.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .circuit import Circuit, Gate
from .pauli import PauliSum, PauliWord


@dataclass(frozen=True)
class ShotPlan:
    mode: str = "exact"
    shots: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("exact", "sampled"):
            raise ValueError(f"unknown shot mode {self.mode!r}")
        if self.mode == "sampled" and self.shots < 1:
            raise ValueError("shots must be >= 1 in sampled mode")

    @property
    def exact(self) -> bool:
        return self.mode == "exact"


def qubit_count_of(state: np.ndarray) -> int:
    n = int(round(np.log2(state.shape[0])))
    if 2 ** n != state.shape[0]:
        raise ValueError("state length is not a power of two")
    return n


def zero_state(n: int) -> np.ndarray:
    psi = np.zeros(2 ** n, dtype=complex)
    psi[0] = 1.0
    return psi


def basis_state(bits: str) -> np.ndarray:
    psi = np.zeros(2 ** len(bits), dtype=complex)
    psi[int(bits, 2)] = 1.0
    return psi


def bitstring(index: int, n: int) -> str:
    return format(index, f"0{n}b")


@lru_cache(maxsize=None)
def bit_table(n: int) -> np.ndarray:
    """``(2**n, n)`` array of bit values, column q = qubit q."""
    idx = np.arange(2 ** n, dtype=np.int64)
    return ((idx[:, None] >> (n - 1 - np.arange(n))) & 1).astype(np.int8)


def z_eigenvalues(word: PauliWord) -> np.ndarray:
    """Diagonal of a Z/I word: ``(-1)**parity`` over its support."""
    n = word.qubit_count
    sup = list(word.support)
    if not sup:
        return np.ones(2 ** n)
    return 1.0 - 2.0 * (bit_table(n)[:, sup].sum(axis=1) & 1)


def _apply_single(psi: np.ndarray, m: np.ndarray, q: int, ctrls: tuple[int, ...]):
    n = psi.ndim
    idx = [slice(None)] * n
    for c in ctrls:
        idx[c] = 1
    i0, i1 = list(idx), list(idx)
    i0[q], i1[q] = 0, 1
    i0, i1 = tuple(i0), tuple(i1)
    a0 = psi[i0].copy()
    a1 = psi[i1].copy()
    if m[0, 1] == 0 and m[1, 0] == 0:
        psi[i0] = m[0, 0] * a0
        psi[i1] = m[1, 1] * a1
    else:
        psi[i0] = m[0, 0] * a0 + m[0, 1] * a1
        psi[i1] = m[1, 0] * a0 + m[1, 1] * a1


def apply_gate(state: np.ndarray, gate: Gate, n: int | None = None) -> np.ndarray:
    """Return a new state with ``gate`` applied."""
    n = qubit_count_of(state) if n is None else n
    if any(q >= n for q in gate.wires):
        raise IndexError(f"gate {gate} outside register of {n} qubits")
    psi = state.reshape((2,) * n).copy()
    ctrls = () if gate.control is None else (gate.control,)
    if gate.kind == "CNOT":
        _apply_single(psi, gate.matrix(), gate.qubits[1], ctrls + (gate.qubits[0],))
    else:
        _apply_single(psi, gate.matrix(), gate.qubits[0], ctrls)
    return psi.reshape(-1)


def apply_circuit(state: np.ndarray, circuit: Circuit) -> np.ndarray:
    n = qubit_count_of(state)
    if n != circuit.qubit_count:
        raise ValueError(f"state has {n} qubits, circuit {circuit.qubit_count}")
    psi = state.reshape((2,) * n).copy()
    for g in circuit.gates:
        ctrls = () if g.control is None else (g.control,)
        if g.kind == "CNOT":
            _apply_single(psi, g.matrix(), g.qubits[1], ctrls + (g.qubits[0],))
        else:
            _apply_single(psi, g.matrix(), g.qubits[0], ctrls)
    return psi.reshape(-1)


def prepare(circuit: Circuit) -> np.ndarray:
    return apply_circuit(zero_state(circuit.qubit_count), circuit)


class CompiledPauliSum:
    """A Pauli sum regrouped by X-mask for fast matrix-vector products.

    Each word acts as ``P|b> = i**ny (-1)**popcount(b & z) |b ^ x>``, so terms
    sharing an X-mask collapse into one diagonal vector.
    """

    def __init__(self, h: PauliSum):
        self.qubit_count = n = h.qubit_count
        dim = 2 ** n
        self.index = np.arange(dim, dtype=np.int64)
        blocks: dict[int, np.ndarray] = {}
        bits = bit_table(n)
        for c, w in h.terms:
            x, z, ny = w.masks()
            zsup = [q for q, p in enumerate(w.label) if p in "ZY"]
            sign = 1.0 - 2.0 * (bits[:, zsup].sum(axis=1) & 1) if zsup else np.ones(dim)
            coeff = c * (1j ** ny)
            if x not in blocks:
                blocks[x] = np.zeros(dim, dtype=complex)
            blocks[x] += coeff * sign
        self.blocks = sorted(blocks.items())

    def apply(self, state: np.ndarray) -> np.ndarray:
        out = np.zeros(state.shape, dtype=complex)
        for x, d in self.blocks:
            if x == 0:
                out += d * state if state.ndim == 1 else d[:, None] * state
            else:
                perm = self.index ^ x
                v = d * state if state.ndim == 1 else d[:, None] * state
                out += v[perm]
        return out

    def to_sparse(self):
        import scipy.sparse as sp

        dim = 2 ** self.qubit_count
        rows, cols, vals = [], [], []
        for x, d in self.blocks:
            nz = np.nonzero(d)[0]
            rows.append(nz ^ x)
            cols.append(nz)
            vals.append(d[nz])
        if not rows:
            return sp.csr_matrix((dim, dim), dtype=complex)
        m = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(dim, dim))
        return m.tocsr()


def compiled(h: PauliSum) -> CompiledPauliSum:
    cache = getattr(h, "_compiled", None)
    if cache is None:
        cache = CompiledPauliSum(h)
        h._compiled = cache
    return cache


def apply_pauli_sum(state: np.ndarray, h: PauliSum) -> np.ndarray:
    """``sum_j c_j P_j |state>``; linear, not norm-preserving."""
    if qubit_count_of(state) != h.qubit_count:
        raise ValueError("qubit_count mismatch")
    return compiled(h).apply(state)


def apply_pauli_word(state: np.ndarray, word: PauliWord) -> np.ndarray:
    n = word.qubit_count
    x, _, ny = word.masks()
    zsup = [q for q, p in enumerate(word.label) if p in "ZY"]
    sign = 1.0 - 2.0 * (bit_table(n)[:, zsup].sum(axis=1) & 1) if zsup else 1.0
    v = (1j ** ny) * sign * state
    return v[np.arange(2 ** n) ^ x]


def expectation(state: np.ndarray, h: PauliSum) -> complex:
    return complex(np.vdot(state, apply_pauli_sum(state, h)))


def binomial_estimate(amplitude: complex, shots: int, rng: np.random.Generator) -> complex:
    """Two-ancilla-test estimator of a complex amplitude with ``shots`` per test.

    The real-part test yields outcome 0 with probability ``(1 + Re a)/2`` and
    the imaginary-part test (ancilla phase S^dagger) with ``(1 + Im a)/2``.
    """
    p_re = min(max((1.0 + amplitude.real) / 2.0, 0.0), 1.0)
    p_im = min(max((1.0 + amplitude.imag) / 2.0, 0.0), 1.0)
    re = 2.0 * rng.binomial(shots, p_re) / shots - 1.0
    im = 2.0 * rng.binomial(shots, p_im) / shots - 1.0
    return complex(re, im)


def hadamard_test_circuit(w: Circuit, imaginary: bool = False) -> Circuit:
    """Ancilla circuit for ``<0|W|0>``: ancilla is the last qubit."""
    n = w.qubit_count
    anc = n
    c = Circuit(n + 1, [Gate("H", (anc,))])
    if imaginary:
        c.append(Gate("Sdg", (anc,)))
    for g in w.gates:
        if g.control is not None:
            raise ValueError("W must not already be controlled")
        c.append(Gate(g.kind, g.qubits, g.angle, control=anc))
    c.append(Gate("H", (anc,)))
    return c


def ancilla_zero_probability(test: Circuit) -> float:
    psi = prepare(test)
    # ancilla is the least significant bit
    return float(np.sum(np.abs(psi[0::2]) ** 2))


def hadamard_test(prep_bra: Circuit, prep_ket: Circuit, u: Circuit, plan: ShotPlan = ShotPlan(),
                  rng: np.random.Generator | None = None) -> complex:
    """Estimate ``<0|prep_bra^dagger U prep_ket|0>``.

    Exact mode returns the amplitude of the composite unitary directly; sampled
    mode draws ``plan.shots`` outcomes for each of the real and imaginary tests.
    """
    n = u.qubit_count
    if prep_bra.qubit_count != n or prep_ket.qubit_count != n:
        raise ValueError("circuits must share qubit_count")
    ket = apply_circuit(prepare(prep_ket), u)
    amp = complex(np.vdot(prepare(prep_bra), ket))
    if plan.exact:
        return amp
    rng = np.random.default_rng(plan.seed) if rng is None else rng
    return binomial_estimate(amp, plan.shots, rng)


def probabilities(state: np.ndarray) -> np.ndarray:
    p = np.abs(state) ** 2
    return p / p.sum()


def sample_bitstrings(state: np.ndarray, shots: int, seed: int = 0) -> Counter:
    if shots < 1:
        raise ValueError("shots must be >= 1")
    n = qubit_count_of(state)
    rng = np.random.default_rng(seed)
    draws = rng.choice(state.shape[0], size=shots, p=probabilities(state))
    idx, counts = np.unique(draws, return_counts=True)
    return Counter({bitstring(int(i), n): int(k) for i, k in zip(idx, counts)})
