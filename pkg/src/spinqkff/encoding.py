"""Qudit-to-qubit mapping via reflected Gray code."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache, reduce

import numpy as np

from .pauli import PAULI_MATRICES, PauliSum, PauliWord


class EncodingError(ValueError):
    pass


@dataclass(frozen=True)
class QuditOperator:
    dim: int
    matrix: np.ndarray = field(compare=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if self.dim < 2 or m.shape != (self.dim, self.dim):
            raise EncodingError(f"matrix shape {m.shape} does not match dim {self.dim}")
        object.__setattr__(self, "matrix", m)

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return np.allclose(self.matrix, self.matrix.conj().T, atol=tol)

    def __matmul__(self, other: "QuditOperator") -> "QuditOperator":
        return QuditOperator(self.dim, self.matrix @ other.matrix)

    def __add__(self, other: "QuditOperator") -> "QuditOperator":
        return QuditOperator(self.dim, self.matrix + other.matrix)

    def __sub__(self, other: "QuditOperator") -> "QuditOperator":
        return QuditOperator(self.dim, self.matrix - other.matrix)

    def __mul__(self, s: complex) -> "QuditOperator":
        return QuditOperator(self.dim, s * self.matrix)

    __rmul__ = __mul__

    @property
    def dag(self) -> "QuditOperator":
        return QuditOperator(self.dim, self.matrix.conj().T)


def gray_code(k: int, bits: int) -> str:
    """Reflected Gray code of ``k`` as ``bits`` binary digits, MSB first."""
    if not 0 <= k < 2 ** bits:
        raise EncodingError(f"level {k} out of range for {bits} bits")
    return format(k ^ (k >> 1), f"0{bits}b")


@dataclass(frozen=True)
class CodeMap:
    dim: int
    qubits: int
    level_to_bits: tuple[str, ...]

    @classmethod
    def gray(cls, dim: int) -> "CodeMap":
        if dim < 2:
            raise EncodingError("dim must be >= 2")
        nq = math.ceil(math.log2(dim))
        return cls(dim, nq, tuple(gray_code(k, nq) for k in range(dim)))

    @property
    def used_subspace(self) -> frozenset[str]:
        return frozenset(self.level_to_bits)

    @property
    def used_indices(self) -> list[int]:
        return [int(b, 2) for b in self.level_to_bits]

    @property
    def unused_indices(self) -> list[int]:
        used = set(self.used_indices)
        return [i for i in range(2 ** self.qubits) if i not in used]

    def padded(self, m: np.ndarray) -> np.ndarray:
        """Embed a ``dim x dim`` matrix into ``2**qubits`` with zero padding."""
        out = np.zeros((2 ** self.qubits,) * 2, dtype=complex)
        idx = self.used_indices
        out[np.ix_(idx, idx)] = m
        return out


def spin1_operators() -> tuple[QuditOperator, QuditOperator, QuditOperator]:
    """Spin-1 matrices ordered by ascending m: level 0 is m=-1, level 2 is m=+1."""
    s = 1 / np.sqrt(2)
    sx = np.array([[0, s, 0], [s, 0, s], [0, s, 0]], dtype=complex)
    sy = np.array([[0, 1j * s, 0], [-1j * s, 0, 1j * s], [0, -1j * s, 0]], dtype=complex)
    sz = np.diag([-1.0, 0.0, 1.0]).astype(complex)
    return QuditOperator(3, sx), QuditOperator(3, sy), QuditOperator(3, sz)


def boson_operators(dim: int) -> tuple[QuditOperator, QuditOperator, QuditOperator]:
    """Truncated ladder operators ``(b, b_dag, number)``."""
    if dim < 2:
        raise EncodingError("boson dim must be >= 2")
    b = np.diag(np.sqrt(np.arange(1, dim)), 1).astype(complex)
    return QuditOperator(dim, b), QuditOperator(dim, b.conj().T), QuditOperator(dim, np.diag(np.arange(dim)).astype(complex))


def identity_operator(dim: int) -> QuditOperator:
    return QuditOperator(dim, np.eye(dim))


@lru_cache(maxsize=None)
def _pauli_basis(nq: int) -> tuple[tuple[str, ...], np.ndarray]:
    labels = tuple("".join(p) for p in itertools.product("IXYZ", repeat=nq))
    mats = np.array([reduce(np.kron, (PAULI_MATRICES[c] for c in lab)) for lab in labels])
    return labels, mats


def decompose(m: np.ndarray, tol: float = 1e-12) -> PauliSum:
    """Hilbert-Schmidt projection of a ``2**n`` matrix onto Pauli words."""
    nq = int(round(np.log2(m.shape[0])))
    labels, mats = _pauli_basis(nq)
    coeffs = np.einsum("kij,ji->k", mats, m) / 2 ** nq
    return PauliSum([(c, PauliWord(lab)) for lab, c in zip(labels, coeffs) if abs(c) >= tol], nq)


def encode(op: QuditOperator, code: CodeMap | None = None) -> PauliSum:
    """Gray-encode ``op`` into a Pauli sum on ``ceil(log2 dim)`` qubits.

    Unused bitstrings are zero-padded, so they are dark states of the result.
    Hermitian inputs give real coefficients.
    """
    code = CodeMap.gray(op.dim) if code is None else code
    if code.dim != op.dim:
        raise EncodingError(f"operator dim {op.dim} does not match code dim {code.dim}")
    h = decompose(code.padded(op.matrix))
    return h.real() if op.is_hermitian() else h


def encode_bitstring_state(levels, codes) -> str:
    """Concatenate per-site Gray bitstrings in register order."""
    if len(levels) != len(codes):
        raise EncodingError("one level per site required")
    out = []
    for k, code in zip(levels, codes):
        if not 0 <= k < code.dim:
            raise EncodingError(f"level {k} out of range for dim {code.dim}")
        out.append(code.level_to_bits[k])
    return "".join(out)
