"""Sparse algebra over weighted Pauli words.

Words are stored as strings over ``IXYZ`` with qubit 0 leftmost. The dense
and bit-level conventions follow the simulator: qubit 0 is the most
significant bit of a basis-state index.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Iterator, Mapping

import numpy as np

DROP_TOL = 1e-12

PAULI_MATRICES = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

# single-qubit products: (a, b) -> (phase, c) with a.b = phase * c
_PRODUCT = {
    ("I", "I"): (1, "I"), ("I", "X"): (1, "X"), ("I", "Y"): (1, "Y"), ("I", "Z"): (1, "Z"),
    ("X", "I"): (1, "X"), ("Y", "I"): (1, "Y"), ("Z", "I"): (1, "Z"),
    ("X", "X"): (1, "I"), ("Y", "Y"): (1, "I"), ("Z", "Z"): (1, "I"),
    ("X", "Y"): (1j, "Z"), ("Y", "X"): (-1j, "Z"),
    ("Y", "Z"): (1j, "X"), ("Z", "Y"): (-1j, "X"),
    ("Z", "X"): (1j, "Y"), ("X", "Z"): (-1j, "Y"),
}


class PauliError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class PauliWord:
    """A tensor product of single-qubit Paulis, e.g. ``PauliWord("XIZ")``."""

    label: str

    def __post_init__(self):
        if not self.label or set(self.label) - set("IXYZ"):
            raise PauliError(f"invalid Pauli label {self.label!r}")

    @classmethod
    def identity(cls, qubit_count: int) -> "PauliWord":
        return cls("I" * qubit_count)

    @classmethod
    def from_factors(cls, factors: Mapping[int, str], qubit_count: int) -> "PauliWord":
        chars = ["I"] * qubit_count
        for q, p in factors.items():
            if not 0 <= q < qubit_count:
                raise PauliError(f"qubit {q} outside register of {qubit_count}")
            if p not in "XYZ":
                raise PauliError(f"bad factor {p!r}")
            chars[q] = p
        return cls("".join(chars))

    @property
    def qubit_count(self) -> int:
        return len(self.label)

    @property
    def factors(self) -> dict[int, str]:
        return {q: p for q, p in enumerate(self.label) if p != "I"}

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(q for q, p in enumerate(self.label) if p != "I")

    @property
    def weight(self) -> int:
        return len(self.label) - self.label.count("I")

    def is_identity(self) -> bool:
        return self.weight == 0

    def is_diagonal(self) -> bool:
        return set(self.label) <= {"I", "Z"}

    def masks(self) -> tuple[int, int, int]:
        """Return ``(x_mask, z_mask, y_count)`` with qubit 0 as the top bit."""
        n = len(self.label)
        x = z = 0
        for q, p in enumerate(self.label):
            bit = 1 << (n - 1 - q)
            if p in "XY":
                x |= bit
            if p in "ZY":
                z |= bit
        return x, z, self.label.count("Y")

    def to_matrix(self) -> np.ndarray:
        return reduce(np.kron, (PAULI_MATRICES[p] for p in self.label))

    def __str__(self) -> str:
        return self.label


def multiply(a: PauliWord, b: PauliWord) -> tuple[complex, PauliWord]:
    """Product of two words as ``(phase, word)`` with phase in {±1, ±i}."""
    if a.qubit_count != b.qubit_count:
        raise PauliError("qubit_count mismatch")
    phase = 1
    chars = []
    for p, q in zip(a.label, b.label):
        f, c = _PRODUCT[p, q]
        phase *= f
        chars.append(c)
    return complex(phase), PauliWord("".join(chars))


def qwc(a: PauliWord, b: PauliWord) -> bool:
    """Qubit-wise commutation: factors agree or one is the identity on every qubit."""
    if a.qubit_count != b.qubit_count:
        raise PauliError("qubit_count mismatch")
    return all(p == "I" or q == "I" or p == q for p, q in zip(a.label, b.label))


class PauliSum:
    """Weighted sum of Pauli words on a fixed register.

    Instances are simplified on construction: duplicate words are merged,
    coefficients below ``drop_tol`` are removed and terms are kept in
    lexicographic word order.
    """

    def __init__(self, terms: Iterable[tuple[complex, PauliWord | str]] = (), qubit_count: int | None = None,
                 drop_tol: float = DROP_TOL):
        acc: dict[PauliWord, complex] = {}
        for coeff, word in terms:
            if isinstance(word, str):
                word = PauliWord(word)
            if qubit_count is None:
                qubit_count = word.qubit_count
            elif word.qubit_count != qubit_count:
                raise PauliError("qubit_count mismatch")
            acc[word] = acc.get(word, 0j) + complex(coeff)
        if qubit_count is None:
            raise PauliError("qubit_count required for an empty sum")
        self.qubit_count = qubit_count
        self.drop_tol = drop_tol
        self._terms = {w: c for w, c in sorted(acc.items()) if abs(c) >= drop_tol}

    @classmethod
    def from_dict(cls, terms: Mapping[str, complex], qubit_count: int | None = None) -> "PauliSum":
        return cls([(c, w) for w, c in terms.items()], qubit_count)

    @classmethod
    def zero(cls, qubit_count: int) -> "PauliSum":
        return cls([], qubit_count)

    @classmethod
    def identity(cls, qubit_count: int, coeff: complex = 1.0) -> "PauliSum":
        return cls([(coeff, PauliWord.identity(qubit_count))], qubit_count)

    @property
    def terms(self) -> list[tuple[complex, PauliWord]]:
        return [(c, w) for w, c in self._terms.items()]

    @property
    def words(self) -> list[PauliWord]:
        return list(self._terms)

    def coeff(self, word: PauliWord | str) -> complex:
        if isinstance(word, str):
            word = PauliWord(word)
        return self._terms.get(word, 0j)

    def simplify(self) -> "PauliSum":
        return PauliSum(self.terms, self.qubit_count, self.drop_tol)

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self) -> Iterator[tuple[complex, PauliWord]]:
        return iter(self.terms)

    def __eq__(self, other) -> bool:
        return isinstance(other, PauliSum) and self.qubit_count == other.qubit_count \
            and self._terms == other._terms

    def __repr__(self) -> str:
        body = " + ".join(f"({c:.6g})*{w}" for c, w in self.terms[:8])
        more = "" if len(self) <= 8 else f" + ... ({len(self)} terms)"
        return f"PauliSum({body or '0'}{more})"

    def __add__(self, other: "PauliSum") -> "PauliSum":
        if other.qubit_count != self.qubit_count:
            raise PauliError("qubit_count mismatch")
        return PauliSum(self.terms + other.terms, self.qubit_count, self.drop_tol)

    def __sub__(self, other: "PauliSum") -> "PauliSum":
        return self + (-1.0) * other

    def __neg__(self) -> "PauliSum":
        return (-1.0) * self

    def __mul__(self, scalar: complex) -> "PauliSum":
        return PauliSum([(scalar * c, w) for c, w in self.terms], self.qubit_count, self.drop_tol)

    __rmul__ = __mul__

    def __matmul__(self, other: "PauliSum") -> "PauliSum":
        out = []
        for ca, wa in self.terms:
            for cb, wb in other.terms:
                phase, w = multiply(wa, wb)
                out.append((ca * cb * phase, w))
        return PauliSum(out, self.qubit_count, self.drop_tol)

    def tensor(self, other: "PauliSum") -> "PauliSum":
        """Kronecker product ``self ⊗ other`` (self on the lower qubit indices)."""
        out = [(ca * cb, PauliWord(wa.label + wb.label)) for ca, wa in self.terms for cb, wb in other.terms]
        return PauliSum(out, self.qubit_count + other.qubit_count, self.drop_tol)

    def embed(self, qubits: Iterable[int], qubit_count: int) -> "PauliSum":
        """Place this sum on ``qubits`` of a larger register."""
        qubits = list(qubits)
        if len(qubits) != self.qubit_count:
            raise PauliError("embedding size mismatch")
        out = []
        for c, w in self.terms:
            chars = ["I"] * qubit_count
            for q, p in zip(qubits, w.label):
                chars[q] = p
            out.append((c, PauliWord("".join(chars))))
        return PauliSum(out, qubit_count, self.drop_tol)

    def identity_coeff(self) -> complex:
        return self._terms.get(PauliWord.identity(self.qubit_count), 0j)

    def without_identity(self) -> "PauliSum":
        return PauliSum([(c, w) for c, w in self.terms if not w.is_identity()], self.qubit_count)

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return all(abs(c.imag) <= tol for c, _ in self.terms)

    def real(self) -> "PauliSum":
        return PauliSum([(c.real, w) for c, w in self.terms], self.qubit_count, self.drop_tol)

    def to_matrix(self) -> np.ndarray:
        dim = 2 ** self.qubit_count
        out = np.zeros((dim, dim), dtype=complex)
        for c, w in self.terms:
            out += c * w.to_matrix()
        return out

    def dumps(self) -> str:
        return "\n".join(f"{c.real:.17g} {c.imag:.17g} {w.label}" for c, w in self.terms)

    @classmethod
    def loads(cls, text: str, qubit_count: int | None = None) -> "PauliSum":
        terms = []
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            re_, im_, label = line.split()
            terms.append((complex(float(re_), float(im_)), PauliWord(label)))
        return cls(terms, qubit_count)


def one_norm(h: PauliSum, include_identity: bool = False) -> float:
    """Sum of absolute coefficients; the identity term is skipped by default."""
    return float(sum(abs(c) for c, w in h.terms if include_identity or not w.is_identity()))


def _qwc_graph_coloring(words: list[PauliWord]) -> list[int]:
    # conflict graph: edge when two words fail qubit-wise commutation
    n = len(words)
    adj = [set() for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if not qwc(words[i], words[j]):
                adj[i].add(j)
                adj[j].add(i)
    order = sorted(range(n), key=lambda i: (-len(adj[i]), i))
    colors = [-1] * n
    for i in order:
        used = {colors[j] for j in adj[i]}
        c = 0
        while c in used:
            c += 1
        colors[i] = c
    return colors


def qwc_partition(h: PauliSum) -> list[PauliSum]:
    """Greedy largest-degree-first coloring of the QWC conflict graph.

    The identity term, if present, is placed in the first group.
    """
    terms = h.terms
    if not terms:
        return []
    colors = _qwc_graph_coloring([w for _, w in terms])
    groups: dict[int, list] = {}
    for color, term in zip(colors, terms):
        groups.setdefault(color, []).append(term)
    return [PauliSum(groups[c], h.qubit_count) for c in sorted(groups)]


def group_basis(g: PauliSum) -> dict[int, str]:
    """Non-identity factor per qubit shared by every word of a QWC group."""
    basis: dict[int, str] = {}
    for _, w in g.terms:
        for q, p in w.factors.items():
            if basis.setdefault(q, p) != p:
                raise PauliError(f"group is not qubit-wise commuting on qubit {q}")
    return basis


def diagonalizing_rotations(g: PauliSum):
    """Single-qubit Clifford layer mapping every word of a QWC group onto Z/I.

    Returns ``(layer, diagonal_sum)`` where ``layer`` is a list of
    :class:`~spinqkff.circuit.Gate` applied before the diagonal part, i.e.
    ``P = L^† D L`` for each word ``P`` and its image ``D``.
    """
    from .circuit import Gate

    basis = group_basis(g)
    layer = []
    for q in sorted(basis):
        if basis[q] == "X":
            layer.append(Gate("H", (q,)))
        elif basis[q] == "Y":
            layer.append(Gate("Sdg", (q,)))
            layer.append(Gate("H", (q,)))
    diag = PauliSum([(c, PauliWord(w.label.replace("X", "Z").replace("Y", "Z"))) for c, w in g.terms],
                    g.qubit_count)
    return layer, diag
