"""Gate-level circuit representation shared by the compiler and the simulator."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

SINGLE_QUBIT = {"H", "S", "Sdg", "X", "Y", "Z", "Rx", "Ry", "Rz"}
ROTATIONS = {"Rx", "Ry", "Rz"}
KINDS = SINGLE_QUBIT | {"CNOT"}

_INVERSE = {"H": "H", "S": "Sdg", "Sdg": "S", "X": "X", "Y": "Y", "Z": "Z", "CNOT": "CNOT"}

_SQ = 1 / np.sqrt(2)
_FIXED = {
    "H": np.array([[_SQ, _SQ], [_SQ, -_SQ]], dtype=complex),
    "S": np.diag([1, 1j]).astype(complex),
    "Sdg": np.diag([1, -1j]).astype(complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.diag([1, -1]).astype(complex),
}


def rotation_matrix(kind: str, angle: float) -> np.ndarray:
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    if kind == "Rx":
        return np.array([[c, -1j * s], [-1j * s, c]])
    if kind == "Ry":
        return np.array([[c, -s], [s, c]], dtype=complex)
    if kind == "Rz":
        return np.diag([np.exp(-0.5j * angle), np.exp(0.5j * angle)])
    raise ValueError(kind)


@dataclass(frozen=True)
class Gate:
    """One gate. ``qubits`` is ``(target,)`` or ``(control, target)`` for CNOT.

    ``control`` marks an ancilla-controlled variant of a single-qubit gate.
    """

    kind: str
    qubits: tuple[int, ...]
    angle: float = 0.0
    control: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        qs = tuple(int(q) for q in self.qubits)
        object.__setattr__(self, "qubits", qs)
        if self.kind == "CNOT":
            if len(qs) != 2 or qs[0] == qs[1]:
                raise ValueError("CNOT needs two distinct qubits")
        elif len(qs) != 1:
            raise ValueError(f"{self.kind} acts on exactly one qubit")
        if self.control is not None and self.control in qs:
            raise ValueError("control coincides with target")

    @property
    def wires(self) -> tuple[int, ...]:
        return self.qubits if self.control is None else (self.control,) + self.qubits

    def inverse(self) -> "Gate":
        if self.kind in ROTATIONS:
            return Gate(self.kind, self.qubits, -self.angle, self.control)
        return Gate(_INVERSE[self.kind], self.qubits, 0.0, self.control)

    def matrix(self) -> np.ndarray:
        """2x2 target matrix (CNOT returns the X block)."""
        if self.kind == "CNOT":
            return _FIXED["X"]
        if self.kind in ROTATIONS:
            return rotation_matrix(self.kind, self.angle)
        return _FIXED[self.kind]

    def __str__(self) -> str:
        ctrl = "" if self.control is None else f" ctrl={self.control}"
        qs = ",".join(map(str, self.qubits))
        if self.kind in ROTATIONS:
            return f"{self.kind} {qs} {self.angle:.17g}{ctrl}"
        return f"{self.kind} {qs}{ctrl}"


@dataclass
class Circuit:
    qubit_count: int
    gates: list[Gate] = field(default_factory=list)

    def __post_init__(self):
        for g in self.gates:
            self._check(g)

    def _check(self, g: Gate):
        if any(q < 0 or q >= self.qubit_count for q in g.wires):
            raise IndexError(f"gate {g} outside register of {self.qubit_count} qubits")

    def append(self, g: Gate) -> "Circuit":
        self._check(g)
        self.gates.append(g)
        return self

    def extend(self, gates: Iterable[Gate]) -> "Circuit":
        for g in gates:
            self.append(g)
        return self

    def __add__(self, other: "Circuit") -> "Circuit":
        if other.qubit_count != self.qubit_count:
            raise ValueError("qubit_count mismatch")
        return Circuit(self.qubit_count, self.gates + other.gates)

    def __len__(self) -> int:
        return len(self.gates)

    def inverse(self) -> "Circuit":
        return Circuit(self.qubit_count, [g.inverse() for g in reversed(self.gates)])

    def dumps(self) -> str:
        return "\n".join(str(g) for g in self.gates)

    @classmethod
    def loads(cls, text: str, qubit_count: int) -> "Circuit":
        gates = []
        for line in text.splitlines():
            parts = line.split()
            if not parts:
                continue
            ctrl = None
            if parts[-1].startswith("ctrl="):
                ctrl = int(parts.pop()[5:])
            kind, qs = parts[0], tuple(int(q) for q in parts[1].split(","))
            angle = float(parts[2]) if len(parts) > 2 else 0.0
            gates.append(Gate(kind, qs, angle, ctrl))
        return cls(qubit_count, gates)

    def to_matrix(self) -> np.ndarray:
        """Dense unitary; intended for small registers in tests."""
        from .statevector import apply_circuit

        dim = 2 ** self.qubit_count
        return np.column_stack([apply_circuit(np.eye(dim, dtype=complex)[:, k], self) for k in range(dim)])
