"""Second-order Trotter compilation, peephole cancellation and resource counts."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .circuit import ROTATIONS, Circuit, Gate
from .pauli import PauliError, PauliSum, PauliWord, diagonalizing_rotations, one_norm, qwc_partition
from .statevector import z_eigenvalues

ANGLE_TOL = 1e-12


@dataclass
class GroupBlock:
    """A simultaneously diagonalizable set of terms and its Clifford layer."""

    layer: list[Gate]
    terms: list[tuple[float, PauliWord]]  # diagonal images, ordered for ladder reuse
    source: PauliSum | None = None

    def energies(self) -> np.ndarray:
        n = self.terms[0][1].qubit_count
        e = np.zeros(2 ** n)
        for c, w in self.terms:
            e += c * z_eigenvalues(w)
        return e


def _ladder_order(terms):
    return sorted(terms, key=lambda t: (t[1].support, t[1].label))


def prepare_blocks(h: PauliSum, grouped: bool = True) -> tuple[list[GroupBlock], float]:
    """Split ``h`` into diagonalizable blocks plus the identity coefficient.

    With ``grouped`` the blocks are QWC groups, the two largest placed at the
    ends of the sweep (they absorb the Strang mirror merges). Otherwise every
    term forms its own block, in lexicographic order.
    """
    ident = h.identity_coeff().real
    body = h.without_identity()
    if grouped:
        groups = qwc_partition(body)
        groups.sort(key=lambda g: -len(g))
        if len(groups) > 2:
            groups = [groups[0]] + groups[2:] + [groups[1]]
    else:
        groups = [PauliSum([(c, w)], h.qubit_count) for c, w in body.terms]
    blocks = []
    for g in groups:
        layer, diag = diagonalizing_rotations(g)
        blocks.append(GroupBlock(layer, _ladder_order([(c.real, w) for c, w in diag.terms]), g))
    return blocks, ident


def exp_diagonal_word(word: PauliWord, angle: float, n: int | None = None) -> Circuit:
    """Circuit for ``exp(-i angle word)`` with a Z/I word: CNOT ladder, Rz, ladder."""
    if not word.is_diagonal():
        raise PauliError(f"{word} is not diagonal")
    if word.is_identity():
        raise PauliError("identity word has no circuit (global phase)")
    n = word.qubit_count if n is None else n
    sup = word.support
    ladder = [Gate("CNOT", (a, b)) for a, b in zip(sup[:-1], sup[1:])]
    return Circuit(n, ladder + [Gate("Rz", (sup[-1],), 2.0 * angle)] + ladder[::-1])


def _block_gates(block: GroupBlock, weight: float, mirrored: bool) -> list[Gate]:
    terms = block.terms[::-1] if mirrored else block.terms
    out = list(block.layer)
    for c, w in terms:
        out.extend(exp_diagonal_word(w, c * weight).gates)
    out.extend(g.inverse() for g in reversed(block.layer))
    return out


def strang_schedule(m: int, steps: int, fuse: bool = True) -> list[tuple[int, float, bool]]:
    """``(block, weight, mirrored)`` entries for ``steps`` Strang steps of unit length.

    Blocks 0..m-1 run forward at weight 1/2, then m-1..0 mirrored at 1/2; the
    two halves of the middle block merge into one entry. With ``fuse`` the
    trailing half of block 0 also merges with the leading half of the next
    step (exact, the block's terms commute).
    """
    if m == 1:
        return [(0, float(steps), False)]
    one = [(i, 0.5, False) for i in range(m - 1)] + [(m - 1, 1.0, False)] + \
        [(i, 0.5, True) for i in reversed(range(m - 1))]
    if not fuse:
        return one * steps
    sched = list(one)
    for _ in range(steps - 1):
        b, w, mir = sched.pop()
        sched.append((b, w + 0.5, mir))
        sched.extend(one[1:])
    return sched


def trotter_step(blocks: list[GroupBlock], dt: float, n: int | None = None) -> Circuit:
    """One symmetric second-order step of length ``dt``."""
    if not blocks:
        return Circuit(n or 1)
    n = blocks[0].terms[0][1].qubit_count if n is None else n
    c = Circuit(n)
    for b, w, mir in strang_schedule(len(blocks), 1):
        c.extend(_block_gates(blocks[b], w * dt, mir))
    return c


def compile_evolution(h: PauliSum, t: float, steps: int, grouped: bool = True,
                      optimize: bool = True) -> Circuit:
    """``steps`` Trotter steps approximating ``exp(-i t h)`` up to the identity phase.

    The grouped variant fuses step boundaries and runs the full peephole
    pass. The ungrouped baseline (one exponential per term) keeps the plain
    step repetition and only removes strictly adjacent inverse pairs.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    n = h.qubit_count
    blocks, _ = prepare_blocks(h, grouped)
    c = Circuit(n)
    if t != 0 and blocks:
        dt = t / steps
        for b, w, mir in strang_schedule(len(blocks), steps, fuse=grouped):
            c.gates.extend(_block_gates(blocks[b], w * dt, mir))
    if not optimize:
        return c
    return optimize_cancellation(c) if grouped else cancel_adjacent_inverses(c)


def cancel_adjacent_inverses(c: Circuit) -> Circuit:
    """Remove inverse pairs that are neighbours in the gate list itself."""
    out: list[Gate] = []
    for g in c.gates:
        if out and _is_inverse_pair(out[-1], g):
            out.pop()
        else:
            out.append(g)
    return Circuit(c.qubit_count, out)


def _is_inverse_pair(a: Gate, b: Gate) -> bool:
    if a.kind in ROTATIONS or b.kind in ROTATIONS:
        return False
    return a.qubits == b.qubits and a.control == b.control and a.inverse().kind == b.kind


def optimize_cancellation(c: Circuit) -> Circuit:
    """Delete adjacent inverse pairs and merge adjacent Rz on the same wire.

    Adjacency is per wire: gates on other qubits may sit in between. The pass
    is stack-based so cancellations cascade; it is repeated to a fixed point.
    """
    gates = list(c.gates)
    while True:
        out = _peephole(gates, c.qubit_count)
        if len(out) == len(gates):
            return Circuit(c.qubit_count, out)
        gates = out


def _peephole(gates: list[Gate], n: int) -> list[Gate]:
    out: list[Gate | None] = []
    stacks: list[list[int]] = [[] for _ in range(n + 1)]
    for g in gates:
        wires = g.wires
        tops = {stacks[q][-1] if stacks[q] else -1 for q in wires}
        if len(tops) == 1:
            k = tops.pop()
            if k >= 0:
                prev = out[k]
                if prev.wires == wires:
                    if _is_inverse_pair(prev, g):
                        out[k] = None
                        for q in wires:
                            stacks[q].pop()
                        continue
                    if prev.kind == "Rz" and g.kind == "Rz" and prev.qubits == g.qubits and prev.control == g.control:
                        ang = prev.angle + g.angle
                        if abs(math.remainder(ang, 4 * math.pi)) < ANGLE_TOL:
                            out[k] = None
                            for q in wires:
                                stacks[q].pop()
                        else:
                            out[k] = Gate("Rz", g.qubits, ang, g.control)
                        continue
        out.append(g)
        for q in wires:
            stacks[q].append(len(out) - 1)
    return [g for g in out if g is not None]


def trotter_error_bound(h: PauliSum, t: float, steps: int, c_bound: float = 1.5,
                        include_identity: bool = False) -> float:
    """``c_bound * (t * ||h||_1)**3 / steps**2``."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    return c_bound * (t * one_norm(h, include_identity)) ** 3 / steps ** 2


def krylov_error_bound(M: int, steps: int, c_bound: float = 1.5) -> float:
    """Bound at ``t = (M-1) tau`` with the default ``tau = pi / (10 ||h||_1)``."""
    return c_bound * ((M - 1) * math.pi / 10) ** 3 / steps ** 2


# --- resource estimation -------------------------------------------------

@dataclass
class ResourceReport:
    hadamard_count: int
    cnot_count: int
    t_count: int
    depth: int
    rotation_count: int = 0
    variant: str = "with_qwc"

    def metrics(self) -> dict[str, int]:
        return {"hadamard": self.hadamard_count, "cnot": self.cnot_count, "t": self.t_count, "depth": self.depth}


def t_per_rotation(precision: float = 1e-6, a: float = 3.0) -> int:
    return int(round(a * math.log2(1.0 / precision)))


def circuit_depth(c: Circuit) -> int:
    level = [0] * (c.qubit_count + 1)
    depth = 0
    for g in c.gates:
        d = 1 + max(level[q] for q in g.wires)
        for q in g.wires:
            level[q] = d
        depth = max(depth, d)
    return depth


def count_resources(c: Circuit, rz_precision: float = 1e-6, a: float = 3.0, variant: str = "with_qwc") -> ResourceReport:
    h = sum(g.kind == "H" for g in c.gates)
    cx = sum(g.kind == "CNOT" for g in c.gates)
    rot = sum(g.kind in ROTATIONS for g in c.gates)
    return ResourceReport(h, cx, rot * t_per_rotation(rz_precision, a), circuit_depth(c), rot, variant)


def gamma(without: ResourceReport, with_: ResourceReport) -> dict[str, float]:
    """Relative reductions ``1 - with/without`` per metric."""
    out = {}
    for k, w in without.metrics().items():
        g = with_.metrics()[k]
        out[k] = 1.0 - g / w if w else 0.0
    return out


# --- fast statevector path -------------------------------------------------

class TrotterPropagator:
    """Applies compiled Trotter evolutions to (batches of) statevectors.

    Each block acts as its Clifford layer, an elementwise phase from the
    precomputed diagonal energies, and the inverse layer, which is exactly the
    unitary of the corresponding gate sequence. The identity coefficient is
    applied as a global phase.
    """

    def __init__(self, h: PauliSum, grouped: bool = True):
        self.h = h
        self.qubit_count = h.qubit_count
        self.blocks, self.identity = prepare_blocks(h, grouped)
        self.energies = [b.energies() for b in self.blocks]
        # per-qubit frame of each block: product of its layer gates on that qubit
        self.frames = []
        for b in self.blocks:
            f: dict[int, np.ndarray] = {}
            for g in b.layer:
                q = g.qubits[0]
                f[q] = g.matrix() @ f.get(q, np.eye(2))
            self.frames.append(f)

    def evolve(self, states: np.ndarray, t: float, steps: int) -> np.ndarray:
        """Apply ``steps`` Strang steps of total time ``t`` to a state or to columns of a matrix."""
        single = states.ndim == 1
        psi = np.array(states[:, None] if single else states, dtype=complex, copy=True)
        if t != 0 and self.blocks:
            dt = t / steps
            merged = []
            for b, w, _ in strang_schedule(len(self.blocks), steps):
                if merged and merged[-1][0] == b:
                    merged[-1] = (b, merged[-1][1] + w)
                else:
                    merged.append((b, w))
            cache: dict[tuple[int, float], np.ndarray] = {}
            frame: dict[int, np.ndarray] = {}
            for b, w in merged:
                if (b, w) not in cache:
                    cache[(b, w)] = np.exp(-1j * w * dt * self.energies[b])[:, None]
                psi = self._change_frame(psi, frame, self.frames[b])
                frame = self.frames[b]
                psi *= cache[(b, w)]
            psi = self._change_frame(psi, frame, {})
        psi *= np.exp(-1j * self.identity * t)
        return psi[:, 0] if single else psi

    def _change_frame(self, psi: np.ndarray, old: dict, new: dict) -> np.ndarray:
        """Undo the ``old`` basis change and apply ``new``, one 2x2 per qubit."""
        n, batch = self.qubit_count, psi.shape[1]
        for q in sorted(set(old) | set(new)):
            a, b = old.get(q), new.get(q)
            if a is b:
                continue
            m = (np.eye(2) if b is None else b) @ (np.eye(2) if a is None else a.conj().T)
            if np.allclose(m, np.eye(2), atol=1e-15):
                continue
            x = psi.reshape(2 ** q, 2, -1)
            if batch > 1:
                out = np.matmul(m, x)
            else:
                out = np.empty_like(x)
                out[:, 0] = m[0, 0] * x[:, 0] + m[0, 1] * x[:, 1]
                out[:, 1] = m[1, 0] * x[:, 0] + m[1, 1] * x[:, 1]
            psi = out.reshape(-1, batch)
        return psi
