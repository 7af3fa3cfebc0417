"""Multi-reference selected Krylov fast-forwarding.

The Krylov basis is ``phi_{m,r} = U_m |r>`` with ``U_m ~ exp(-i m tau H)``
for ``m = 0..M-1`` and references ``|r>``: the initial state followed by
the most probable bitstrings of the state evolved to ``(M-1) tau``. The
projected equation ``i S dc/dt = H c`` is solved in closed form after
whitening ``S`` on its well-conditioned subspace.

Basis index of ``(m, r)`` is ``m * R + r``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .circuit import Circuit, Gate
from .pauli import PauliSum, one_norm
from .statevector import ShotPlan, bitstring, compiled, prepare, probabilities, sample_bitstrings
from .trotter import TrotterPropagator


class KrylovError(RuntimeError):
    """Numerical failure in the projected problem (e.g. nothing retained)."""


def default_tau(h: PauliSum) -> float:
    """``pi / (10 ||h||_1)`` with the identity coefficient included."""
    norm = one_norm(h, include_identity=True)
    if norm == 0:
        return 1.0
    return math.pi / (10.0 * norm)


@dataclass
class KrylovConfig:
    M: int = 10
    R: int = 1
    tau: float | None = None
    s_threshold: float = 1e-8
    element_plan: ShotPlan = field(default_factory=ShotPlan)
    trotter_steps: int = 42
    exact_elements: bool = False
    grouped: bool = True

    def __post_init__(self):
        if self.M < 1 or self.R < 1:
            raise ValueError("M and R must be >= 1")
        if self.trotter_steps < 1:
            raise ValueError("trotter_steps must be >= 1")
        if self.tau is not None and self.tau <= 0:
            raise ValueError("tau must be positive")

    def resolved_tau(self, h: PauliSum) -> float:
        tau = default_tau(h) if self.tau is None else self.tau
        norm = one_norm(h, include_identity=True)
        if norm > 0 and tau > math.pi / (2 * norm) * (1 + 1e-12):
            raise ValueError(f"tau={tau} exceeds pi/(2 ||H||_1)")
        return tau


class Evolver:
    """``U_k |v>`` for the Krylov time steps, Trotterized or exact."""

    def __init__(self, h: PauliSum, tau: float, steps: int, exact: bool = False, grouped: bool = True):
        self.h, self.tau, self.steps, self.exact = h, tau, steps, exact
        if exact:
            self._op = compiled(h).to_sparse()
        else:
            self._prop = TrotterPropagator(h, grouped)

    def evolve(self, states: np.ndarray, k: int) -> np.ndarray:
        """Apply ``U_k``; every ``k`` uses the same step count."""
        if k == 0:
            return np.array(states, dtype=complex, copy=True)
        if self.exact:
            from scipy.sparse.linalg import expm_multiply

            return expm_multiply((-1j * k * self.tau) * self._op, states)
        return self._prop.evolve(states, k * self.tau, self.steps)

    def ladder(self, states: np.ndarray, M: int) -> list[np.ndarray]:
        """``[U_0 v, U_1 v, ..., U_{M-1} v]``."""
        if self.exact and M > 1:
            from scipy.sparse.linalg import expm_multiply

            out = expm_multiply(-1j * self._op, states, start=0.0, stop=(M - 1) * self.tau, num=M, endpoint=True)
            return [np.asarray(o) for o in out]
        return [self.evolve(states, k) for k in range(M)]


@dataclass
class ReferenceSet:
    """``psi0`` followed by ``R - 1`` selected bitstrings."""

    psi0: np.ndarray
    bitstrings: list[str]
    probabilities: dict[str, float]
    padded: bool = False
    psi0_circuit: Circuit | None = None

    def __len__(self) -> int:
        return 1 + len(self.bitstrings)

    @property
    def qubit_count(self) -> int:
        return int(round(math.log2(self.psi0.shape[0])))

    def states(self) -> np.ndarray:
        """Columns ``|r>`` in reference order."""
        dim = self.psi0.shape[0]
        out = np.zeros((dim, len(self)), dtype=complex)
        out[:, 0] = self.psi0
        for j, b in enumerate(self.bitstrings, start=1):
            out[int(b, 2), j] = 1.0
        return out

    def circuits(self) -> list[Circuit | None]:
        """Preparation circuits; bitstrings are X layers."""
        n = self.qubit_count
        out: list[Circuit | None] = [self.psi0_circuit]
        for b in self.bitstrings:
            out.append(Circuit(n, [Gate("X", (q,)) for q, c in enumerate(b) if c == "1"]))
        return out


def _as_state(psi0) -> tuple[np.ndarray, Circuit | None]:
    if isinstance(psi0, Circuit):
        return prepare(psi0), psi0
    v = np.asarray(psi0, dtype=complex)
    return v / np.linalg.norm(v), None


def select_references(h: PauliSum, psi0, cfg: KrylovConfig, evolver: Evolver | None = None) -> ReferenceSet:
    """Top ``R - 1`` bitstrings of ``U_{M-1}|psi0>``, ties by ascending value.

    Exact plans use the probabilities; sampled plans use empirical counts.
    When fewer outcomes are available the list is padded with the smallest
    unseen bitstrings and ``padded`` is set.
    """
    state, circ = _as_state(psi0)
    n = int(round(math.log2(state.shape[0])))
    if cfg.R > 2 ** n:
        raise ValueError(f"R={cfg.R} exceeds the number of available references")
    need = cfg.R - 1
    if need == 0:
        return ReferenceSet(state, [], {}, False, circ)
    if evolver is None:
        evolver = Evolver(h, cfg.resolved_tau(h), cfg.trotter_steps, cfg.exact_elements, cfg.grouped)
    evolved = evolver.evolve(state, cfg.M - 1)
    plan = cfg.element_plan
    if plan.exact:
        p = probabilities(evolved)
        nz = np.nonzero(p > 1e-14)[0]
        ranked = sorted(nz, key=lambda i: (-p[i], i))
        probs = {bitstring(int(i), n): float(p[i]) for i in ranked[:need]}
    else:
        counts = sample_bitstrings(evolved, plan.shots, plan.seed)
        ranked_b = sorted(counts, key=lambda b: (-counts[b], int(b, 2)))
        ranked = [int(b, 2) for b in ranked_b]
        probs = {b: counts[b] / plan.shots for b in ranked_b[:need]}
    chosen = [int(i) for i in ranked[:need]]
    padded = len(chosen) < need
    if padded:
        taken = set(chosen)
        i = 0
        while len(chosen) < need:
            if i not in taken:
                chosen.append(i)
                probs.setdefault(bitstring(i, n), 0.0)
            i += 1
    return ReferenceSet(state, [bitstring(i, n) for i in chosen], probs, padded, circ)


@dataclass
class KrylovMatrices:
    S: np.ndarray
    H: np.ndarray
    M: int
    R: int
    tau: float
    evaluated_count: int
    basis: np.ndarray | None = None  # (dim, M*R) columns phi_{m,r}

    @staticmethod
    def index(m: int, r: int, R: int) -> int:
        return m * R + r


def distinct_element_count(M: int, R: int) -> int:
    """``MR + (2M-1)(R-1)R/2`` generators under the Toeplitz rule."""
    return M * R + (2 * M - 1) * (R - 1) * R // 2


def _element_rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, *key]))


def _sampled_generators(h: PauliSum, refs: np.ndarray, ladder, plan: ShotPlan):
    """Binomial Hadamard-test estimates of the distinct generators.

    S-elements take one test pair each; H-elements one pair per Pauli term
    (LCU reduction), recombined with the term coefficients.
    """
    from .statevector import apply_pauli_word, binomial_estimate

    M, R = len(ladder), refs.shape[1]
    gs = np.zeros((M, R, R), dtype=complex)
    gh = np.zeros((M, R, R), dtype=complex)
    prefs = [(c, np.column_stack([apply_pauli_word(refs[:, j], w) for j in range(R)])) for c, w in h.terms]
    for k in range(M):
        amp_s = refs.conj().T @ ladder[k]
        amp_p = [(c, pr.conj().T @ ladder[k]) for c, pr in prefs]
        for a in range(R):
            for b in range(R):
                if k == 0 and b < a:
                    continue
                if k == 0 and a == b:
                    gs[k, a, b] = 1.0
                else:
                    gs[k, a, b] = binomial_estimate(amp_s[a, b], plan.shots, _element_rng(plan.seed, 0, k, a, b))
                val = 0.0
                for j, (c, amp) in enumerate(amp_p):
                    val += c * binomial_estimate(amp[a, b], plan.shots, _element_rng(plan.seed, 1 + j, k, a, b))
                gh[k, a, b] = val.real if (k == 0 and a == b) else val
        if k == 0:
            iu = np.triu_indices(R, 1)
            gs[0].T[iu] = gs[0][iu].conj()
            gh[0].T[iu] = gh[0][iu].conj()
    return gs, gh


def _fill(gs: np.ndarray, gh: np.ndarray):
    M, R = gs.shape[0], gs.shape[1]
    S = np.zeros((M * R, M * R), dtype=complex)
    H = np.zeros_like(S)
    for mp in range(M):
        for m in range(M):
            rows, cols = slice(mp * R, (mp + 1) * R), slice(m * R, (m + 1) * R)
            if m >= mp:
                S[rows, cols] = gs[m - mp]
                H[rows, cols] = gh[m - mp]
            else:
                S[rows, cols] = gs[mp - m].conj().T
                H[rows, cols] = gh[mp - m].conj().T
    return S, H


def assemble(h: PauliSum, refs: ReferenceSet, cfg: KrylovConfig, evolver: Evolver | None = None) -> KrylovMatrices:
    """Toeplitz-filled ``S`` and ``H`` from the distinct generators.

    Generators are ``<r'|U_k|r>`` and ``<r'|H U_k|r>`` for ``k = 0..M-1``.
    Negative ``k`` follow from ``U_{-k} = U_k^dagger``, which the symmetric
    Trotter product satisfies exactly.
    """
    tau = cfg.resolved_tau(h)
    if evolver is None:
        evolver = Evolver(h, tau, cfg.trotter_steps, cfg.exact_elements, cfg.grouped)
    R = len(refs)
    if R != cfg.R:
        raise ValueError(f"reference set has {R} entries, config expects {cfg.R}")
    states = refs.states()
    ladder = evolver.ladder(states, cfg.M)
    if cfg.element_plan.exact:
        hrefs = compiled(h).apply(states)
        gs = np.array([states.conj().T @ v for v in ladder])
        gh = np.array([hrefs.conj().T @ v for v in ladder])
        # k = 0 blocks are Hermitian by definition; symmetrize rounding
        gs[0] = 0.5 * (gs[0] + gs[0].conj().T)
        gh[0] = 0.5 * (gh[0] + gh[0].conj().T)
    else:
        gs, gh = _sampled_generators(h, states, ladder, cfg.element_plan)
    S, H = _fill(gs, gh)
    basis = np.concatenate(ladder, axis=1)
    return KrylovMatrices(S, H, cfg.M, R, tau, distinct_element_count(cfg.M, R), basis)


def assemble_brute_force(h: PauliSum, refs: ReferenceSet, cfg: KrylovConfig,
                         evolver: Evolver | None = None) -> KrylovMatrices:
    """Every entry ``<r'|U_{m-m'}|r>`` evaluated independently (exact plan)."""
    tau = cfg.resolved_tau(h)
    if evolver is None:
        evolver = Evolver(h, tau, cfg.trotter_steps, cfg.exact_elements, cfg.grouped)
    states = refs.states()
    hst = compiled(h).apply(states)
    M, R = cfg.M, len(refs)
    S = np.zeros((M * R, M * R), dtype=complex)
    H = np.zeros_like(S)
    for mp in range(M):
        for rp in range(R):
            for m in range(M):
                for r in range(R):
                    k = m - mp
                    v = evolver.evolve(states[:, r], abs(k))
                    if k >= 0:
                        s = np.vdot(states[:, rp], v)
                        hv = np.vdot(hst[:, rp], v)
                    else:
                        # U_{-|k|} = U_{|k|}^dagger
                        vp = evolver.evolve(states[:, rp], -k)
                        s = np.vdot(vp, states[:, r])
                        hv = np.vdot(vp, hst[:, r])
                    S[mp * R + rp, m * R + r] = s
                    H[mp * R + rp, m * R + r] = hv
    return KrylovMatrices(S, H, M, R, tau, (M * R) ** 2, None)


def regularize(S: np.ndarray, threshold: float = 1e-8) -> tuple[np.ndarray, int]:
    """Whitening map ``W = V_k diag(lambda_k**-1/2)`` over eigenvalues above ``threshold * lambda_max``."""
    S = 0.5 * (S + S.conj().T)
    lam, vec = np.linalg.eigh(S)
    top = lam.max() if lam.size else 0.0
    keep = lam > threshold * top if top > 0 else np.zeros(lam.shape, dtype=bool)
    k = int(keep.sum())
    if k == 0:
        raise KrylovError("no eigenvalue of S above threshold; retained subspace is empty")
    return vec[:, keep] / np.sqrt(lam[keep]), k


@dataclass
class TrajectoryResult:
    times: np.ndarray
    coefficients: np.ndarray  # (len(times), M*R)
    autocorrelation: np.ndarray
    retained_dim: int


def propagate(mats: KrylovMatrices, times, cfg: KrylovConfig | None = None, c0_index: int = 0) -> TrajectoryResult:
    """Closed-form solution of ``i S dc/dt = H c`` with ``c(0) = e_{c0_index}``."""
    times = np.asarray(times, dtype=float)
    if times.size and (times[0] != 0 or np.any(np.diff(times) < 0)):
        raise ValueError("times must be sorted and start at 0")
    threshold = 1e-8 if cfg is None else cfg.s_threshold
    W, k = regularize(mats.S, threshold)
    ht = W.conj().T @ mats.H @ W
    e, q = np.linalg.eigh(0.5 * (ht + ht.conj().T))
    y0 = W.conj().T @ mats.S[:, c0_index]
    z0 = q.conj().T @ y0
    phases = np.exp(-1j * np.outer(times, e))
    coeffs = (phases * z0) @ (W @ q).T
    # the part of c(0) outside the retained subspace is a near-null vector of S; it is
    # carried unchanged so that c(0) is exactly the unit vector
    c0 = np.zeros(mats.S.shape[0], dtype=complex)
    c0[c0_index] = 1.0
    coeffs += c0 - (W @ q) @ z0
    traj = TrajectoryResult(times, coeffs, np.empty(0), k)
    traj.autocorrelation = autocorrelation(mats, traj)
    return traj


def autocorrelation(mats: KrylovMatrices, traj: TrajectoryResult) -> np.ndarray:
    """``|sum_{mr} c_{mr}(t) S_{(0,0),(m,r)}|**2``."""
    overlap = traj.coefficients @ mats.S[0, :]
    return np.abs(overlap) ** 2


def reconstruct(mats: KrylovMatrices, traj: TrajectoryResult) -> np.ndarray:
    """States ``sum c_{mr} phi_{mr}`` as rows, one per time."""
    if mats.basis is None:
        raise ValueError("matrices were assembled without basis vectors")
    return traj.coefficients @ mats.basis.T


@dataclass
class KrylovRun:
    refs: ReferenceSet
    mats: KrylovMatrices
    traj: TrajectoryResult
    cfg: KrylovConfig


def run_sqkff(h: PauliSum, psi0, cfg: KrylovConfig, times) -> KrylovRun:
    """Select references, assemble, and propagate."""
    tau = cfg.resolved_tau(h)
    evolver = Evolver(h, tau, cfg.trotter_steps, cfg.exact_elements, cfg.grouped)
    refs = select_references(h, psi0, cfg, evolver)
    mats = assemble(h, refs, cfg, evolver)
    return KrylovRun(refs, mats, propagate(mats, times, cfg), cfg)
