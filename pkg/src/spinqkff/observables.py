"""Absorption spectra and l1-coherence from Krylov trajectories."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from .pauli import PauliSum
from .sqkff import KrylovConfig, KrylovMatrices, KrylovRun, ReferenceSet, TrajectoryResult, run_sqkff
from .statevector import compiled, prepare
from .circuit import Circuit


@dataclass
class SpectrumConfig:
    """Time grid and frequency grid for the spectrum.

    The default frequency grid has the record's resolution,
    ``omega_k = 2 pi k / t_max``, on ``[0, omega_max]``.
    """

    t_max: float = 100.0
    dt: float = 100.0 / 2048
    damping_eta: float = 0.02
    omega_grid: np.ndarray | None = None
    omega_max: float = 8.0

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.damping_eta < 0:
            raise ValueError("damping_eta must be >= 0")
        steps = self.t_max / self.dt
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise ValueError("t_max must be an integer multiple of dt")
        if self.omega_grid is None:
            step = 2 * np.pi / self.t_max
            self.omega_grid = step * np.arange(int(np.floor(self.omega_max / step)) + 1)
        self.omega_grid = np.asarray(self.omega_grid, dtype=float)

    @property
    def bin_width(self) -> float:
        return float(np.min(np.diff(self.omega_grid))) if self.omega_grid.size > 1 else 0.0

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(int(round(self.t_max / self.dt)) + 1)


@dataclass(frozen=True)
class CoherencePartition:
    subsystem_a_qubits: tuple[int, ...]
    subsystem_b_qubits: tuple[int, ...]

    def __post_init__(self):
        a, b = set(self.subsystem_a_qubits), set(self.subsystem_b_qubits)
        if a & b:
            raise ValueError("subsystems overlap")
        if a | b != set(range(len(a) + len(b))):
            raise ValueError("subsystems must cover qubits 0..n-1")

    @classmethod
    def from_a(cls, a, n: int) -> "CoherencePartition":
        a = tuple(sorted(a))
        return cls(a, tuple(q for q in range(n) if q not in a))


@dataclass
class ZResult:
    times: np.ndarray
    z: np.ndarray
    eta_norm: float
    zero: bool = False
    psi_run: KrylovRun | None = None
    eta_run: KrylovRun | None = None


def z_function(h: PauliSum, mx: PauliSum, psi0, cfg: KrylovConfig, times,
               cfg_eta: KrylovConfig | None = None) -> ZResult:
    """``<psi0| e^{iHt} Mx e^{-iHt} Mx |psi0>`` from two Krylov runs.

    The second run starts from ``Mx|psi0>`` normalized; its reference
    bitstrings are selected independently. The cross matrix
    ``A = <phi^psi|Mx|phi^eta>`` is built from the basis vectors.
    """
    times = np.asarray(times, dtype=float)
    state = prepare(psi0) if isinstance(psi0, Circuit) else np.asarray(psi0, dtype=complex)
    eta = compiled(mx).apply(state)
    norm = float(np.linalg.norm(eta))
    if norm < 1e-12:
        return ZResult(times, np.zeros(times.shape, dtype=complex), 0.0, True)
    psi_run = run_sqkff(h, psi0, cfg, times)
    eta_run = run_sqkff(h, eta / norm, cfg if cfg_eta is None else cfg_eta, times)
    bp, be = psi_run.mats.basis, eta_run.mats.basis
    a = bp.conj().T @ compiled(mx).apply(be)
    z = norm * np.einsum("ti,ij,tj->t", psi_run.traj.coefficients.conj(), a, eta_run.traj.coefficients)
    return ZResult(times, z, norm, False, psi_run, eta_run)


def absorption_spectrum(z, scfg: SpectrumConfig) -> tuple[np.ndarray, np.ndarray]:
    """Normalized ``omega * Im chi(omega)`` from ``Z(t)`` on ``scfg.times``.

    ``C(t) = 2 Im Z(t)``; ``chi(omega) = -int e^{(i omega - eta) t} C(t) dt``
    with the sign fixed so that upward transitions absorb. The integral is a
    trapezoid over the time grid.
    """
    z = np.asarray(z)
    t = scfg.times
    if z.shape != t.shape:
        raise ValueError(f"Z has {z.shape[0]} samples, time grid has {t.shape[0]}")
    c = 2.0 * z.imag
    w = scfg.omega_grid
    kernel = np.exp(np.outer(1j * w, t) - scfg.damping_eta * t)
    chi = -trapezoid(kernel * c, t, axis=1)
    intensity = w * chi.imag
    peak = np.max(np.abs(intensity))
    if peak > 0:
        intensity = intensity / peak
    return w, intensity


def dominant_peaks(omega: np.ndarray, intensity: np.ndarray, count: int = 2) -> list[float]:
    """Positions of the ``count`` strongest interior lines, absorptive or emissive.

    Lines are local maxima of ``|intensity|``, ranked by magnitude.
    """
    a = np.abs(intensity)
    i = np.arange(1, len(a) - 1)
    is_max = (a[i] >= a[i - 1]) & (a[i] > a[i + 1])
    idx = i[is_max]
    idx = idx[np.argsort(-a[idx])][:count]
    return sorted(float(omega[k]) for k in idx)


def l1_coherence_direct(state: np.ndarray) -> float:
    """Sum of absolute off-diagonal entries of a density matrix or pure state."""
    s = np.asarray(state)
    if s.ndim == 1:
        a = np.abs(s)
        return float(a.sum() ** 2 - (a ** 2).sum())
    return float(np.abs(s).sum() - np.abs(np.diag(s)).sum())


def amplitude_table(mats: KrylovMatrices) -> np.ndarray:
    """``<k|phi_{mr}>`` for every basis vector; computed once per run."""
    if mats.basis is None:
        raise ValueError("matrices were assembled without basis vectors")
    return mats.basis


def l1_coherence_krylov(mats: KrylovMatrices, refs: ReferenceSet, traj: TrajectoryResult,
                        partition: CoherencePartition | None = None, termwise: bool = False) -> np.ndarray:
    """l1-coherence of ``sum c_{mr}(t) phi_{mr}`` at every trajectory time.

    With a partition the reduced state of subsystem A is used:
    ``sum_{i != j} |sum_b gamma_ib gamma*_jb|``. ``termwise`` moves the
    absolute value inside the sum over ``b``, which gives an upper bound.
    """
    table = amplitude_table(mats)
    psi = traj.coefficients @ table.T  # (T, dim)
    if partition is None:
        a = np.abs(psi)
        return a.sum(axis=1) ** 2 - (a ** 2).sum(axis=1)
    n = refs.qubit_count
    keep = list(partition.subsystem_a_qubits)
    rest = list(partition.subsystem_b_qubits)
    gam = psi.reshape((-1,) + (2,) * n).transpose([0] + [q + 1 for q in keep + rest])
    gam = gam.reshape(psi.shape[0], 2 ** len(keep), -1)
    if termwise:
        g = np.abs(gam)
        rho = np.einsum("tib,tjb->tij", g, g)
    else:
        rho = np.abs(np.einsum("tib,tjb->tij", gam, gam.conj()))
    diag = np.einsum("tii->t", rho)
    return rho.sum(axis=(1, 2)) - diag
