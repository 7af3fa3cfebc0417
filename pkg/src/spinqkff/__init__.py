"""Spin-defect device workbench: encoded ESR Hamiltonians, QWC-grouped Trotter
circuits, selected Krylov fast-forwarding and an exact sparse reference."""

from .pauli import PauliSum, PauliWord, one_norm, qwc, qwc_partition
from .model import PRESETS, SystemSpec, build_total, initial_state_circuit, magnetic_moment_x, preset
from .trotter import compile_evolution, count_resources, gamma, trotter_error_bound
from .sqkff import KrylovConfig, run_sqkff
from .observables import SpectrumConfig, absorption_spectrum, l1_coherence_direct, l1_coherence_krylov, z_function
from .oracle import exact_propagate, oracle_observables

__version__ = "0.1.0"
