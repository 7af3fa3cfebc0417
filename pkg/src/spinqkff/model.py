"""Encoded ESR Hamiltonian for NV centres, nuclear spins and a boson mode.

All coefficients are stored as H/hbar in numerical GHz, so that evolution
times are in ns. Quoted parameters (D, hyperfine, quadrupole, boson
frequency and coupling) enter as given; couplings derived from magnetons
(Zeeman terms and dipolar couplings) are converted with ``muB/h`` and
``muN/h`` and scaled by 2*pi under the default ``angular`` convention
(``ordinary`` leaves them in cycles per ns).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy import constants as sc

from .circuit import Circuit, Gate
from .encoding import CodeMap, QuditOperator, boson_operators, encode, encode_bitstring_state, identity_operator, \
    spin1_operators
from .pauli import PauliSum

NV = "NV_center"
N14 = "N14_impurity"

MU_B_OVER_H = sc.physical_constants["Bohr magneton in Hz/T"][0] * 1e-9
MU_N_OVER_H = sc.physical_constants["nuclear magneton in MHz/T"][0] * 1e-3
# mu0/(4 pi) * h / nm^3, in GHz per (GHz/T)^2
MU0_FACTOR = sc.mu_0 / (4 * math.pi) * sc.h * 1e18 / 1e-27 * 1e-9


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class PhysicalConstants:
    D: float = 2.87
    g_NV: float = 2.003
    g_N: float = 0.403573
    A_par: float = -0.00216
    A_perp: float = -0.0027
    Q: float = 0.005
    muB_over_h: float = MU_B_OVER_H
    muN_over_h: float = MU_N_OVER_H
    mu0_factor: float = MU0_FACTOR
    magnetic_convention: str = "angular"

    def __post_init__(self):
        if self.magnetic_convention not in ("ordinary", "angular"):
            raise ModelError(f"unknown magnetic_convention {self.magnetic_convention!r}")

    @property
    def magnetic_scale(self) -> float:
        return 2 * math.pi if self.magnetic_convention == "angular" else 1.0

    @property
    def electron_gyro(self) -> float:
        """g_NV * muB/h in GHz/T."""
        return self.g_NV * self.muB_over_h

    @property
    def nuclear_gyro(self) -> float:
        return self.g_N * self.muN_over_h


@dataclass(frozen=True)
class Defect:
    kind: str
    position: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.kind not in (NV, N14):
            raise ModelError(f"unknown defect kind {self.kind!r}")
        object.__setattr__(self, "position", tuple(float(x) for x in self.position))


@dataclass(frozen=True)
class BosonSpec:
    dim: int = 8
    omega: float = 5.8
    lam: float = 1.78
    coupling_axis: str = "x"

    def __post_init__(self):
        if self.dim < 2 or self.dim & (self.dim - 1):
            raise ModelError("dim must be a power of two")
        if self.coupling_axis not in ("x", "y", "z"):
            raise ModelError(f"bad coupling axis {self.coupling_axis!r}")


@dataclass(frozen=True)
class SystemSpec:
    """Declarative spin-defect layout.

    ``electronic_initial`` maps a tuple of levels (one per NV centre) to an
    amplitude; ``nuclear_initial_levels`` lists one level per nuclear register
    (NV nuclei first, then impurities).
    """

    defects: tuple[Defect, ...]
    B_field: tuple[float, float, float] = (0.0, 0.0, 2.0)
    boson: BosonSpec | None = field(default_factory=BosonSpec)
    bath_initial: tuple[float, ...] = ()
    electronic_initial: dict = field(default_factory=dict)
    nuclear_initial_levels: tuple[int, ...] = ()
    constants: PhysicalConstants = field(default_factory=PhysicalConstants)
    name: str = "custom"

    @property
    def nv_count(self) -> int:
        return sum(d.kind == NV for d in self.defects)

    @property
    def nuclear_count(self) -> int:
        return len(self.defects)

    @property
    def B_tesla(self) -> np.ndarray:
        return np.asarray(self.B_field, dtype=float) * 1e-3

    def with_constants(self, **kw) -> "SystemSpec":
        return replace(self, constants=replace(self.constants, **kw))


@dataclass(frozen=True)
class RegisterLayout:
    electronic: tuple[tuple[int, ...], ...]
    nuclear: tuple[tuple[int, ...], ...]
    boson: tuple[int, ...]
    qubit_count: int

    @classmethod
    def for_spec(cls, spec: SystemSpec) -> "RegisterLayout":
        q = 0
        elec = []
        for _ in range(spec.nv_count):
            elec.append((q, q + 1))
            q += 2
        nuc = []
        for d in spec.defects:
            if d.kind == NV:
                nuc.append((q, q + 1))
                q += 2
        for d in spec.defects:
            if d.kind == N14:
                nuc.append((q, q + 1))
                q += 2
        bos = ()
        if spec.boson is not None:
            nb = int(math.log2(spec.boson.dim))
            bos = tuple(range(q, q + nb))
            q += nb
        return cls(tuple(elec), tuple(nuc), bos, q)

    @property
    def subsystem_a(self) -> tuple[int, ...]:
        return tuple(q for reg in self.electronic for q in reg)

    @property
    def subsystem_b(self) -> tuple[int, ...]:
        a = set(self.subsystem_a)
        return tuple(q for q in range(self.qubit_count) if q not in a)

    def nuclear_register_of(self, spec: SystemSpec, defect_index: int) -> tuple[int, ...]:
        order = [i for i, d in enumerate(spec.defects) if d.kind == NV] + \
                [i for i, d in enumerate(spec.defects) if d.kind == N14]
        return self.nuclear[order.index(defect_index)]

    def electronic_register_of(self, spec: SystemSpec, defect_index: int) -> tuple[int, ...]:
        if spec.defects[defect_index].kind != NV:
            raise ModelError("defect has no electronic register")
        k = sum(d.kind == NV for d in spec.defects[:defect_index])
        return self.electronic[k]

    def to_dict(self) -> dict:
        return {"qubit_count": self.qubit_count, "electronic": [list(r) for r in self.electronic],
                "nuclear": [list(r) for r in self.nuclear], "boson": list(self.boson)}


@lru_cache(maxsize=None)
def _spin1() -> dict[str, PauliSum]:
    sx, sy, sz = spin1_operators()
    return {"x": encode(sx), "y": encode(sy), "z": encode(sz), "zz": encode(sz @ sz),
            "quad": encode(sz @ sz - (2.0 / 3.0) * identity_operator(3))}


def _on(op: PauliSum, reg, n: int) -> PauliSum:
    return op.embed(reg, n)


def _vector_op(reg, n: int) -> list[PauliSum]:
    s = _spin1()
    return [_on(s[a], reg, n) for a in "xyz"]


def build_zfs_zeeman(spec: SystemSpec, layout: RegisterLayout | None = None) -> PauliSum:
    layout = RegisterLayout.for_spec(spec) if layout is None else layout
    if spec.nv_count < 1:
        raise ModelError("spec has no NV centre")
    n, c = layout.qubit_count, spec.constants
    zeeman = c.electron_gyro * c.magnetic_scale * spec.B_tesla
    out = PauliSum.zero(n)
    for reg in layout.electronic:
        out = out + c.D * _on(_spin1()["zz"], reg, n)
        for b, s in zip(zeeman, _vector_op(reg, n)):
            if b != 0:
                out = out + b * s
    return out


def build_hyperfine_nuclear(spec: SystemSpec, layout: RegisterLayout | None = None) -> PauliSum:
    layout = RegisterLayout.for_spec(spec) if layout is None else layout
    n, c = layout.qubit_count, spec.constants
    zeeman = c.nuclear_gyro * c.magnetic_scale * spec.B_tesla
    out = PauliSum.zero(n)
    for i, d in enumerate(spec.defects):
        nreg = layout.nuclear_register_of(spec, i)
        ivec = _vector_op(nreg, n)
        for b, op in zip(zeeman, ivec):
            if b != 0:
                out = out + b * op
        out = out + c.Q * _on(_spin1()["quad"], nreg, n)
        if d.kind == NV:
            svec = _vector_op(layout.electronic_register_of(spec, i), n)
            out = out + c.A_par * (svec[2] @ ivec[2])
            out = out + c.A_perp * (svec[0] @ ivec[0] + svec[1] @ ivec[1])
    return out


def build_spin_boson(spec: SystemSpec, layout: RegisterLayout | None = None) -> PauliSum:
    if spec.boson is None:
        raise ModelError("spec has no boson mode")
    layout = RegisterLayout.for_spec(spec) if layout is None else layout
    n, bs = layout.qubit_count, spec.boson
    b, bd, num = boson_operators(bs.dim)
    number = _on(encode(num), layout.boson, n)
    quad = _on(encode(b + bd), layout.boson, n)
    axis = "xyz".index(bs.coupling_axis)
    out = bs.omega * number
    for reg in layout.electronic:
        out = out + bs.lam * (_vector_op(reg, n)[axis] @ quad)
    return out


def dipolar_prefactor(alpha1: float, alpha2: float, r_nm: float, constants: PhysicalConstants) -> float:
    """mu0 a1 a2 / (4 pi r^3) / h in GHz for gyromagnetic factors in GHz/T."""
    return constants.mu0_factor * alpha1 * alpha2 / r_nm ** 3 * constants.magnetic_scale


def _dipole_site(spec: SystemSpec, layout: RegisterLayout, i: int):
    c = spec.constants
    if spec.defects[i].kind == NV:
        return layout.electronic_register_of(spec, i), c.electron_gyro
    return layout.nuclear_register_of(spec, i), c.nuclear_gyro


def build_dipole(spec: SystemSpec, layout: RegisterLayout | None = None) -> PauliSum:
    layout = RegisterLayout.for_spec(spec) if layout is None else layout
    n = layout.qubit_count
    out = PauliSum.zero(n)
    for i in range(len(spec.defects)):
        for j in range(i + 1, len(spec.defects)):
            rvec = np.subtract(spec.defects[j].position, spec.defects[i].position)
            r = float(np.linalg.norm(rvec))
            if r == 0:
                raise ModelError(f"defects {i} and {j} coincide")
            rhat = rvec / r
            reg1, a1 = _dipole_site(spec, layout, i)
            reg2, a2 = _dipole_site(spec, layout, j)
            s1, s2 = _vector_op(reg1, n), _vector_op(reg2, n)
            pref = dipolar_prefactor(a1, a2, r, spec.constants)
            terms = PauliSum.zero(n)
            for k in range(3):
                terms = terms + s1[k] @ s2[k]
            for k in range(3):
                for l in range(3):
                    w = 3.0 * rhat[k] * rhat[l]
                    if abs(w) > 1e-15:
                        terms = terms - w * (s1[k] @ s2[l])
            out = out + pref * terms
    return out


def build_total(spec: SystemSpec) -> tuple[PauliSum, RegisterLayout]:
    layout = RegisterLayout.for_spec(spec)
    h = build_zfs_zeeman(spec, layout) + build_hyperfine_nuclear(spec, layout)
    if spec.boson is not None:
        h = h + build_spin_boson(spec, layout)
    if len(spec.defects) > 1:
        h = h + build_dipole(spec, layout)
    return h.real(), layout


def magnetic_moment_x(spec: SystemSpec, layout: RegisterLayout | None = None) -> PauliSum:
    """Transverse magnetic moment in GHz/T, weighted by gyromagnetic ratios."""
    layout = RegisterLayout.for_spec(spec) if layout is None else layout
    n, c = layout.qubit_count, spec.constants
    sx = _spin1()["x"]
    out = PauliSum.zero(n)
    for reg in layout.electronic:
        out = out + c.electron_gyro * _on(sx, reg, n)
    for reg in layout.nuclear:
        out = out + c.nuclear_gyro * _on(sx, reg, n)
    return out.real()


def electronic_bitstring_amplitudes(spec: SystemSpec) -> dict[str, complex]:
    code = CodeMap.gray(3)
    out: dict[str, complex] = {}
    for levels, amp in spec.electronic_initial.items():
        levels = tuple(levels) if isinstance(levels, (tuple, list)) else (levels,)
        if len(levels) != spec.nv_count:
            raise ModelError("electronic_initial keys need one level per NV centre")
        bits = encode_bitstring_state(levels, [code] * len(levels))
        out[bits] = out.get(bits, 0) + complex(amp)
    return out


def initial_state_circuit(spec: SystemSpec, layout: RegisterLayout | None = None) -> Circuit:
    """Product preparation: electronic amplitude map, nuclear levels, Ry-rotated bath."""
    layout = RegisterLayout.for_spec(spec) if layout is None else layout
    c = Circuit(layout.qubit_count)
    amps = {b: a for b, a in electronic_bitstring_amplitudes(spec).items() if abs(a) > 0}
    norm = sum(abs(a) ** 2 for a in amps.values())
    if amps and abs(norm - 1.0) > 1e-12:
        raise ModelError(f"electronic amplitudes not normalized (norm^2 = {norm})")
    elec_qubits = layout.subsystem_a
    sub = Circuit(len(elec_qubits))
    if len(amps) == 1:
        (bits,) = amps
        for q, bit in enumerate(bits):
            if bit == "1":
                sub.append(Gate("X", (q,)))
    elif len(amps) == 2:
        sub = _two_term_prep(amps)
    elif len(amps) > 2:
        raise ModelError("electronic_initial supports at most two basis components")
    for g in sub.gates:
        c.append(Gate(g.kind, tuple(elec_qubits[q] for q in g.qubits), g.angle))
    levels = list(spec.nuclear_initial_levels) or [0] * len(layout.nuclear)
    if len(levels) != len(layout.nuclear):
        raise ModelError("one nuclear level per nuclear register required")
    code = CodeMap.gray(3)
    for reg, lev in zip(layout.nuclear, levels):
        for q, bit in zip(reg, encode_bitstring_state([lev], [code])):
            if bit == "1":
                c.append(Gate("X", (q,)))
    if spec.bath_initial:
        if len(spec.bath_initial) != len(layout.boson):
            raise ModelError("one Ry angle per boson qubit required")
        for q, ang in zip(layout.boson, spec.bath_initial):
            c.append(Gate("Ry", (q,), float(ang)))
    return c


def _two_term_prep(amps: dict[str, complex]) -> Circuit:
    (s1, a1), (s2, a2) = amps.items()
    n = len(s1)
    diff = [q for q in range(n) if s1[q] != s2[q]]
    p = diff[0]
    if s1[p] == "1":
        (s1, a1), (s2, a2) = (s2, a2), (s1, a1)
    c = Circuit(n)
    for q, bit in enumerate(s1):
        if bit == "1":
            c.append(Gate("X", (q,)))
    theta = 2 * math.atan2(abs(a2), abs(a1))
    phi = float(np.angle(a2) - np.angle(a1))
    if abs(theta - math.pi / 2) < 1e-14 and abs(phi) < 1e-14:
        c.append(Gate("H", (p,)))
    else:
        c.append(Gate("Ry", (p,), theta))
        if abs(phi) > 1e-14:
            c.append(Gate("Rz", (p,), phi))
    # pivot is 1 exactly on the s2 branch; flip every other differing qubit there
    for q in diff[1:]:
        c.append(Gate("CNOT", (p, q)))
    return c


# --- presets -------------------------------------------------------------

_BATH = (math.pi / 2, math.pi / 4, math.pi / 8)
_S = 1 / math.sqrt(2)


def triangle_positions(side_nm: float = 1.0) -> list[tuple[float, float, float]]:
    """Equilateral triangle in the xz-plane centred at the origin, apex on +z.

    The base edge is perpendicular to the default field axis.
    """
    r = side_nm / math.sqrt(3)
    return [(r * math.cos(a), 0.0, r * math.sin(a)) for a in (math.pi / 2, 7 * math.pi / 6, 11 * math.pi / 6)]


def preset(name: str, constants: PhysicalConstants | None = None) -> SystemSpec:
    constants = PhysicalConstants() if constants is None else constants
    if name == "config1":
        return SystemSpec((Defect(NV),), electronic_initial={(0,): _S, (2,): _S},
                          bath_initial=_BATH, nuclear_initial_levels=(0,), constants=constants, name=name)
    if name == "config2":
        tri = triangle_positions()
        return SystemSpec(tuple(Defect(NV, p) for p in tri), electronic_initial={(0, 0, 0): _S, (2, 2, 2): _S},
                          bath_initial=_BATH, nuclear_initial_levels=(0, 0, 0), constants=constants, name=name)
    if name == "config3":
        tri = triangle_positions()
        return SystemSpec((Defect(NV, tri[0]), Defect(N14, tri[1]), Defect(N14, tri[2])),
                          electronic_initial={(0,): _S, (2,): _S}, bath_initial=_BATH,
                          nuclear_initial_levels=(0, 0, 0), constants=constants, name=name)
    raise ModelError(f"unknown preset {name!r}")


PRESETS = ("config1", "config2", "config3")
