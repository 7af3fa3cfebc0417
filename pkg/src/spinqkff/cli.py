"""Command-line front end.

``spinqkff run`` executes one workflow on a preset or a YAML/JSON system
document and writes CSV/JSON artifacts; ``spinqkff validate`` checks a
document and echoes the normalized system.
"""
from __future__ import annotations

import argparse
import hashlib
import io
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .model import N14, NV, BosonSpec, Defect, ModelError, PhysicalConstants, SystemSpec, build_total, \
    initial_state_circuit, magnetic_moment_x, preset, PRESETS
from .observables import CoherencePartition, SpectrumConfig, absorption_spectrum, dominant_peaks, \
    l1_coherence_krylov, z_function
from .oracle import OracleError, exact_propagate, oracle_observables
from .pauli import one_norm
from .sqkff import KrylovConfig, KrylovError, default_tau, run_sqkff
from .statevector import ShotPlan, prepare
from .trotter import compile_evolution, count_resources, gamma, trotter_error_bound

log = logging.getLogger("spinqkff")

WORKFLOWS = ("hamiltonian", "resources", "autocorrelation", "spectrum", "coherence", "oracle", "compare")
TABLE_STEPS = (9, 19, 42)
WORKERS_ENV = "SPINQKFF_WORKERS"
EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3


class ConfigError(ValueError):
    """Validation failure; ``errors`` holds ``(field_path, message)`` pairs."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(f"{p}: {m}" for p, m in self.errors))


# --- config documents ------------------------------------------------------

_KINDS = {"NV": NV, NV: NV, "N14": N14, N14: N14}
_CONST_KEYS = {f.name for f in PhysicalConstants.__dataclass_fields__.values()}


def _vec3(value, path, errors):
    try:
        v = tuple(float(x) for x in value)
    except (TypeError, ValueError):
        errors.append((path, "expected three numbers"))
        return None
    if len(v) != 3:
        errors.append((path, "expected three numbers"))
        return None
    return v


def _amplitude(value, path, errors):
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    try:
        return complex(float(value))
    except (TypeError, ValueError):
        errors.append((path, "amplitude must be a number or [re, im]"))
        return None


def validate(doc: dict) -> tuple[SystemSpec, list[str]]:
    """Normalize a system document; raises :class:`ConfigError` listing every violation."""
    errors: list[tuple[str, str]] = []
    warnings: list[str] = []
    if not isinstance(doc, dict):
        raise ConfigError([("$", "document must be a mapping")])
    if "preset" in doc:
        try:
            base = preset(str(doc["preset"]))
        except ModelError as e:
            raise ConfigError([("preset", str(e))])
        return base, warnings

    defects = []
    raw = doc.get("defects")
    if not isinstance(raw, list) or not raw:
        errors.append(("defects", "required non-empty list"))
        raw = []
    for i, d in enumerate(raw):
        path = f"defects[{i}]"
        if not isinstance(d, dict):
            errors.append((path, "expected a mapping"))
            continue
        kind = _KINDS.get(str(d.get("kind")))
        if kind is None:
            errors.append((f"{path}.kind", f"unknown kind {d.get('kind')!r} (NV or N14)"))
            continue
        pos = _vec3(d.get("position_nm", (0, 0, 0)), f"{path}.position_nm", errors)
        if pos is not None:
            defects.append(Defect(kind, pos))
    if defects and not any(d.kind == NV for d in defects):
        errors.append(("defects", "at least one NV centre required"))

    if "B_field_mT" in doc:
        b = _vec3(doc["B_field_mT"], "B_field_mT", errors)
    else:
        b = (0.0, 0.0, 2.0)
        warnings.append("B_field_mT missing; using 2 mT along z")

    boson = None
    if doc.get("boson", {}) is not None:
        bd = doc.get("boson", {})
        if not isinstance(bd, dict):
            errors.append(("boson", "expected a mapping or null"))
        else:
            try:
                boson = BosonSpec(int(bd.get("dim", 8)), float(bd.get("omega_GHz", 5.8)),
                                  float(bd.get("lambda_GHz", 1.78)), str(bd.get("coupling_axis", "x")))
            except ModelError as e:
                errors.append(("boson.dim" if "power of two" in str(e) else "boson", str(e)))
            except (TypeError, ValueError) as e:
                errors.append(("boson", str(e)))

    consts = doc.get("constants", {}) or {}
    unknown = set(consts) - _CONST_KEYS
    for k in sorted(unknown):
        errors.append((f"constants.{k}", "unknown constant"))
    constants = None
    if not unknown:
        try:
            constants = PhysicalConstants(**consts)
        except (ModelError, TypeError) as e:
            errors.append(("constants", str(e)))

    elec = {}
    for i, e in enumerate(doc.get("electronic_initial", []) or []):
        path = f"electronic_initial[{i}]"
        if not isinstance(e, dict) or "levels" not in e:
            errors.append((path, "expected {levels, amplitude}"))
            continue
        levels = tuple(int(x) for x in e["levels"])
        if any(not 0 <= x <= 2 for x in levels):
            errors.append((f"{path}.levels", "spin-1 levels are 0, 1, 2"))
        amp = _amplitude(e.get("amplitude", 1.0), f"{path}.amplitude", errors)
        if amp is not None:
            elec[levels] = amp
    if not elec and defects:
        elec = {(1,) * sum(d.kind == NV for d in defects): 1.0}
        warnings.append("electronic_initial missing; NV centres start in m=0")

    bath = tuple(float(x) for x in doc.get("bath_initial", ()) or ())
    nuc = tuple(int(x) for x in doc.get("nuclear_initial_levels", ()) or ())
    if errors:
        raise ConfigError(errors)
    spec = SystemSpec(tuple(defects), b, boson, bath, elec, nuc, constants, str(doc.get("name", "custom")))
    try:
        _, layout = build_total(spec)
        initial_state_circuit(spec, layout)
    except ModelError as e:
        raise ConfigError([("$", str(e))])
    return spec, warnings


def spec_to_dict(spec: SystemSpec) -> dict:
    """JSON-ready normalized system document."""
    inv = {NV: "NV", N14: "N14"}
    out = {
        "name": spec.name,
        "defects": [{"kind": inv[d.kind], "position_nm": list(d.position)} for d in spec.defects],
        "B_field_mT": list(spec.B_field),
        "boson": None if spec.boson is None else {"dim": spec.boson.dim, "omega_GHz": spec.boson.omega,
                                                  "lambda_GHz": spec.boson.lam,
                                                  "coupling_axis": spec.boson.coupling_axis},
        "bath_initial": list(spec.bath_initial),
        "electronic_initial": [{"levels": list(k), "amplitude": [complex(v).real, complex(v).imag]}
                               for k, v in sorted(spec.electronic_initial.items())],
        "nuclear_initial_levels": list(spec.nuclear_initial_levels),
        "constants": asdict(spec.constants),
    }
    return out


def config_hash(spec: SystemSpec) -> str:
    text = json.dumps(spec_to_dict(spec), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def load_document(path: str | Path) -> dict:
    text = Path(path).read_text()
    if str(path).endswith(".json"):
        return json.loads(text)
    return yaml.safe_load(text)


# --- run manifest ------------------------------------------------------------

@dataclass
class RunManifest:
    spec: SystemSpec
    workflow: str
    M: int = 10
    R: list[int] = field(default_factory=lambda: [15])
    steps: list[int] = field(default_factory=lambda: [42])
    shots: int | None = None
    seed: int = 0
    t_max: float = 100.0
    dt: float = 100.0 / 2048
    out: Path = Path("artifacts")
    exact_elements: bool = False
    oracle: bool = False
    source: str = ""

    def plan(self) -> ShotPlan:
        return ShotPlan("exact", 1, self.seed) if self.shots is None else ShotPlan("sampled", self.shots, self.seed)

    def kconfig(self, R: int, steps: int) -> KrylovConfig:
        return KrylovConfig(M=self.M, R=R, trotter_steps=steps, element_plan=self.plan(),
                            exact_elements=self.exact_elements)

    def times(self) -> np.ndarray:
        return SpectrumConfig(self.t_max, self.dt).times


def _workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def _sweep(fn, points):
    points = list(points)
    if _workers() == 1 or len(points) < 2:
        return [fn(p) for p in points]
    with ThreadPoolExecutor(_workers()) as ex:
        return list(ex.map(fn, points))


class Context:
    def __init__(self, m: RunManifest):
        self.m = m
        self.h, self.layout = build_total(m.spec)
        self.norm = one_norm(self.h, include_identity=True)
        self.tau = default_tau(self.h)
        self.psi0_circuit = initial_state_circuit(m.spec, self.layout)
        self._oracle_states = None

    def header(self, R=None, steps=None) -> dict:
        m = self.m
        steps = steps if steps is not None else (m.steps[0] if len(m.steps) == 1 else None)
        R = R if R is not None else (m.R[0] if len(m.R) == 1 else None)
        eps = None
        if steps is not None:
            eps = trotter_error_bound(self.h, (m.M - 1) * self.tau, steps, include_identity=True)
        return {"config": m.spec.name, "config_hash": config_hash(m.spec), "workflow": m.workflow,
                "seed": m.seed, "M": m.M, "R": R if R is not None else list(m.R), "tau_ns": self.tau,
                "trotter_steps": steps if steps is not None else list(m.steps),
                "eps_T": eps, "shots": m.shots, "exact_elements": m.exact_elements}

    def oracle_states(self):
        if self._oracle_states is None:
            psi0 = prepare(self.psi0_circuit)
            self._oracle_states = exact_propagate(self.h, psi0, self.m.times())
        return self._oracle_states


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if isinstance(x, (int, np.integer, str)):
        return str(x)
    return f"{float(x):.10g}"


def write_csv(path: Path, header: dict, columns: list[str], rows) -> Path:
    buf = io.StringIO()
    for k, v in header.items():
        buf.write(f"# {k}: {json.dumps(v, sort_keys=True)}\n")
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(x) for x in row) + "\n")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buf.getvalue())
    return path


def write_json(path: Path, header: dict, body: dict) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps({"header": header, **body}, indent=2, sort_keys=True) + "\n")
    return path


# --- workflows -----------------------------------------------------------------

def wf_hamiltonian(ctx: Context) -> list[Path]:
    m, h = ctx.m, ctx.h
    alt = "ordinary" if m.spec.constants.magnetic_convention == "angular" else "angular"
    h_alt, _ = build_total(m.spec.with_constants(magnetic_convention=alt))
    body = {
        "qubit_count": h.qubit_count, "term_count": len(h),
        "one_norm": one_norm(h), "one_norm_with_identity": one_norm(h, include_identity=True),
        "magnetic_convention": m.spec.constants.magnetic_convention,
        "alternate_convention": {"magnetic_convention": alt, "one_norm": one_norm(h_alt),
                                 "one_norm_with_identity": one_norm(h_alt, include_identity=True)},
        "layout": ctx.layout.to_dict(), "system": spec_to_dict(m.spec),
        "terms": h.dumps().splitlines(),
    }
    return [write_json(m.out / f"{m.spec.name}_hamiltonian.json", ctx.header(), body)]


def resource_rows(ctx: Context, steps_list=TABLE_STEPS):
    t = (ctx.m.M - 1) * ctx.tau

    def point(n):
        rw = count_resources(compile_evolution(ctx.h, t, n, grouped=False), variant="without_qwc")
        rg = count_resources(compile_evolution(ctx.h, t, n, grouped=True), variant="with_qwc")
        return n, rw, rg, gamma(rw, rg)

    rows = []
    for n, rw, rg, g in _sweep(point, steps_list):
        eps = trotter_error_bound(ctx.h, t, n, include_identity=True)
        for k in ("hadamard", "cnot", "t", "depth"):
            rows.append((ctx.m.spec.name, eps, n, k, rw.metrics()[k], rg.metrics()[k], g[k]))
    return rows


def wf_resources(ctx: Context) -> list[Path]:
    m = ctx.m
    rows = resource_rows(ctx, TABLE_STEPS)
    hdr = ctx.header()
    hdr["trotter_steps"] = list(TABLE_STEPS)
    hdr["eps_T"] = sorted({r[1] for r in rows}, reverse=True)
    return [write_csv(m.out / f"{m.spec.name}_resources.csv", hdr,
                      ["config", "eps_T", "steps", "metric", "without", "with", "gamma"], rows)]


def _krylov(ctx: Context, R: int, steps: int):
    return run_sqkff(ctx.h, ctx.psi0_circuit, ctx.m.kconfig(R, steps), ctx.m.times())


def wf_autocorrelation(ctx: Context) -> list[Path]:
    m = ctx.m
    times = m.times()
    psi0 = prepare(ctx.psi0_circuit)
    cq = np.abs(ctx.oracle_states() @ psi0.conj()) ** 2
    points = [(R, n) for n in m.steps for R in m.R]
    runs = _sweep(lambda p: _krylov(ctx, *p), points)
    paths = []
    for (R, n), run in zip(points, runs):
        ck = run.traj.autocorrelation
        rows = [(t, a, b, abs(a - b), run.traj.retained_dim) for t, a, b in zip(times, ck, cq)]
        paths.append(write_csv(m.out / f"{m.spec.name}_autocorrelation_R{R}_n{n}.csv", ctx.header(R, n),
                               ["t_ns", "C_K", "C_Q", "abs_dC", "retained_dim"], rows))
    return paths


def _spectrum_cfg(m: RunManifest) -> SpectrumConfig:
    return SpectrumConfig(m.t_max, m.dt)


def _oracle_z(ctx: Context):
    mx = magnetic_moment_x(ctx.m.spec, ctx.layout)
    psi0 = prepare(ctx.psi0_circuit)
    _, z, _ = oracle_observables(ctx.oracle_states(), psi0, mx, ctx.h, ctx.m.times())
    return z


def wf_spectrum(ctx: Context) -> list[Path]:
    m = ctx.m
    scfg = _spectrum_cfg(m)
    mx = magnetic_moment_x(m.spec, ctx.layout)
    paths = []
    oracle_i = None
    if m.oracle:
        _, oracle_i = absorption_spectrum(_oracle_z(ctx), scfg)
    for n in m.steps:
        for R in m.R:
            zr = z_function(ctx.h, mx, ctx.psi0_circuit, m.kconfig(R, n), scfg.times)
            w, ik = absorption_spectrum(zr.z, scfg)
            cols = ["omega_GHz", "intensity_normalized"]
            rows = [(a, b) for a, b in zip(w, ik)]
            if oracle_i is not None:
                cols.append("intensity_oracle")
                rows = [r + (c,) for r, c in zip(rows, oracle_i)]
            hdr = ctx.header(R, n)
            hdr["damping_eta_GHz"] = scfg.damping_eta
            hdr["peaks_krylov"] = dominant_peaks(w, ik)
            if oracle_i is not None:
                hdr["peaks_oracle"] = dominant_peaks(w, oracle_i)
            paths.append(write_csv(m.out / f"{m.spec.name}_spectrum_R{R}_n{n}.csv", hdr, cols, rows))
    return paths


def wf_coherence(ctx: Context) -> list[Path]:
    m = ctx.m
    times = m.times()
    part = CoherencePartition.from_a(ctx.layout.subsystem_a, ctx.h.qubit_count)
    cq = None
    if m.oracle:
        _, _, cq = oracle_observables(ctx.oracle_states(), prepare(ctx.psi0_circuit), partition=part.subsystem_a_qubits)
    paths = []
    for n in m.steps:
        for R in m.R:
            run = _krylov(ctx, R, n)
            ck = l1_coherence_krylov(run.mats, run.refs, run.traj, part)
            cols = ["t_ns", "c_l1_krylov"]
            rows = [(t, a) for t, a in zip(times, ck)]
            if cq is not None:
                cols.append("c_l1_oracle")
                rows = [r + (c,) for r, c in zip(rows, cq)]
            paths.append(write_csv(m.out / f"{m.spec.name}_coherence_R{R}_n{n}.csv", ctx.header(R, n), cols, rows))
    return paths


def wf_oracle(ctx: Context) -> list[Path]:
    m = ctx.m
    mx = magnetic_moment_x(m.spec, ctx.layout)
    psi0 = prepare(ctx.psi0_circuit)
    auto, z, coh = oracle_observables(ctx.oracle_states(), psi0, mx, ctx.h, m.times(), ctx.layout.subsystem_a)
    rows = [(t, a, zz.real, zz.imag, c, "oracle") for t, a, zz, c in zip(m.times(), auto, z, coh)]
    hdr = ctx.header()
    hdr["integrator"] = "sparse expm_multiply"
    return [write_csv(m.out / f"{m.spec.name}_oracle.csv", hdr,
                      ["t_ns", "autocorrelation", "Z_re", "Z_im", "c_l1", "source"], rows)]


def compare_summary(ctx: Context, R: int, n: int) -> dict:
    m = ctx.m
    times = m.times()
    psi0 = prepare(ctx.psi0_circuit)
    states = ctx.oracle_states()
    part = CoherencePartition.from_a(ctx.layout.subsystem_a, ctx.h.qubit_count)
    auto, _, coh = oracle_observables(states, psi0, partition=part.subsystem_a_qubits)
    run = _krylov(ctx, R, n)
    d = np.abs(run.traj.autocorrelation - auto)
    dc = np.abs(l1_coherence_krylov(run.mats, run.refs, run.traj, part) - coh)
    out = {"R": R, "steps": n, "retained_dim": run.traj.retained_dim,
           "references": run.refs.bitstrings, "padded": run.refs.padded,
           "evaluated_elements": run.mats.evaluated_count}
    for lim in (20.0, 50.0, float(times[-1])):
        mask = times <= lim + 1e-12
        out[f"mean_abs_dC_0_{lim:g}ns"] = float(d[mask].mean())
        out[f"mean_abs_dCl1_0_{lim:g}ns"] = float(dc[mask].mean())
    return out


def wf_compare(ctx: Context) -> list[Path]:
    m = ctx.m
    points = [(R, n) for n in m.steps for R in m.R]
    body = {"points": _sweep(lambda p: compare_summary(ctx, *p), points)}
    return [write_json(m.out / f"{m.spec.name}_compare.json", ctx.header(), body)]


_RUNNERS = {"hamiltonian": wf_hamiltonian, "resources": wf_resources, "autocorrelation": wf_autocorrelation,
            "spectrum": wf_spectrum, "coherence": wf_coherence, "oracle": wf_oracle, "compare": wf_compare}


def run(manifest: RunManifest) -> list[Path]:
    return _RUNNERS[manifest.workflow](Context(manifest))


# --- argument parsing ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spinqkff", description="Spin-defect dynamics workbench")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a workflow")
    src = r.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=PRESETS)
    src.add_argument("--config", help="YAML or JSON system document")
    r.add_argument("--workflow", choices=WORKFLOWS, required=True)
    r.add_argument("--M", type=int, default=10)
    r.add_argument("--R", type=int, nargs="+", default=[15])
    r.add_argument("--steps", type=int, nargs="+", default=[42])
    r.add_argument("--shots", type=int, default=None, help="sampled Hadamard tests (default: exact)")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--t-max-ns", type=float, default=100.0)
    r.add_argument("--dt-ns", type=float, default=100.0 / 2048)
    r.add_argument("--out", default="artifacts")
    r.add_argument("--exact-elements", action="store_true", help="exact evolution for Krylov elements")
    r.add_argument("--oracle", action="store_true", help="co-run the exact reference")
    r.add_argument("-v", "--verbose", action="store_true")
    v = sub.add_parser("validate", help="check a system document")
    v.add_argument("config")
    return p


def _load_spec(args) -> tuple[SystemSpec, str]:
    if args.preset:
        return preset(args.preset), args.preset
    spec, warnings = validate(load_document(args.config))
    for w in warnings:
        log.warning(w)
    return spec, str(args.config)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "validate":
            spec, warnings = validate(load_document(args.config))
            for w in warnings:
                log.warning(w)
            print(json.dumps(spec_to_dict(spec), indent=2, sort_keys=True))
            return EXIT_OK
        spec, source = _load_spec(args)
        if args.M < 1 or min(args.R) < 1 or min(args.steps) < 1:
            raise ConfigError([("M/R/steps", "must be >= 1")])
        if args.shots is not None and args.shots < 1:
            raise ConfigError([("shots", "must be >= 1")])
        manifest = RunManifest(spec, args.workflow, args.M, args.R, args.steps, args.shots, args.seed,
                               args.t_max_ns, args.dt_ns, Path(args.out), args.exact_elements, args.oracle, source)
        for path in run(manifest):
            print(path)
        return EXIT_OK
    except (ConfigError, ModelError, FileNotFoundError, yaml.YAMLError, json.JSONDecodeError) as e:
        if isinstance(e, ConfigError):
            for pth, msg in e.errors:
                print(f"error: {pth}: {msg}", file=sys.stderr)
        else:
            print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except (KrylovError, OracleError, np.linalg.LinAlgError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
