import numpy as np
import pytest
from hypothesis import settings

from spinqkff.pauli import PauliSum, PauliWord

settings.register_profile("ci", max_examples=40, deadline=None)
settings.load_profile("ci")


def random_sum(rng: np.random.Generator, n: int, terms: int = 6, hermitian: bool = True) -> PauliSum:
    out = []
    for _ in range(terms):
        label = "".join(rng.choice(list("IXYZ"), size=n))
        c = rng.normal()
        if not hermitian:
            c = c + 1j * rng.normal()
        out.append((c, PauliWord(label)))
    return PauliSum(out, n)


def random_state(rng: np.random.Generator, n: int) -> np.ndarray:
    v = rng.normal(size=2 ** n) + 1j * rng.normal(size=2 ** n)
    return v / np.linalg.norm(v)


def dist_up_to_phase(a: np.ndarray, b: np.ndarray) -> float:
    k = np.argmax(np.abs(b))
    ph = a.flat[k] / b.flat[k] if abs(b.flat[k]) > 0 else 1.0
    ph = ph / abs(ph) if abs(ph) > 0 else 1.0
    return float(np.linalg.norm(a - ph * b, 2))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE: dict[int, list[tuple[bool, str]]] = {}


def record(criterion: int, ok: bool, detail: str) -> bool:
    ACCEPTANCE.setdefault(criterion, []).append((bool(ok), detail))
    return bool(ok)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        checks = ACCEPTANCE[k]
        verdict = "PASS" if all(ok for ok, _ in checks) else "FAIL"
        terminalreporter.write_line(f"criterion {k}: {verdict} | " + "; ".join(
            d if ok else f"[fail] {d}" for ok, d in checks))
