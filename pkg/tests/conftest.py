import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def random_hpd(rng, m, floor=0.1):
    g = crandn(rng, m, m)
    a = g @ g.conj().T / m + floor * np.eye(m)
    return 0.5 * (a + a.conj().T)


def span_projector(b):
    """Orthogonal projector onto range(b) via the pseudo-inverse (independent of Gram-Schmidt)."""
    return b @ np.linalg.pinv(b)


# acceptance criteria outcomes, filled by test_acceptance and printed at the end
ACCEPTANCE: dict[int, list[tuple[bool, str]]] = {}


def record(criterion: int, ok: bool, detail: str) -> bool:
    ACCEPTANCE.setdefault(criterion, []).append((bool(ok), detail))
    print(f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}")
    return bool(ok)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        checks = ACCEPTANCE[n]
        ok = all(c for c, _ in checks)
        tr.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {n:2d}: " + "; ".join(d for _, d in checks))
