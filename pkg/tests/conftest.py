import numpy as np
import pytest

from qwzness import (BathSpec, ImpuritySet, LatticeSpec, build_hamiltonian, build_self_energies,
                     effective_hamiltonian, steady_correlation)


@pytest.fixture
def spec8():
    return LatticeSpec(8, 8, m=1.0, omega0=10.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def solve(spec, bath, impurities=None, **kw):
    """Hamiltonian, effective Hamiltonian, self-energies and NESS for one setup."""
    H = build_hamiltonian(spec, impurities or ImpuritySet())
    se = build_self_energies(spec, bath)
    eff = effective_hamiltonian(H, se)
    C = steady_correlation(eff, se, bath, **kw)
    return H, eff, se, C


def boson_bath(gamma=0.005, t_hot=1.0, t_cold=0.01):
    return BathSpec(t_hot, t_cold, gamma, "boson")


def fermion_bath(gamma=0.005, mu=9.99, t_hot=1.0, t_cold=0.01):
    return BathSpec(t_hot, t_cold, gamma, "fermion", mu)


# criterion number -> list of (part, passed, detail); filled by test_acceptance
ACCEPTANCE: dict = {}


def record(criterion: int, part: str, passed: bool, detail: str):
    ACCEPTANCE.setdefault(criterion, []).append((part, bool(passed), detail))
    print(f"criterion {criterion} [{part}]: {'PASS' if passed else 'FAIL'} {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[number]
        ok = all(p for _, p, _ in parts)
        failed = ", ".join(name for name, p, _ in parts if not p)
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}"
        terminalreporter.write_line(line + (f"  (failing: {failed})" if failed else ""))
        for name, p, detail in parts:
            terminalreporter.write_line(f"      {'ok  ' if p else 'FAIL'} {name}: {detail}")
