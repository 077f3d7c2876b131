import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("relpath", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("relpath")


@pytest.fixture
def rng():
    return np.random.default_rng(42)


def random_density(rng, n, rank=None):
    """Normalized random density matrix (as a kernel on a unit-spaced grid)."""
    from relpath.lattice import SpaceGrid
    from relpath.relational import DensityKernel, normalize

    k = n if rank is None else rank
    g = rng.normal(size=(n, k)) + 1j * rng.normal(size=(n, k))
    return normalize(DensityKernel(g @ g.conj().T, SpaceGrid(0.0, n - 1.0, n)))


def random_unitary(rng, n):
    q, r = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE_RESULTS = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
