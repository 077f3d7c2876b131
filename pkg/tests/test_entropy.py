import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_density, random_unitary
from relpath.entropy import (
    clamped_spectrum,
    eigen_entropy,
    renyi_entropy,
    replica_entropy,
    replica_trace,
)
from relpath.errors import ContractError, DomainError
from relpath.lattice import SpaceGrid, gaussian_packet
from relpath.relational import DensityKernel, normalize, pure_density


def diag_density(values, dx=1.0):
    n = len(values)
    grid = SpaceGrid(0.0, dx * (n - 1), n)
    return normalize(DensityKernel(np.diag(np.asarray(values, dtype=float)) / dx, grid))


def test_pure_state_has_zero_entropy():
    grid = SpaceGrid(-4.0, 4.0, 41)
    rep = eigen_entropy(pure_density(gaussian_packet(grid, 0.3, 0.7, 1.0), grid))
    assert abs(rep.von_neumann) < 1e-10
    assert rep.purity == pytest.approx(1.0)
    assert abs(rep.replica_extrapolated) < 1e-8
    assert all(abs(h) < 1e-10 for h in rep.renyi.values())


def test_maximally_mixed_qubit():
    rep = eigen_entropy(diag_density([0.5, 0.5]))
    assert rep.von_neumann == pytest.approx(math.log(2), abs=1e-12)
    assert rep.replica_extrapolated == pytest.approx(math.log(2), rel=0.02)
    for n, h in rep.renyi.items():
        assert h == pytest.approx(math.log(2), abs=1e-12)


def test_basis_state_purity():
    rep = eigen_entropy(diag_density([1.0, 0.0, 0.0, 0.0]))
    assert rep.purity == 1.0
    assert rep.von_neumann == 0.0


def test_renyi_two_is_minus_log_purity(rng):
    rho = random_density(rng, 5)
    assert renyi_entropy(rho, 2) == pytest.approx(-math.log(eigen_entropy(rho, replica=False).purity), rel=1e-12)


def test_renyi_argument_errors():
    rho = diag_density([0.5, 0.5])
    with pytest.raises(ContractError):
        renyi_entropy(rho, 1)
    with pytest.raises(DomainError):
        renyi_entropy(rho, 0)


def test_renyi_near_one_approaches_von_neumann(rng):
    rho = random_density(rng, 6)
    assert abs(renyi_entropy(rho, 1.001) - eigen_entropy(rho, replica=False).von_neumann) < 1e-3


@given(st.integers(0, 2**31), st.integers(2, 7))
def test_renyi_nonincreasing(seed, n):
    rho = random_density(np.random.default_rng(seed), n)
    h = [renyi_entropy(rho, q) for q in (0.5, 1.5, 2, 3, 4, 5, 8)]
    assert all(b <= a + 1e-8 for a, b in zip(h, h[1:]))


@given(st.integers(0, 2**31), st.integers(2, 8), st.floats(0.1, 3.0))
def test_replica_trace_matches_spectrum(seed, n, dx):
    r = np.random.default_rng(seed)
    g = r.normal(size=(n, n)) + 1j * r.normal(size=(n, n))
    rho = normalize(DensityKernel(g @ g.conj().T, SpaceGrid(0.0, dx * (n - 1), n)))
    lam = clamped_spectrum(rho)
    assert replica_trace(rho, 1) == 1.0
    for k in range(2, 6):
        assert abs(replica_trace(rho, k) - np.sum(lam**k)) < 1e-9


def test_replica_trace_pure_state():
    grid = SpaceGrid(-3.0, 3.0, 25)
    rho = pure_density(gaussian_packet(grid, 0.0, 0.6), grid)
    for k in range(1, 9):
        assert abs(replica_trace(rho, k) - 1.0) < 1e-10


def test_replica_trace_order_limits():
    rho = diag_density([0.5, 0.5])
    with pytest.raises(DomainError):
        replica_trace(rho, 9)
    with pytest.raises(DomainError):
        replica_trace(rho, 0)
    assert replica_trace(rho, 9, max_order=10) == pytest.approx(2.0**-8)


def test_replica_four_level(rng):
    rho = random_density(rng, 4)
    est = replica_entropy(rho)
    assert est.value == pytest.approx(est.eigen_value, rel=0.05)
    assert not est.ill_conditioned


@given(st.integers(0, 2**31), st.integers(2, 12))
def test_replica_continuation_within_five_percent(seed, n):
    rho = random_density(np.random.default_rng(seed), n)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        est = replica_entropy(rho)
    assert abs(est.value - est.eigen_value) <= 0.05 * est.eigen_value


def test_polynomial_method_available(rng):
    rho = random_density(rng, 3)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        est = replica_entropy(rho, method="polynomial")
    assert est.method == "polynomial"
    assert np.isfinite(est.value)
    with pytest.raises(DomainError):
        replica_entropy(rho, method="pade")


@given(st.integers(0, 2**31), st.integers(2, 6))
def test_unitary_conjugation_invariance(seed, n):
    r = np.random.default_rng(seed)
    rho = random_density(r, n)
    u = random_unitary(r, n)
    rot = normalize(DensityKernel(u @ rho.matrix @ u.conj().T, rho.grid))
    a, b = eigen_entropy(rho, replica=False), eigen_entropy(rot, replica=False)
    assert abs(a.von_neumann - b.von_neumann) < 1e-9


@given(st.integers(0, 2**31), st.integers(2, 6))
def test_report_invariants(seed, n):
    rho = random_density(np.random.default_rng(seed), n)
    rep = eigen_entropy(rho, replica=False)
    assert np.all(rep.eigenvalues >= -1e-10) and np.all(rep.eigenvalues <= 1 + 1e-10)
    assert abs(rep.eigenvalues.sum() - 1) < 1e-8
    assert np.all(np.diff(rep.eigenvalues) <= 0)
    assert rep.von_neumann >= -1e-10


def test_clamping_window():
    grid = SpaceGrid(0.0, 2.0, 3)
    tiny = DensityKernel(np.diag([0.6, 0.4 + 5e-11, -5e-11]), grid, normalized=True)
    assert clamped_spectrum(tiny)[-1] == 0.0
    bad = DensityKernel(np.diag([0.7, 0.4, -0.1]), grid, normalized=True)
    with pytest.raises(ContractError):
        eigen_entropy(bad)


def test_unnormalized_sum_is_contract_error():
    with pytest.raises(ContractError):
        clamped_spectrum(DensityKernel(np.diag([0.6, 0.6]), SpaceGrid(0.0, 1.0, 2), normalized=True))


def test_requires_normalized_input():
    with pytest.raises(ContractError):
        eigen_entropy(DensityKernel(np.eye(2) / 2, SpaceGrid(0.0, 1.0, 2)))
    with pytest.raises(ContractError):
        replica_entropy(DensityKernel(np.eye(2) / 2, SpaceGrid(0.0, 1.0, 2)))
