"""Joint system-apparatus evolution and the objects derived from it.

The joint amplitude psi(x, y) is evolved slice by slice.  Its endpoint values
form the relational matrix R(x_b, y_b), whose Gram matrix (with the
apparatus measure dy) is the system's reduced density kernel.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .errors import ContractError, DegenerateStateError, DomainError
from .lattice import PotentialSpec, SpaceGrid, Subsystem, TimeGrid
from .propagator import (
    MAX_DAMPING,
    MODES,
    short_time_kernel,
    spectral_kinetic_phase,
)

HERMITIAN_TOL = 1e-10
TRACE_FLOOR = 1e-14


@dataclass(frozen=True)
class RelationalMatrix:
    values: np.ndarray
    grid_s: SpaceGrid
    grid_a: SpaceGrid
    time: float = 0.0

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (self.grid_s.n_points, self.grid_a.n_points):
            raise ContractError(f"R has shape {v.shape}, grids need "
                                f"{(self.grid_s.n_points, self.grid_a.n_points)}")
        if not np.all(np.isfinite(v)):
            raise DomainError("relational matrix has non-finite entries")
        if not np.any(v):
            raise DegenerateStateError("relational matrix is identically zero")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class JointState:
    psi: np.ndarray
    system: Subsystem
    apparatus: Subsystem
    time: float = 0.0

    def __post_init__(self) -> None:
        p = np.asarray(self.psi, dtype=complex)
        if p.shape != (self.system.grid.n_points, self.apparatus.grid.n_points):
            raise ContractError(f"joint state has shape {p.shape}")
        if not np.all(np.isfinite(p)):
            raise DomainError("joint state has non-finite entries")
        object.__setattr__(self, "psi", p)

    @classmethod
    def product(cls, psi_s: np.ndarray, psi_a: np.ndarray, system: Subsystem,
                apparatus: Subsystem, time: float = 0.0) -> "JointState":
        return cls(np.outer(psi_s, psi_a), system, apparatus, time)

    @property
    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.psi) ** 2) * self.system.grid.dx * self.apparatus.grid.dx))

    def relational(self) -> RelationalMatrix:
        return RelationalMatrix(self.psi, self.system.grid, self.apparatus.grid, self.time)


@dataclass(frozen=True)
class DensityKernel:
    """Density kernel rho(x, x') on a grid; ``rho * dx`` is the density matrix proper."""

    matrix: np.ndarray
    grid: SpaceGrid
    normalized: bool = False
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=complex)
        n = self.grid.n_points
        if m.shape != (n, n):
            raise ContractError(f"density kernel has shape {m.shape}, grid has {n} points")
        object.__setattr__(self, "matrix", m)

    @property
    def dx(self) -> float:
        return self.grid.dx

    @property
    def weighted(self) -> np.ndarray:
        return self.matrix * self.grid.dx

    @property
    def trace(self) -> complex:
        return complex(np.trace(self.matrix) * self.grid.dx)

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))

    def eigenvalues(self) -> np.ndarray:
        """Eigenvalues of rho * dx in descending order (Hermitian part)."""
        w = self.weighted
        return np.linalg.eigvalsh(0.5 * (w + w.conj().T))[::-1]

    def probabilities(self) -> np.ndarray:
        return np.real(np.diag(self.matrix)) * self.grid.dx


def pure_density(psi: np.ndarray, grid: SpaceGrid) -> DensityKernel:
    """|psi><psi| normalized by its trace."""
    return normalize(DensityKernel(np.outer(psi, np.conj(psi)), grid))


def wavefunction_from_R(R: RelationalMatrix) -> np.ndarray:
    return R.values.sum(axis=1) * R.grid_a.dx


def reduced_density(R: RelationalMatrix) -> DensityKernel:
    v = R.values
    return DensityKernel(v @ v.conj().T * R.grid_a.dx, R.grid_s, normalized=False)


def normalize(rho: DensityKernel) -> DensityKernel:
    z = rho.trace
    if abs(z) <= TRACE_FLOOR:
        raise DegenerateStateError(f"trace {abs(z):.3e} too small to normalize")
    m = rho.matrix / z.real if abs(z.imag) <= 1e-10 * abs(z) else rho.matrix / z
    return DensityKernel(m, rho.grid, normalized=True, meta=dict(rho.meta))


def probability_at(rho: DensityKernel, x_index: int) -> float:
    if not rho.normalized:
        raise ContractError("probability_at needs a normalized density kernel")
    if not 0 <= x_index < rho.grid.n_points:
        raise DomainError(f"index {x_index} outside grid")
    d = rho.matrix[x_index, x_index]
    if abs(d.imag) >= 1e-10:
        raise ContractError(f"diagonal entry has imaginary part {d.imag:.3e}")
    return float(d.real * rho.grid.dx)


def apply_operator(R: RelationalMatrix, M: np.ndarray) -> RelationalMatrix:
    M = np.asarray(M)
    n = R.grid_s.n_points
    if M.shape != (n, n):
        raise ContractError(f"operator has shape {M.shape}, system grid has {n} points")
    return RelationalMatrix(M @ R.values, R.grid_s, R.grid_a, R.time)


def interaction_phase_table(system: Subsystem, apparatus: Subsystem, coupling: PotentialSpec,
                            eps: complex, t_mid: float) -> np.ndarray:
    """exp(-i eps [V_int - x g(t)] / hbar) on the half-spaced midpoint grids."""
    xh = system.grid.half_points
    yh = apparatus.grid.half_points
    v = coupling.v_int(xh[:, None], yh[None, :])
    if coupling.source is not None:
        v = v - xh[:, None] * coupling.g(t_mid)
    return np.exp(-1j * eps * v / system.consts.hbar)


def _check_pair(system: Subsystem, apparatus: Subsystem) -> None:
    if system.consts.hbar != apparatus.consts.hbar:
        raise ContractError("subsystems must share hbar")


def evolve_joint(initial: JointState, time: TimeGrid, coupling: PotentialSpec = PotentialSpec(),
                 mode: str = "kernel", eta: float = 0.0,
                 band_limit: Optional[bool] = None) -> JointState:
    """Evolve the joint amplitude over ``time``.

    Kernel mode applies, per slice, the product of both short-time kernels
    and the interaction phase sampled at the midpoints of both hops, which
    is exactly the lattice path-pair sum of exp(i S_joint / hbar).  Spectral
    mode uses Strang splitting with all potentials at grid points.
    """
    if mode not in MODES:
        raise DomainError(f"unknown propagation mode {mode!r}")
    if not 0.0 <= eta <= MAX_DAMPING:
        raise DomainError(f"damping eta must lie in [0, {MAX_DAMPING}], got {eta}")
    S, A = initial.system, initial.apparatus
    _check_pair(S, A)
    psi = initial.psi
    t_end = initial.time + time.duration
    if time.n_steps == 0:
        return JointState(psi.copy(), S, A, t_end)
    eps = time.eps * (1 - 1j * eta)
    hbar = S.consts.hbar
    mids = time.midpoints

    if mode == "kernel":
        ks = short_time_kernel(S.grid, time.eps, S.potential, S.consts, eta, band_limit).operator
        ka = short_time_kernel(A.grid, time.eps, A.potential, A.consts, eta, band_limit).operator
        if coupling.interaction is None and coupling.source is None:
            for _ in range(time.n_steps):
                psi = ks @ psi @ ka.T
        else:
            phase = None
            for t in mids:
                if phase is None or coupling.source is not None:
                    phase = interaction_phase_table(S, A, coupling, eps, t)
                psi = _kernels.joint_step(ks, ka, phase, psi)
        return JointState(psi, S, A, t_end)

    x, y = S.grid.points, A.grid.points
    vs = S.potential.v(x)[:, None] + A.potential.v(y)[None, :] + coupling.v_int(x[:, None], y[None, :])
    kin = spectral_kinetic_phase(S.grid, eps, S.consts)[:, None] * \
        spectral_kinetic_phase(A.grid, eps, A.consts)[None, :]
    for t in mids:
        v = vs - x[:, None] * coupling.g(t) if coupling.source is not None else vs
        half = np.exp(-0.5j * eps * v / hbar)
        psi = half * np.fft.ifft2(kin * np.fft.fft2(half * psi))
    return JointState(psi, S, A, t_end)
