"""Reduced-density evolution through a sequence of measuring apparatuses.

Each :class:`ApparatusStage` couples the system to a fresh apparatus over a
time window.  The stage kernel ``K(x_a, x_b, z_b)`` is the joint endpoint
amplitude when the system starts at ``x_a`` and the apparatus in its initial
state.  Tracing out ``z_b`` gives the four-point kernel

    G(x_a, x'_a; x_b, x'_b) = sum_z K(x_a, x_b, z) conj K(x'_a, x'_b, z) dz,

and the density update

    rho_out(x_b, x'_b) = sum rho_in(x_a, x'_a) G(x_a, x'_a; x_b, x'_b) dx^2

followed by trace normalization.  ``G`` is stored as a matrix with row
index ``(x_b, x'_b)`` and column index ``(x_a, x'_a)``.  When that matrix
would exceed the memory cap, the same update is applied in Kraus form
``dz * sum_z A_z rho A_z^H`` with ``A_z[b, a] = K(a, b, z) dx``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from . import _kernels
from .errors import ContractError, DegenerateStateError, DomainError, RefusalError
from .lattice import PotentialSpec, SpaceGrid, Subsystem, TimeGrid
from .propagator import MAX_DAMPING, MODES, short_time_kernel, spectral_kinetic_phase
from .relational import DensityKernel, interaction_phase_table, normalize

MEMORY_CAP = 2 * 1024**3
# Above this many system points the Kraus form is cheaper than forming G.
G_DIRECT_MAX_POINTS = 48
_COMPLEX_BYTES = 16


@dataclass(frozen=True)
class ApparatusStage:
    apparatus: Subsystem
    coupling: PotentialSpec
    window: TimeGrid
    initial: np.ndarray

    def __post_init__(self) -> None:
        psi = np.asarray(self.initial, dtype=complex)
        if psi.shape != (self.apparatus.grid.n_points,):
            raise ContractError(f"apparatus state has shape {psi.shape}, grid has "
                                f"{self.apparatus.grid.n_points} points")
        nrm = np.sum(np.abs(psi) ** 2) * self.apparatus.grid.dx
        if abs(nrm - 1.0) > 1e-8:
            raise ContractError(f"apparatus initial state has norm^2 {nrm:.12g}, expected 1")
        object.__setattr__(self, "initial", psi)

    @classmethod
    def build(cls, apparatus: Subsystem, coupling: PotentialSpec, window: TimeGrid,
              initial: np.ndarray) -> "ApparatusStage":
        """Like the constructor but normalizes ``initial`` first."""
        psi = np.asarray(initial, dtype=complex)
        psi = psi / np.sqrt(np.sum(np.abs(psi) ** 2) * apparatus.grid.dx)
        return cls(apparatus, coupling, window, psi)


@dataclass(frozen=True)
class GKernel:
    matrix: np.ndarray
    grid: SpaceGrid

    @property
    def n(self) -> int:
        return self.grid.n_points

    def entry(self, a: int, a2: int, b: int, b2: int) -> complex:
        n = self.n
        return complex(self.matrix[b * n + b2, a * n + a2])

    def block(self, a: int, a2: int) -> np.ndarray:
        """G(a, a2; ., .) as an (n, n) matrix over (x_b, x'_b)."""
        return self.matrix[:, a * self.n + a2].reshape(self.n, self.n)

    def as_tensor(self) -> np.ndarray:
        """Array indexed [x_a, x'_a, x_b, x'_b]."""
        n = self.n
        return self.matrix.reshape(n, n, n, n).transpose(2, 3, 0, 1)

    def symmetry_error(self) -> float:
        """max |G(a,a';b,b') - conj G(a',a;b',b)|."""
        t = self.as_tensor()
        return float(np.max(np.abs(t - t.transpose(1, 0, 3, 2).conj())))

    def diagonal_imag(self) -> float:
        t = self.as_tensor()
        n = self.n
        d = t[np.arange(n)[:, None], np.arange(n)[:, None], np.arange(n)[None, :], np.arange(n)[None, :]]
        return float(np.max(np.abs(d.imag)))


def _check_cap(nbytes: int, cap: int, what: str) -> None:
    if nbytes > cap:
        raise RefusalError(f"{what} needs {nbytes / 2**30:.2f} GiB, above the {cap / 2**30:.2f} GiB cap")


def stage_k_kernel(stage: ApparatusStage, system: Subsystem, mode: str = "kernel", eta: float = 0.0,
                   band_limit: Optional[bool] = None, memory_cap: int = MEMORY_CAP,
                   starts: Optional[Sequence[int]] = None) -> np.ndarray:
    """Endpoint amplitudes K[x_a, x_b, z_b] for every system start x_a.

    All starts are evolved together: the batch axis is the start index.
    ``starts`` restricts the batch to the listed start indices (in order).
    """
    if mode not in MODES:
        raise DomainError(f"unknown propagation mode {mode!r}")
    if not 0.0 <= eta <= MAX_DAMPING:
        raise DomainError(f"damping eta must lie in [0, {MAX_DAMPING}], got {eta}")
    if system.consts.hbar != stage.apparatus.consts.hbar:
        raise ContractError("system and apparatus must share hbar")
    ns, na = system.grid.n_points, stage.apparatus.grid.n_points
    rows = np.eye(ns) if starts is None else np.eye(ns)[np.asarray(starts, dtype=np.int64)]
    _check_cap(2 * rows.shape[0] * ns * na * _COMPLEX_BYTES, memory_cap, "stage kernel")
    A, time = stage.apparatus, stage.window
    psi = np.einsum("ab,z->abz", rows / system.grid.dx, stage.initial)
    if time.n_steps == 0:
        return psi
    eps = time.eps * (1 - 1j * eta)
    coupling = stage.coupling

    if mode == "kernel":
        ks = short_time_kernel(system.grid, time.eps, system.potential, system.consts, eta, band_limit).operator
        ka = short_time_kernel(A.grid, time.eps, A.potential, A.consts, eta, band_limit).operator
        phase = None
        for t in time.midpoints:
            if not coupling.has_coupling:
                psi = np.einsum("ji,aik,lk->ajl", ks, psi, ka, optimize=True)
                continue
            if phase is None or coupling.source is not None:
                phase = interaction_phase_table(system, A, coupling, eps, t)
            psi = _kernels.joint_step_batch(ks, ka, phase, psi)
        return psi

    x, y = system.grid.points, A.grid.points
    hbar = system.consts.hbar
    v0 = system.potential.v(x)[:, None] + A.potential.v(y)[None, :] + coupling.v_int(x[:, None], y[None, :])
    kin = spectral_kinetic_phase(system.grid, eps, system.consts)[:, None] * \
        spectral_kinetic_phase(A.grid, eps, A.consts)[None, :]
    for t in time.midpoints:
        v = v0 - x[:, None] * coupling.g(t) if coupling.source is not None else v0
        half = np.exp(-0.5j * eps * v / hbar)
        psi = half * np.fft.ifft2(kin * np.fft.fft2(half * psi, axes=(1, 2)), axes=(1, 2))
    return psi


def g_from_k(K: np.ndarray, grid_s: SpaceGrid, dz: float, memory_cap: int = MEMORY_CAP) -> GKernel:
    n = K.shape[0]
    if K.shape[1] != n or grid_s.n_points != n:
        raise ContractError(f"K has shape {K.shape}, system grid has {grid_s.n_points} points")
    _check_cap(n**4 * _COMPLEX_BYTES, memory_cap, "G kernel")
    g = np.einsum("abz,cdz->bdac", K, K.conj(), optimize=True) * dz
    return GKernel(g.reshape(n * n, n * n), grid_s)


def _finish(out: np.ndarray, grid: SpaceGrid) -> DensityKernel:
    rho = DensityKernel(out, grid)
    if abs(rho.trace) <= 1e-14:
        raise DegenerateStateError("stage output has zero trace")
    return normalize(rho)


def evolve_density(rho: DensityKernel, G: GKernel) -> DensityKernel:
    if rho.grid != G.grid:
        raise ContractError("density and G kernel live on different grids")
    dx = rho.grid.dx
    out = (G.matrix @ rho.matrix.reshape(-1)) * dx * dx
    return _finish(out.reshape(rho.grid.n_points, -1), rho.grid)


def evolve_density_kraus(rho: DensityKernel, K: np.ndarray, dz: float) -> DensityKernel:
    """Same update as :func:`evolve_density` without forming G."""
    n = rho.grid.n_points
    if K.shape[:2] != (n, n):
        raise ContractError(f"K has shape {K.shape}, density has {n} points")
    dx = rho.grid.dx
    ops = np.moveaxis(K, 2, 0).transpose(0, 2, 1) * dx  # ops[z, b, a]
    tmp = ops @ rho.matrix
    out = np.einsum("zba,zca->bc", tmp, ops.conj(), optimize=True) * dz
    return _finish(out, rho.grid)


def evolve_stage(rho: DensityKernel, stage: ApparatusStage, system: Subsystem, mode: str = "kernel",
                 eta: float = 0.0, band_limit: Optional[bool] = None,
                 memory_cap: int = MEMORY_CAP) -> DensityKernel:
    """One stage, through G when it fits under the cap and in Kraus form otherwise."""
    K = stage_k_kernel(stage, system, mode, eta, band_limit, memory_cap)
    dz = stage.apparatus.grid.dx
    if system.grid.n_points <= G_DIRECT_MAX_POINTS and system.grid.n_points**4 * _COMPLEX_BYTES <= memory_cap:
        return evolve_density(rho, g_from_k(K, system.grid, dz, memory_cap))
    return evolve_density_kraus(rho, K, dz)


def run_chain(rho0: DensityKernel, stages: Sequence[ApparatusStage], system: Subsystem,
              mode: str = "kernel", eta: float = 0.0, band_limit: Optional[bool] = None,
              memory_cap: int = MEMORY_CAP) -> List[DensityKernel]:
    """Densities after every stage, starting with ``rho0``."""
    for prev, cur in zip(stages, stages[1:]):
        if abs(cur.window.t_start - prev.window.t_end) > 1e-12:
            raise ContractError(f"stage windows do not abut: {prev.window.t_end} then {cur.window.t_start}")
    out = [rho0]
    for stage in stages:
        out.append(evolve_stage(out[-1], stage, system, mode, eta, band_limit, memory_cap))
    return out
