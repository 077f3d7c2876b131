"""Single-body propagators built from short-time kernels.

Two modes are available.

``kernel``
    Products of short-time kernel matrices, the direct lattice realization of
    the path sum.  The literal chirp ``exp(i m (x_j - x_i)^2 / (2 hbar eps))``
    aliases on the lattice once its local frequency passes the Nyquist limit,
    and then repeated products blow up.  By default a kinetic factor whose
    spectrum is smoothly cut off below the Nyquist limit is used instead
    whenever aliasing would occur; see :func:`kinetic_operator`.

``spectral``
    Strang-split steps: half potential phase, exact kinetic phase in momentum
    space on a periodic grid, half potential phase.  Exactly unitary.

A :class:`PropagatorMatrix` stores the *operator* ``U`` (grid measure folded
in, so ``psi_out = U @ psi``); the continuum kernel ``K(x_b, x_a)`` is
``U / dx``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ContractError, DomainError
from .lattice import PhysicalConstants, PotentialSpec, SpaceGrid, TimeGrid

MAX_DAMPING = 0.05
# Fraction of the Nyquist band passed unchanged by the band-limited kinetic factor.
FLAT_FRACTION = 0.75
MODES = ("kernel", "spectral")


@dataclass(frozen=True)
class PropagatorMatrix:
    operator: np.ndarray
    grid: SpaceGrid
    time: TimeGrid
    consts: PhysicalConstants
    mode: str = "kernel"

    @property
    def kernel(self) -> np.ndarray:
        """Continuum-normalized kernel K(x_b, x_a) = operator / dx."""
        return self.operator / self.grid.dx

    def apply(self, psi: np.ndarray) -> np.ndarray:
        return self.operator @ psi

    def __matmul__(self, other: "PropagatorMatrix") -> "PropagatorMatrix":
        if other.grid != self.grid:
            raise ContractError("cannot compose propagators on different grids")
        t = TimeGrid(other.time.t_start, other.time.t_end + self.time.duration,
                     other.time.n_steps + self.time.n_steps)
        return PropagatorMatrix(self.operator @ other.operator, self.grid, t, self.consts, self.mode)


def _check_damping(eta: float) -> None:
    if not 0.0 <= eta <= MAX_DAMPING:
        raise DomainError(f"damping eta must lie in [0, {MAX_DAMPING}], got {eta}")


def _check_mode(mode: str) -> None:
    if mode not in MODES:
        raise DomainError(f"unknown propagation mode {mode!r}; expected one of {MODES}")


def smooth_step(t: np.ndarray) -> np.ndarray:
    """C-infinity step rising from 0 at t <= 0 to 1 at t >= 1."""
    t = np.clip(t, 0.0, 1.0)
    a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
    b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


def band_window(k: np.ndarray, dx: float, flat: float = FLAT_FRACTION) -> np.ndarray:
    """Flat-top spectral window: 1 up to ``flat`` of Nyquist, smooth taper to 0 at Nyquist."""
    a = np.abs(k) / (math.pi / dx)
    return 1.0 - smooth_step((a - flat) / (1.0 - flat))


def aliases(grid: SpaceGrid, eps: complex, consts: PhysicalConstants) -> bool:
    """True when the literal free chirp aliases inside the grid span.

    The chirp's local wavenumber m d / (hbar eps) reaches the lattice period
    2 pi / dx at separation d = 2 pi hbar eps / (m dx).
    """
    if consts.static:
        return False
    return 2 * math.pi * consts.hbar * abs(eps) / (consts.mass * grid.dx) < grid.span


def _toeplitz(diag_values: np.ndarray, n: int) -> np.ndarray:
    """Matrix with entry (j, i) = diag_values[j - i + n - 1]."""
    d = np.subtract.outer(np.arange(n), np.arange(n))
    return diag_values[d + n - 1]


def kinetic_operator(grid: SpaceGrid, eps: complex, consts: PhysicalConstants,
                     band_limit: Optional[bool] = None) -> np.ndarray:
    """Free short-time operator (measure folded in) on a hard-wall grid.

    ``band_limit=None`` picks the literal chirp when it does not alias and
    the band-limited factor otherwise.  The band-limited factor is the
    lattice Fourier transform of ``w(k) exp(-i hbar eps k^2 / (2 m))``
    evaluated on a finely padded momentum grid, so it approximates the free
    evolution of band-limited data without wrap-around.
    """
    n = grid.n_points
    if consts.static:
        return np.eye(n, dtype=complex)
    if band_limit is None:
        band_limit = aliases(grid, eps, consts)
    if not band_limit:
        d = grid.dx * np.arange(-(n - 1), n)
        pref = np.sqrt(consts.mass / (2j * math.pi * consts.hbar * eps)) * grid.dx
        return _toeplitz(pref * np.exp(1j * consts.mass * d**2 / (2 * consts.hbar * eps)), n)
    m_pad = 1 << int(math.ceil(math.log2(16 * n)))
    k = 2 * math.pi * np.fft.fftfreq(m_pad, d=grid.dx)
    spec = band_window(k, grid.dx) * np.exp(-1j * consts.hbar * eps * k**2 / (2 * consts.mass))
    taps = np.fft.ifft(spec)
    return _toeplitz(taps[np.arange(-(n - 1), n) % m_pad], n)


def midpoint_phase(grid: SpaceGrid, eps: complex, pot: PotentialSpec,
                   consts: PhysicalConstants) -> np.ndarray:
    """exp(-i eps V((x_i + x_j)/2) / hbar) as an (n, n) matrix."""
    n = grid.n_points
    vh = pot.v(grid.half_points)
    idx = np.add.outer(np.arange(n), np.arange(n))
    return np.exp(-1j * eps * vh[idx] / consts.hbar)


def short_time_kernel(grid: SpaceGrid, eps: float, pot: PotentialSpec = PotentialSpec(),
                      consts: PhysicalConstants = PhysicalConstants(), eta: float = 0.0,
                      band_limit: Optional[bool] = None) -> PropagatorMatrix:
    """One-slice propagator: free factor times the midpoint potential phase."""
    if not eps > 0:
        raise DomainError(f"eps must be positive, got {eps}")
    _check_damping(eta)
    ce = eps * (1 - 1j * eta)
    op = kinetic_operator(grid, ce, consts, band_limit)
    if consts.static:
        op = np.diag(np.exp(-1j * ce * pot.v(grid.points) / consts.hbar))
    elif pot.single_body is not None:
        op = op * midpoint_phase(grid, ce, pot, consts)
    return PropagatorMatrix(op, grid, TimeGrid(0.0, eps, 1), consts, "kernel")


def spectral_kinetic_phase(grid: SpaceGrid, eps: complex, consts: PhysicalConstants) -> np.ndarray:
    """Momentum-space kinetic phase on the periodic grid of period n * dx."""
    if consts.static:
        return np.ones(grid.n_points, dtype=complex)
    k = 2 * math.pi * np.fft.fftfreq(grid.n_points, d=grid.dx)
    return np.exp(-1j * consts.hbar * eps * k**2 / (2 * consts.mass))


def spectral_step_operator(grid: SpaceGrid, eps: float, pot: PotentialSpec,
                           consts: PhysicalConstants, eta: float = 0.0) -> np.ndarray:
    """Matrix of one Strang step (half potential, kinetic, half potential)."""
    ce = eps * (1 - 1j * eta)
    half = np.exp(-0.5j * ce * pot.v(grid.points) / consts.hbar)
    phase = spectral_kinetic_phase(grid, ce, consts)
    kin = np.fft.ifft(phase[:, None] * np.fft.fft(np.eye(grid.n_points), axis=0), axis=0)
    return half[:, None] * kin * half[None, :]


def compose_propagator(grid: SpaceGrid, time: TimeGrid, pot: PotentialSpec = PotentialSpec(),
                       consts: PhysicalConstants = PhysicalConstants(), mode: str = "kernel",
                       eta: float = 0.0, band_limit: Optional[bool] = None) -> PropagatorMatrix:
    """Propagator over the whole window as a product of ``time.n_steps`` slices."""
    _check_mode(mode)
    _check_damping(eta)
    n = grid.n_points
    if time.n_steps == 0:
        return PropagatorMatrix(np.eye(n, dtype=complex), grid, time, consts, mode)
    if mode == "kernel":
        step = short_time_kernel(grid, time.eps, pot, consts, eta, band_limit).operator
    else:
        step = spectral_step_operator(grid, time.eps, pot, consts, eta)
    return PropagatorMatrix(np.linalg.matrix_power(step, time.n_steps), grid, time, consts, mode)


def propagate(psi: np.ndarray, grid: SpaceGrid, time: TimeGrid, pot: PotentialSpec = PotentialSpec(),
              consts: PhysicalConstants = PhysicalConstants(), mode: str = "kernel",
              eta: float = 0.0, band_limit: Optional[bool] = None) -> np.ndarray:
    """Evolve a wavefunction step by step (no full propagator matrix for spectral mode)."""
    _check_mode(mode)
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (grid.n_points,):
        raise ContractError(f"state has shape {psi.shape}, grid has {grid.n_points} points")
    if time.n_steps == 0:
        return psi.copy()
    if mode == "kernel":
        step = short_time_kernel(grid, time.eps, pot, consts, eta, band_limit).operator
        for _ in range(time.n_steps):
            psi = step @ psi
        return psi
    _check_damping(eta)
    ce = time.eps * (1 - 1j * eta)
    half = np.exp(-0.5j * ce * pot.v(grid.points) / consts.hbar)
    phase = spectral_kinetic_phase(grid, ce, consts)
    for _ in range(time.n_steps):
        psi = half * np.fft.ifft(phase * np.fft.fft(half * psi))
    return psi


def analytic_free_kernel(x_b, x_a, T: float, consts: PhysicalConstants = PhysicalConstants()):
    """Continuum free-particle kernel with the principal square-root branch."""
    if not T > 0:
        raise DomainError(f"T must be positive, got {T}")
    d = np.asarray(x_b) - np.asarray(x_a)
    pref = np.sqrt(consts.mass / (2j * math.pi * consts.hbar * T))
    out = pref * np.exp(1j * consts.mass * d**2 / (2 * consts.hbar * T))
    return complex(out) if np.ndim(out) == 0 else out


def free_gaussian(x, t: float, center: float = 0.0, width: float = 1.0,
                  consts: PhysicalConstants = PhysicalConstants()):
    """Analytic free evolution of exp(-(x - c)^2 / (4 s^2)) normalized to unit L2 norm."""
    x = np.asarray(x, dtype=float)
    s_t = width * (1 + 1j * consts.hbar * t / (2 * consts.mass * width**2))
    norm = (2 * math.pi * width**2) ** -0.25
    return norm * np.sqrt(width / s_t) * np.exp(-((x - center) ** 2) / (4 * width * s_t))


def norm(psi: np.ndarray, grid: SpaceGrid) -> float:
    return float(np.sqrt(np.sum(np.abs(psi) ** 2) * grid.dx))
