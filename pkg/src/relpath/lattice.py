"""Grids, lattice paths, potentials and the discretized action.

Every other module integrates over the objects defined here.  Positions
live on a uniform :class:`SpaceGrid`, times on a uniform :class:`TimeGrid`,
and a lattice path is an integer array with one grid index per time slice.

The action of a path is evaluated slice by slice as

    S = sum_k [ m (x_{k+1} - x_k)^2 / (2 eps) - eps V((x_k + x_{k+1}) / 2) ]

i.e. the potential is sampled at the spatial midpoint of each hop.  Midpoints
of neighbouring grid points fall on a half-spaced grid, which lets the
propagators tabulate potentials once per step.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ContractError, DomainError, RefusalError

ENUMERATION_CAP = 10**6

Field1 = Callable[[np.ndarray], np.ndarray]
Field2 = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class PhysicalConstants:
    hbar: float = 1.0
    mass: float = 1.0

    def __post_init__(self) -> None:
        if not (self.hbar > 0 and self.mass > 0):
            raise DomainError(f"hbar and mass must be positive, got {self.hbar}, {self.mass}")

    @property
    def static(self) -> bool:
        """True for an infinitely heavy body, which never hops between sites."""
        return math.isinf(self.mass)


@dataclass(frozen=True)
class SpaceGrid:
    x_min: float
    x_max: float
    n_points: int

    def __post_init__(self) -> None:
        if int(self.n_points) != self.n_points or self.n_points < 2:
            raise DomainError(f"n_points must be an integer >= 2, got {self.n_points}")
        if not self.x_min < self.x_max:
            raise DomainError(f"need x_min < x_max, got [{self.x_min}, {self.x_max}]")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.n_points - 1)

    @property
    def span(self) -> float:
        return self.x_max - self.x_min

    @property
    def points(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n_points)

    @property
    def half_points(self) -> np.ndarray:
        """Midpoints of every index pair: entry i + j is (x_i + x_j) / 2."""
        return self.x_min + 0.5 * self.dx * np.arange(2 * self.n_points - 1)

    def nearest_index(self, x: float) -> int:
        i = int(round((x - self.x_min) / self.dx))
        return min(max(i, 0), self.n_points - 1)

    def contains(self, x: float) -> bool:
        return self.x_min - 1e-12 <= x <= self.x_max + 1e-12


@dataclass(frozen=True)
class TimeGrid:
    t_start: float
    t_end: float
    n_steps: int

    def __post_init__(self) -> None:
        if int(self.n_steps) != self.n_steps or self.n_steps < 0:
            raise DomainError(f"n_steps must be a non-negative integer, got {self.n_steps}")
        if self.t_end < self.t_start:
            raise DomainError(f"need t_end >= t_start, got [{self.t_start}, {self.t_end}]")
        if self.n_steps == 0 and self.t_end != self.t_start:
            raise DomainError("n_steps = 0 is only allowed for a zero-length window")

    @property
    def eps(self) -> float:
        return (self.t_end - self.t_start) / max(self.n_steps, 1)

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start

    @property
    def times(self) -> np.ndarray:
        return self.t_start + self.eps * np.arange(self.n_steps + 1)

    @property
    def midpoints(self) -> np.ndarray:
        return self.t_start + self.eps * (np.arange(self.n_steps) + 0.5)

    def split(self, at_step: int) -> tuple["TimeGrid", "TimeGrid"]:
        t = self.t_start + at_step * self.eps
        return (TimeGrid(self.t_start, t, at_step), TimeGrid(t, self.t_end, self.n_steps - at_step))


def _zero1(x):
    return np.zeros_like(np.asarray(x, dtype=float))


def _zero2(x, y):
    return np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)


@dataclass(frozen=True)
class PotentialSpec:
    """Real potentials: single-body V(x), interaction V_int(x, y) and a source g(t).

    All three must accept numpy arrays and broadcast.  ``None`` means zero.
    The source couples linearly to the system coordinate, contributing an
    interaction energy ``-x g(t)``.
    """

    single_body: Optional[Field1] = None
    interaction: Optional[Field2] = None
    source: Optional[Field1] = None
    label: str = field(default="", compare=False)

    def v(self, x) -> np.ndarray:
        return _zero1(x) if self.single_body is None else np.asarray(self.single_body(x), dtype=float)

    def v_int(self, x, y) -> np.ndarray:
        if self.interaction is None:
            return _zero2(x, y)
        return np.broadcast_to(np.asarray(self.interaction(x, y), dtype=float),
                               np.broadcast(np.asarray(x), np.asarray(y)).shape)

    def g(self, t) -> np.ndarray:
        return _zero1(t) if self.source is None else np.asarray(self.source(t), dtype=float) + _zero1(t)

    @property
    def has_coupling(self) -> bool:
        return self.interaction is not None or self.source is not None

    def scaled(self, factor: float) -> "PotentialSpec":
        """Scale the coupling terms (interaction and source) by ``factor``."""
        inter = None if self.interaction is None else (lambda x, y, f=self.interaction: factor * f(x, y))
        src = None if self.source is None else (lambda t, f=self.source: factor * f(t))
        return PotentialSpec(self.single_body, inter, src, label=f"{factor:g}*{self.label}")


def constant_potential(c: float) -> PotentialSpec:
    return PotentialSpec(single_body=lambda x: np.full_like(np.asarray(x, dtype=float), c),
                         label=f"constant({c:g})")


def harmonic_potential(omega: float, mass: float = 1.0) -> PotentialSpec:
    return PotentialSpec(single_body=lambda x: 0.5 * mass * omega**2 * np.asarray(x, dtype=float) ** 2,
                         label=f"harmonic({omega:g})")


def bilinear_coupling(strength: float) -> PotentialSpec:
    """V_int(x, y) = strength * x * y."""
    return PotentialSpec(interaction=lambda x, y: strength * np.asarray(x) * np.asarray(y),
                         label=f"bilinear({strength:g})")


def contact_coupling(strength: float, width: float) -> PotentialSpec:
    """Gaussian contact interaction strength * exp(-(x - y)^2 / (2 width^2))."""
    return PotentialSpec(
        interaction=lambda x, y: strength * np.exp(-((np.asarray(x) - np.asarray(y)) ** 2) / (2 * width**2)),
        label=f"contact({strength:g},{width:g})",
    )


def linear_source(amplitude: float, omega: float = 0.0) -> PotentialSpec:
    """Classical source g(t) = amplitude * cos(omega t)."""
    return PotentialSpec(source=lambda t: amplitude * np.cos(omega * np.asarray(t, dtype=float)),
                         label=f"source({amplitude:g},{omega:g})")


@dataclass(frozen=True)
class Subsystem:
    """One body: its grid, single-body potential and constants."""

    grid: SpaceGrid
    potential: PotentialSpec = PotentialSpec()
    consts: PhysicalConstants = PhysicalConstants()


def gaussian_packet(grid: SpaceGrid, center: float = 0.0, width: float = 1.0,
                    momentum: float = 0.0, hbar: float = 1.0) -> np.ndarray:
    """Gaussian wave packet normalized so that sum |psi|^2 dx = 1."""
    x = grid.points
    psi = np.exp(-((x - center) ** 2) / (4 * width**2) + 1j * momentum * x / hbar)
    return psi / np.sqrt(np.sum(np.abs(psi) ** 2) * grid.dx)


def delta_state(grid: SpaceGrid, index: int) -> np.ndarray:
    """Lattice delta with unit norm under the dx measure (height 1/sqrt(dx))."""
    psi = np.zeros(grid.n_points, dtype=complex)
    psi[index] = 1.0 / math.sqrt(grid.dx)
    return psi


def _as_paths(paths, grid: SpaceGrid, time: TimeGrid) -> np.ndarray:
    arr = np.atleast_2d(np.asarray(paths))
    if arr.shape[1] != time.n_steps + 1:
        raise ContractError(f"path length {arr.shape[1]} does not match {time.n_steps} time steps")
    if arr.size and (arr.min() < 0 or arr.max() >= grid.n_points):
        raise DomainError(f"path index outside [0, {grid.n_points})")
    return arr.astype(np.int64)


def path_actions(paths, grid: SpaceGrid, time: TimeGrid, pot: PotentialSpec,
                 consts: PhysicalConstants = PhysicalConstants()) -> np.ndarray:
    """Actions of many paths at once (rows of ``paths``)."""
    p = _as_paths(paths, grid, time)
    x = grid.points[p]
    dx = np.diff(x, axis=1)
    eps = time.eps
    potential = eps * pot.v(0.5 * (x[:, 1:] + x[:, :-1])).sum(axis=1)
    if consts.static:
        kinetic = np.where(np.all(dx == 0, axis=1), 0.0, np.inf)
    else:
        kinetic = consts.mass * (dx**2).sum(axis=1) / (2 * eps)
    return kinetic - potential


def action_of_path(path: Sequence[int], grid: SpaceGrid, time: TimeGrid, pot: PotentialSpec,
                   consts: PhysicalConstants = PhysicalConstants()) -> float:
    return float(path_actions([path], grid, time, pot, consts)[0])


def interaction_actions(paths_s, paths_a, grid_s: SpaceGrid, grid_a: SpaceGrid,
                        time: TimeGrid, coupling: PotentialSpec) -> np.ndarray:
    """Interaction action for every (system path, apparatus path) pair.

    Includes the source term, which depends on the system path only.
    """
    from . import _kernels

    ps = _as_paths(paths_s, grid_s, time)
    pa = _as_paths(paths_a, grid_a, time)
    eps = time.eps
    table = coupling.v_int(grid_s.half_points[:, None], grid_a.half_points[None, :])
    hs = ps[:, 1:] + ps[:, :-1]
    ha = pa[:, 1:] + pa[:, :-1]
    s_int = _kernels.interaction_action(hs, ha, np.ascontiguousarray(table, dtype=float), eps)
    if coupling.source is not None:
        g = coupling.g(time.midpoints)
        s_int = s_int + (eps * grid_s.half_points[hs] * g).sum(axis=1)[:, None]
    return s_int


def joint_action(path_s: Sequence[int], path_a: Sequence[int], system: Subsystem,
                 apparatus: Subsystem, time: TimeGrid, coupling: PotentialSpec) -> float:
    """S^S + S^A + S_int for one pair of paths on a shared time grid."""
    if len(path_s) != len(path_a):
        raise ContractError(f"paths cover different time grids ({len(path_s)} vs {len(path_a)} slices)")
    s = action_of_path(path_s, system.grid, time, system.potential, system.consts)
    a = action_of_path(path_a, apparatus.grid, time, apparatus.potential, apparatus.consts)
    i = interaction_actions([path_s], [path_a], system.grid, apparatus.grid, time, coupling)[0, 0]
    return s + a + float(i)


def slice_measure(grid: SpaceGrid, eps: complex, consts: PhysicalConstants) -> complex:
    """Per-slice path-integral measure sqrt(m / (2 pi i hbar eps)) * dx (principal branch)."""
    return complex(np.sqrt(consts.mass / (2j * np.pi * consts.hbar * eps)) * grid.dx)


def path_amplitudes(paths, body: Subsystem, time: TimeGrid) -> np.ndarray:
    """Path weights measure^n * exp(i S / hbar).

    A static (infinite-mass) body contributes weight exp(-i eps sum V / hbar)
    on constant paths and zero on any path that hops.
    """
    p = _as_paths(paths, body.grid, time)
    if body.consts.static:
        x = body.grid.points[p]
        still = np.all(p == p[:, :1], axis=1)
        pot = time.eps * body.potential.v(x[:, :-1]).sum(axis=1)
        return np.where(still, np.exp(-1j * pot / body.consts.hbar), 0.0)
    s = path_actions(p, body.grid, time, body.potential, body.consts)
    measure = slice_measure(body.grid, time.eps, body.consts) ** time.n_steps
    return measure * np.exp(1j * s / body.consts.hbar)


def enumerate_paths(grid: SpaceGrid, time: TimeGrid, start: Optional[int] = None,
                    end: Optional[int] = None, cap: int = ENUMERATION_CAP) -> np.ndarray:
    """All lattice paths as rows of an int array, in lexicographic order.

    Fixed endpoints remove their slot from the enumeration.  Refuses when the
    number of paths exceeds ``cap``.
    """
    n_slots = time.n_steps + 1
    for name, idx in (("start", start), ("end", end)):
        if idx is not None and not 0 <= idx < grid.n_points:
            raise DomainError(f"{name} index {idx} outside [0, {grid.n_points})")
    fixed = (start is not None) + (end is not None and (n_slots > 1 or start is None))
    free = n_slots - fixed
    count = grid.n_points**free
    if count > cap:
        raise RefusalError(f"enumeration of {count} paths exceeds cap {cap}")
    if n_slots == 1 and start is not None and end is not None and start != end:
        return np.empty((0, 1), dtype=np.int64)
    rows = np.array(list(itertools.product(range(grid.n_points), repeat=free)), dtype=np.int64)
    rows = rows.reshape(count, free)
    cols = []
    if start is not None:
        cols.append(np.full((count, 1), start))
    cols.append(rows)
    if end is not None and (n_slots > 1 or start is None):
        cols.append(np.full((count, 1), end))
    return np.concatenate(cols, axis=1).astype(np.int64)
