"""Influence functionals over pairs of enumerated system paths.

Position samples of a path are taken at hop midpoints, the same points at
which the interaction and source enter the lattice action.  Three variants
are supported.

* Tabulated: brute force over apparatus paths.
* Linear closed form: ``exp{(i/hbar) sum_t [x_p(t) - x_p'(t)] g(t) eps}``.
* Gaussian closed form:
  ``exp{eps^2 sum_{t>t'} [a(t,t') x_p(t') - conj a(t,t') x_p'(t')][x_p(t) - x_p'(t)]}``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ContractError, DomainError
from .history import MEMORY_CAP, ApparatusStage, _check_cap
from .lattice import (
    SpaceGrid,
    Subsystem,
    TimeGrid,
    enumerate_paths,
    interaction_actions,
    path_amplitudes,
)
from .relational import DensityKernel, normalize

VARIANTS = ("tabulated", "linear", "gaussian")
RANK_TOL = 1e-8
_COMPLEX_BYTES = 16


def midpoint_positions(paths: np.ndarray, grid: SpaceGrid) -> np.ndarray:
    p = np.atleast_2d(np.asarray(paths, dtype=np.int64))
    return grid.x_min + 0.5 * grid.dx * (p[:, 1:] + p[:, :-1])


@dataclass(frozen=True)
class InfluenceFunctional:
    """F over path pairs.  ``paths`` fixes the path ids for the tabulated variant."""

    variant: str
    grid: SpaceGrid
    time: TimeGrid
    paths: Optional[np.ndarray] = None
    table: Optional[np.ndarray] = None
    g_samples: Optional[np.ndarray] = None
    alpha: Optional[np.ndarray] = None
    hbar: float = 1.0

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise DomainError(f"unknown influence variant {self.variant!r}")
        if self.variant == "tabulated" and (self.table is None or self.paths is None):
            raise ContractError("tabulated influence needs paths and a table")
        if self.variant == "linear" and self.g_samples is None:
            raise ContractError("linear influence needs g samples")
        if self.variant == "gaussian" and self.alpha is None:
            raise ContractError("gaussian influence needs alpha samples")

    def tabulate(self, paths: Optional[np.ndarray] = None) -> np.ndarray:
        """Matrix F[p, p'] over ``paths`` (defaults to the stored paths)."""
        if paths is None:
            paths = self.paths
        if paths is None:
            raise ContractError("no paths to tabulate over")
        if self.variant == "tabulated":
            if paths is not self.paths and not np.array_equal(paths, self.paths):
                raise ContractError("tabulated influence is fixed to its own path set")
            return self.table
        if self.variant == "linear":
            return linear_table(paths, self.g_samples, self.time, self.grid, self.hbar)
        return gaussian_table(paths, self.alpha, self.time, self.grid)

    def with_paths(self, paths: np.ndarray) -> "InfluenceFunctional":
        return InfluenceFunctional("tabulated", self.grid, self.time, np.asarray(paths),
                                   self.tabulate(paths), hbar=self.hbar)

    def exchange_error(self) -> float:
        t = self.tabulate()
        return float(np.max(np.abs(t - t.conj().T)))


def _check_pairs(n_rows: int, n_cols: int, what: str) -> None:
    _check_cap(n_rows * n_cols * _COMPLEX_BYTES, MEMORY_CAP, what)


def _check_g(g_samples, time: TimeGrid) -> np.ndarray:
    g = np.asarray(g_samples, dtype=float)
    if g.shape != (time.n_steps,):
        raise ContractError(f"need {time.n_steps} source samples (one per slice), got {g.shape}")
    return g


def _check_alpha(alpha, time: TimeGrid) -> np.ndarray:
    a = np.asarray(alpha, dtype=complex)
    n = time.n_steps
    if a.shape != (n, n):
        raise ContractError(f"alpha must be {n}x{n}, got {a.shape}")
    if np.any(np.triu(a) != 0):
        raise ContractError("alpha is defined only for t > t' (strictly lower triangle)")
    return a


def alpha_samples(func, time: TimeGrid) -> np.ndarray:
    """Strictly-lower matrix alpha[t, t'] = func(t, t') on slice midpoints."""
    tm = time.midpoints
    a = np.asarray(func(tm[:, None], tm[None, :]), dtype=complex) * np.ones((tm.size, tm.size))
    return np.tril(a, -1)


def linear_table(paths, g_samples, time: TimeGrid, grid: SpaceGrid, hbar: float = 1.0) -> np.ndarray:
    g = _check_g(g_samples, time)
    _check_pairs(len(paths), len(paths), "linear influence table")
    phi = midpoint_positions(paths, grid) @ g * time.eps / hbar
    return np.exp(1j * (phi[:, None] - phi[None, :]))


def gaussian_table(paths, alpha, time: TimeGrid, grid: SpaceGrid) -> np.ndarray:
    a = _check_alpha(alpha, time)
    _check_pairs(len(paths), len(paths), "gaussian influence table")
    x = midpoint_positions(paths, grid)
    diag = np.einsum("pt,ts,ps->p", x, a, x)
    expo = diag[:, None] - x @ a.T @ x.T - x @ a.conj() @ x.T + diag.conj()[None, :]
    return np.exp(time.eps**2 * expo)


def influence_linear(p, p2, g_samples, time: TimeGrid, grid: SpaceGrid, hbar: float = 1.0) -> complex:
    t = linear_table(np.stack([np.asarray(p), np.asarray(p2)]), g_samples, time, grid, hbar)
    return complex(t[0, 1])


def influence_gaussian(p, p2, alpha, time: TimeGrid, grid: SpaceGrid) -> complex:
    t = gaussian_table(np.stack([np.asarray(p), np.asarray(p2)]), alpha, time, grid)
    return complex(t[0, 1])


def path_weights(paths, body: Subsystem, time: TimeGrid, step: Optional[np.ndarray] = None) -> np.ndarray:
    """Per-path amplitude.

    Without ``step`` this is measure^n exp(i S / hbar) from the lattice
    action.  With a one-slice operator matrix it is the product of its
    entries along the path, which reproduces any propagation mode.
    """
    p = np.atleast_2d(np.asarray(paths, dtype=np.int64))
    if step is None:
        return path_amplitudes(p, body, time)
    w = np.ones(p.shape[0], dtype=complex)
    for k in range(p.shape[1] - 1):
        w = w * step[p[:, k + 1], p[:, k]]
    return w


def influence_bruteforce(stage: ApparatusStage, paths, system: Subsystem,
                         apparatus_step: Optional[np.ndarray] = None) -> InfluenceFunctional:
    """Tabulate F by summing apparatus path pairs that meet at a common endpoint."""
    paths = np.atleast_2d(np.asarray(paths, dtype=np.int64))
    A, time = stage.apparatus, stage.window
    ya = enumerate_paths(A.grid, time)
    _check_pairs(paths.shape[0], max(paths.shape[0], ya.shape[0]), "brute-force influence table")
    wa = path_weights(ya, A, time, apparatus_step) * stage.initial[ya[:, 0]]
    s_int = interaction_actions(paths, ya, system.grid, A.grid, time, stage.coupling)
    amp = wa[None, :] * np.exp(1j * s_int / system.consts.hbar)
    # chi[p, z]: apparatus amplitude arriving at z along with system path p
    chi = np.zeros((paths.shape[0], A.grid.n_points), dtype=complex)
    for z in range(A.grid.n_points):
        chi[:, z] = amp[:, ya[:, -1] == z].sum(axis=1)
    table = chi @ chi.conj().T * A.grid.dx
    return InfluenceFunctional("tabulated", system.grid, time, paths, table, hbar=system.consts.hbar)


@dataclass(frozen=True)
class Factorization:
    factorizable: bool
    witness: Optional[np.ndarray]
    ratio: float


def is_factorizable(F, tol: float = RANK_TOL) -> Factorization:
    """Rank-1 test F = f conj(f)^T.

    True iff the second singular value is below ``tol`` times the first and
    the surviving eigenvalue is positive (a negative rank-1 F cannot be
    written as f conj f).
    """
    table = F.tabulate() if isinstance(F, InfluenceFunctional) else np.asarray(F)
    if table.shape[0] < 2 or table.shape[0] != table.shape[1]:
        raise ContractError("factorization test needs a square table over at least 2 paths")
    sv = np.linalg.svd(table, compute_uv=False)
    ratio = float(sv[1] / sv[0]) if sv[0] > 0 else 0.0
    if sv[0] == 0 or ratio >= tol:
        return Factorization(False, None, ratio)
    lam, vec = np.linalg.eigh(0.5 * (table + table.conj().T))
    top = int(np.argmax(np.abs(lam)))
    if lam[top] <= 0:
        return Factorization(False, None, ratio)
    f = np.sqrt(lam[top]) * vec[:, top]
    # fix the global phase so the first nonzero entry is real positive
    k = int(np.argmax(np.abs(f) > 1e-300))
    f = f * np.exp(-1j * np.angle(f[k]))
    return Factorization(True, f, ratio)


def _system_paths(system: Subsystem, time: TimeGrid) -> np.ndarray:
    return enumerate_paths(system.grid, time)


def density_via_influence(rho_in: DensityKernel, F: InfluenceFunctional, system: Subsystem,
                          step: Optional[np.ndarray] = None) -> DensityKernel:
    """rho_out(b, b') = sum w(p) conj w(p') F(p, p') rho_in(p_0, p'_0) over paths ending at b, b'."""
    paths = F.paths if F.paths is not None else _system_paths(system, F.time)
    if paths.shape[1] != F.time.n_steps + 1:
        raise ContractError("influence paths do not match its time grid")
    table = F.tabulate(paths)
    w = path_weights(paths, system, F.time, step)
    start, end = paths[:, 0], paths[:, -1]
    m = (w[:, None] * w.conj()[None, :]) * table * rho_in.matrix[np.ix_(start, start)]
    n = system.grid.n_points
    onehot = np.zeros((n, paths.shape[0]))
    onehot[end, np.arange(paths.shape[0])] = 1.0
    return normalize(DensityKernel(onehot @ m @ onehot.T, system.grid))


def dressed_wavefunction(psi0: np.ndarray, f: np.ndarray, paths, system: Subsystem, time: TimeGrid,
                         step: Optional[np.ndarray] = None) -> np.ndarray:
    """phi(b) = sum over paths ending at b of w(p) f(p) psi0(p_0)."""
    paths = np.atleast_2d(np.asarray(paths, dtype=np.int64))
    f = np.asarray(f, dtype=complex)
    if f.shape != (paths.shape[0],):
        raise ContractError(f"witness has {f.shape} entries for {paths.shape[0]} paths")
    amp = path_weights(paths, system, time, step) * f * np.asarray(psi0)[paths[:, 0]]
    out = np.zeros(system.grid.n_points, dtype=complex)
    np.add.at(out, paths[:, -1], amp)
    return out


def linear_witness(paths, g_samples, time: TimeGrid, grid: SpaceGrid, hbar: float = 1.0) -> np.ndarray:
    """Closed-form factor f(p) = exp{(i/hbar) sum_t x_p(t) g(t) eps} of the linear form."""
    g = _check_g(g_samples, time)
    return np.exp(1j * (midpoint_positions(paths, grid) @ g) * time.eps / hbar)
