"""Double-slit scenarios and entropy-versus-coupling scans.

The slit state is a two-point superposition of lattice deltas
``delta_i = e_i / sqrt(dx)``.  With ``phi_i`` the propagated delta, the
screen profiles are

* coherent:   ``|w1 phi1 + w2 phi2|^2 dx``
* which-path: ``(|w1|^2 |phi1|^2 + |w2|^2 |phi2|^2) dx``
* cross term: ``2 Re[w1 conj(w2) phi1 conj(phi2)] dx``

and each density-route profile is normalized by its own trace.  The
identities between them are exact when propagation is unitary, which is why
the spectral mode is the default here.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from .entropy import EntropyReport, clamped_spectrum, eigen_entropy, replica_entropy, shannon
from .errors import ContractError, DomainError
from .history import ApparatusStage, stage_k_kernel
from .lattice import (
    PhysicalConstants,
    PotentialSpec,
    SpaceGrid,
    Subsystem,
    TimeGrid,
    bilinear_coupling,
    contact_coupling,
    delta_state,
    linear_source,
)
from .propagator import propagate
from .relational import DensityKernel, normalize

COUPLING_KINDS = ("bilinear", "contact", "source")
ROUTES = ("both", "eigen", "replica")


@dataclass(frozen=True)
class SlitConfig:
    x1: float = -1.0
    x2: float = 1.0
    weights: Tuple[complex, complex] = (1.0, 1.0)
    T: float = 1.0
    grid: SpaceGrid = SpaceGrid(-15.0, 15.0, 301)
    n_steps: int = 100
    mode: str = "spectral"
    potential: PotentialSpec = PotentialSpec()
    consts: PhysicalConstants = PhysicalConstants()

    def __post_init__(self) -> None:
        if self.x1 == self.x2:
            raise DomainError("slit positions must differ")
        w = np.asarray(self.weights, dtype=complex)
        nrm = math.sqrt(float(np.sum(np.abs(w) ** 2)))
        if w.shape != (2,) or nrm == 0:
            raise DomainError("need two slit weights, not both zero")
        object.__setattr__(self, "weights", (complex(w[0] / nrm), complex(w[1] / nrm)))
        if not self.T > 0:
            raise DomainError(f"flight time must be positive, got {self.T}")

    @property
    def system(self) -> Subsystem:
        return Subsystem(self.grid, self.potential, self.consts)

    @property
    def time(self) -> TimeGrid:
        return TimeGrid(0.0, self.T, self.n_steps)

    def slit_indices(self) -> Tuple[int, int]:
        out = []
        for x in (self.x1, self.x2):
            if not self.grid.contains(x):
                raise DomainError(f"slit at {x} lies outside the grid")
            i = self.grid.nearest_index(x)
            if abs(self.grid.points[i] - x) > 1e-9 * max(1.0, abs(x)):
                warnings.warn(f"slit at {x} snapped to grid point {self.grid.points[i]:.17g}",
                              RuntimeWarning, stacklevel=3)
            out.append(i)
        if out[0] == out[1]:
            raise DomainError("both slits snap to the same grid point")
        return out[0], out[1]


@dataclass(frozen=True)
class SlitResult:
    x: np.ndarray
    p_coherent: np.ndarray
    p_whichpath: np.ndarray
    cross_term: np.ndarray
    phi1: np.ndarray
    phi2: np.ndarray


def slit_density(cfg: SlitConfig, coherent: bool = True) -> DensityKernel:
    """Normalized slit density at the moment of passage."""
    i1, i2 = cfg.slit_indices()
    w1, w2 = cfg.weights
    s = w1 * delta_state(cfg.grid, i1) + w2 * delta_state(cfg.grid, i2)
    if coherent:
        m = np.outer(s, s.conj())
    else:
        m = (abs(w1) ** 2 * np.outer(delta_state(cfg.grid, i1), delta_state(cfg.grid, i1))
             + abs(w2) ** 2 * np.outer(delta_state(cfg.grid, i2), delta_state(cfg.grid, i2)))
    return normalize(DensityKernel(m, cfg.grid))


def slit_amplitudes(cfg: SlitConfig) -> Tuple[np.ndarray, np.ndarray]:
    i1, i2 = cfg.slit_indices()
    return tuple(propagate(delta_state(cfg.grid, i), cfg.grid, cfg.time, cfg.potential, cfg.consts, cfg.mode)
                 for i in (i1, i2))


def _profile_from_slit_density(rho: DensityKernel, cfg: SlitConfig, phi1, phi2) -> np.ndarray:
    """Evolve a density supported on the two slit points and return its normalized diagonal."""
    i1, i2 = cfg.slit_indices()
    dx = cfg.grid.dx
    # rho expressed in the unit-normalized delta basis
    c = rho.matrix[np.ix_([i1, i2], [i1, i2])] * dx
    basis = np.stack([phi1, phi2], axis=1)
    out = DensityKernel(basis @ c @ basis.conj().T, cfg.grid)
    return normalize(out).probabilities()


def double_slit(cfg: SlitConfig) -> SlitResult:
    phi1, phi2 = slit_amplitudes(cfg)
    w1, w2 = cfg.weights
    coh = _profile_from_slit_density(slit_density(cfg, True), cfg, phi1, phi2)
    wp = _profile_from_slit_density(slit_density(cfg, False), cfg, phi1, phi2)
    cross = 2 * np.real(w1 * np.conj(w2) * phi1 * np.conj(phi2)) * cfg.grid.dx
    return SlitResult(cfg.grid.points, coh, wp, cross, phi1, phi2)


def double_slit_coherent(cfg: SlitConfig) -> np.ndarray:
    return double_slit(cfg).p_coherent


def double_slit_whichpath(cfg: SlitConfig) -> np.ndarray:
    return double_slit(cfg).p_whichpath


@dataclass(frozen=True)
class EnvironmentResult:
    x: np.ndarray
    probability: np.ndarray
    direct: np.ndarray
    interference: np.ndarray
    density: DensityKernel
    report: EntropyReport

    @property
    def interference_norm(self) -> float:
        return float(np.sum(np.abs(self.interference)))


def double_slit_with_environment(cfg: SlitConfig, stage: ApparatusStage, band_limit: Optional[bool] = None,
                                 replica: bool = True) -> EnvironmentResult:
    """Coherent slit density pushed through an interacting stage.

    The profile splits into the single-slit terms |w_i|^2 G(x_i, x_i; b, b)
    and the interference term 2 Re[w1 conj(w2) G(x1, x2; b, b)], all scaled
    by the common trace.
    """
    if abs(stage.window.duration - cfg.T) > 1e-12:
        raise ContractError(f"stage window lasts {stage.window.duration}, flight time is {cfg.T}")
    i1, i2 = cfg.slit_indices()
    w1, w2 = cfg.weights
    dx, dz = cfg.grid.dx, stage.apparatus.grid.dx
    K = stage_k_kernel(stage, cfg.system, cfg.mode, band_limit=band_limit, starts=[i1, i2])
    # slit density in the delta basis is c[a, a'] / dx on the two slit points
    c = np.array([[w1 * np.conj(w1), w1 * np.conj(w2)], [w2 * np.conj(w1), w2 * np.conj(w2)]])
    amps = K * dx / math.sqrt(dx)  # propagated unit deltas, indexed [slit, b, z]
    m = np.einsum("ac,abz,cdz->bd", c, amps, amps.conj(), optimize=True) * dz
    rho = normalize(DensityKernel(m, cfg.grid))
    scale = 1.0 / np.trace(m).real
    g_diag = np.einsum("abz,abz->ab", amps, amps.conj()).real * dz
    direct = (abs(w1) ** 2 * g_diag[0] + abs(w2) ** 2 * g_diag[1]) * scale
    inter = 2 * np.real(w1 * np.conj(w2) * np.einsum("bz,bz->b", amps[0], amps[1].conj())) * dz * scale
    return EnvironmentResult(cfg.grid.points, rho.probabilities(), direct, inter, rho,
                             eigen_entropy(rho, replica=replica))


@dataclass(frozen=True)
class ScanConfig:
    """Entropy scan over coupling strengths for the slit system with one environment stage.

    ``coupling_kind`` picks the interaction family scaled by each sample:
    ``bilinear`` (lambda x z), ``contact`` (Gaussian of width
    ``contact_width``) or ``source`` (classical lambda cos(omega t), the
    environment plays no role).
    """

    couplings: Tuple[float, ...]
    slits: SlitConfig = SlitConfig()
    apparatus: Subsystem = Subsystem(SpaceGrid(-1.0, 1.0, 3), consts=PhysicalConstants(mass=math.inf))
    apparatus_initial: Optional[Tuple[complex, ...]] = None
    coupling_kind: str = "bilinear"
    contact_width: float = 1.0
    source_omega: float = 0.0
    route: str = "both"

    def __post_init__(self) -> None:
        if len(self.couplings) == 0:
            raise DomainError("scan needs at least one coupling sample")
        if self.coupling_kind not in COUPLING_KINDS:
            raise DomainError(f"unknown coupling kind {self.coupling_kind!r}")
        if self.route not in ROUTES:
            raise DomainError(f"unknown entropy route {self.route!r}")
        object.__setattr__(self, "couplings", tuple(float(c) for c in self.couplings))

    def coupling(self, lam: float) -> PotentialSpec:
        if self.coupling_kind == "bilinear":
            return bilinear_coupling(lam)
        if self.coupling_kind == "contact":
            return contact_coupling(lam, self.contact_width)
        return linear_source(lam, self.source_omega)

    def stage(self, lam: float) -> ApparatusStage:
        n = self.apparatus.grid.n_points
        init = np.ones(n) if self.apparatus_initial is None else np.asarray(self.apparatus_initial)
        window = TimeGrid(0.0, self.slits.T, self.slits.n_steps)
        return ApparatusStage.build(self.apparatus, self.coupling(lam), window, init)


@dataclass(frozen=True)
class ScanRow:
    coupling: float
    H_eigen: float
    H_replica: float
    purity: float
    interference_norm: float


def entropy_coupling_scan(scan: ScanConfig) -> list:
    rows = []
    for lam in scan.couplings:
        res = double_slit_with_environment(scan.slits, scan.stage(lam), replica=False)
        rho = res.density
        lam_spec = clamped_spectrum(rho)
        h_eig = shannon(lam_spec) if scan.route in ("both", "eigen") else math.nan
        if scan.route in ("both", "replica"):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                h_rep = replica_entropy(rho).value
        else:
            h_rep = math.nan
        rows.append(ScanRow(lam, h_eig, h_rep, float(np.sum(lam_spec**2)), res.interference_norm))
    return rows
