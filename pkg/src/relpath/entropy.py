"""Von Neumann and Renyi entropies, by eigenvalues and by the replica chain.

The replica route never diagonalizes.  It glues ``n`` copies of the density
kernel with the grid measure at each glued index to obtain
``Z(n) = Tr(rho^n) / Tr(rho)^n`` at integer ``n``.  It then continues to
``n -> 1``.

The continuation treats ``Z(n)`` as the moments ``mu_j = Z(j + 1)`` of the
spectral measure ``sum_i lambda_i delta(x - lambda_i)``.  It builds a
Gauss-type quadrature rule (Prony's method) with ``k`` nodes matching the first
``2k`` moments, which yields ``Z(n) ~ sum_r w_r x_r^(n-1)`` for real ``n``.
Differentiating gives ``H = -sum_r w_r ln x_r``.  The rule is exact whenever
the spectrum has at most ``k`` distinct nonzero eigenvalues.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from .errors import ContractError, DomainError
from .relational import DensityKernel

CLAMP_WINDOW = 1e-10
MAX_REPLICA_ORDER = 8
CONDITION_LIMIT = 1e8
RENYI_ORDERS = (2, 3, 4, 5)
# Orders 1..6 feed a three-node rule.
GAUSS_NODES = 3


@dataclass(frozen=True)
class ReplicaEstimate:
    value: float
    eigen_value: float
    method: str
    nodes: int
    ill_conditioned: bool
    residual: float
    condition: float
    traces: Dict[int, float] = field(default_factory=dict)


@dataclass(frozen=True)
class EntropyReport:
    eigenvalues: np.ndarray
    von_neumann: float
    renyi: Dict[int, float]
    replica_extrapolated: float
    purity: float
    discrepancy: float
    ill_conditioned: bool = False


def clamped_spectrum(rho: DensityKernel) -> np.ndarray:
    """Descending eigenvalues of rho*dx with the small negative window clamped to 0."""
    lam = rho.eigenvalues()
    if lam.size and lam[-1] < -CLAMP_WINDOW:
        raise ContractError(f"eigenvalue {lam[-1]:.3e} below clamp window: not positive semidefinite")
    lam = np.where(lam < 0, 0.0, lam)
    total = lam.sum()
    if abs(total - 1.0) > 1e-6:
        raise ContractError(f"eigenvalues sum to {total:.9f}, expected 1")
    return lam


def shannon(lam: np.ndarray) -> float:
    nz = lam[lam > 0]
    return float(-(nz * np.log(nz)).sum()) if nz.size else 0.0


def _renyi_from_spectrum(lam: np.ndarray, n: float) -> float:
    nz = lam[lam > 0]
    return float(math.log(np.sum(nz**n)) / (1.0 - n))


def renyi_entropy(rho: DensityKernel, n: float) -> float:
    if n == 1:
        raise ContractError("Renyi order 1 is the von Neumann limit; use eigen_entropy")
    if not n > 0:
        raise DomainError(f"Renyi order must be positive, got {n}")
    return _renyi_from_spectrum(clamped_spectrum(rho), n)


def replica_trace(rho: DensityKernel, n: int, max_order: int = MAX_REPLICA_ORDER) -> float:
    """Normalized Z(n) by chained kernel contraction (no eigenvalues)."""
    if int(n) != n or n < 1:
        raise DomainError(f"replica order must be a positive integer, got {n}")
    if n > max_order:
        raise DomainError(f"replica order {n} exceeds configured maximum {max_order}")
    return _replica_traces(rho, int(n))[int(n)]


def _replica_traces(rho: DensityKernel, top: int) -> Dict[int, float]:
    dx = rho.grid.dx
    r = rho.matrix
    z1 = np.trace(r) * dx
    if abs(z1) == 0:
        raise ContractError("density kernel has zero trace")
    chain = r
    out = {}
    for n in range(1, top + 1):
        if n > 1:
            # one more copy glued on, with the measure of the new shared index
            chain = (chain @ r) * dx
        z = np.trace(chain) * dx / z1**n
        if abs(z.imag) >= 1e-10:
            raise ContractError(f"Z({n}) has imaginary part {z.imag:.3e}")
        out[n] = 1.0 if n == 1 else float(z.real)
    return out


def _gauss_rule(mu: np.ndarray, k: int):
    """k-node rule matching mu[0..2k-1]; returns (nodes, weights, hankel condition)."""
    hankel = np.array([[mu[i + j] for j in range(k)] for i in range(k)])
    cond = float(np.linalg.cond(hankel))
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        return None, None, cond
    c = np.linalg.solve(hankel, -mu[k:2 * k])
    nodes = np.roots(np.concatenate([[1.0], c[::-1]]))
    if np.max(np.abs(nodes.imag)) > 1e-8:
        return None, None, cond
    nodes = nodes.real
    vander = np.vander(nodes, k, increasing=True).T
    weights = np.linalg.solve(vander, mu[:k])
    if np.any(nodes <= 0) or np.any(nodes > 1 + 1e-9) or np.any(weights <= 0):
        return None, None, cond
    return nodes, weights, cond


def _continue_gauss(traces: Dict[int, float]):
    mu = np.array([traces[j + 1] for j in range(2 * GAUSS_NODES)])
    cond = math.inf
    for k in range(GAUSS_NODES, 0, -1):
        nodes, weights, c = _gauss_rule(mu, k)
        cond = min(cond, c)
        if nodes is None:
            continue
        pred = np.array([np.sum(weights * nodes**j) for j in range(mu.size)])
        residual = float(np.max(np.abs(pred - mu)))
        return float(-np.sum(weights * np.log(nodes))), k, residual, c
    return math.nan, 0, math.inf, cond


def _continue_polynomial(traces: Dict[int, float]):
    n = np.array([1.0, *RENYI_ORDERS])
    y = np.log(np.array([traces[int(i)] for i in n]))
    vander = np.vander(n - 1.0, 4, increasing=True)
    coef, *_ = np.linalg.lstsq(vander, y, rcond=None)
    residual = float(np.max(np.abs(vander @ coef - y)))
    return float(-coef[1]), 3, residual, float(np.linalg.cond(vander))


def replica_entropy(rho: DensityKernel, method: str = "gauss") -> ReplicaEstimate:
    """Continue Z(n) from integer orders to n -> 1.

    ``method="gauss"`` (default) uses orders 1..6 and drops nodes until the
    Hankel system is well conditioned.  ``method="polynomial"`` fits a cubic
    to ln Z(n) at n = 1..5.  ``ill_conditioned`` is set when the accepted
    rule misses the supplied moments by more than 1e-6.
    """
    if not rho.normalized:
        raise ContractError("replica_entropy needs a normalized density kernel")
    traces = _replica_traces(rho, 2 * GAUSS_NODES)
    if method == "gauss":
        value, k, residual, cond = _continue_gauss(traces)
    elif method == "polynomial":
        value, k, residual, cond = _continue_polynomial(traces)
    else:
        raise DomainError(f"unknown continuation method {method!r}")
    ill = not np.isfinite(value) or residual > 1e-6 or (method == "polynomial" and cond > CONDITION_LIMIT)
    if ill:
        warnings.warn("replica continuation is ill-conditioned", RuntimeWarning, stacklevel=2)
        if not np.isfinite(value):
            value = 0.0
    eig = shannon(clamped_spectrum(rho))
    return ReplicaEstimate(value, eig, method, k, ill, residual, cond, traces)


def eigen_entropy(rho: DensityKernel, replica: Optional[bool] = True) -> EntropyReport:
    """Full entropy report from the Hermitian eigendecomposition of rho*dx."""
    if not rho.normalized:
        raise ContractError("eigen_entropy needs a normalized density kernel")
    lam = clamped_spectrum(rho)
    h = shannon(lam)
    renyi = {n: _renyi_from_spectrum(lam, n) for n in RENYI_ORDERS}
    purity = float(np.sum(lam**2))
    if replica:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            est = replica_entropy(rho)
        rep, ill = est.value, est.ill_conditioned
    else:
        rep, ill = math.nan, False
    return EntropyReport(lam, h, renyi, rep, purity, abs(rep - h) if replica else math.nan, ill)
