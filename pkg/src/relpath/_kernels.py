"""Hot loops with a numba implementation and a numpy fallback.

Set ``RELPATH_NO_NUMBA=1`` to force the numpy path (also used automatically
when numba is not importable).  Both paths compute identical quantities; the
benchmark in ``benchmarks/`` compares them.
"""

from __future__ import annotations

import os

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("RELPATH_NO_NUMBA", "") not in ("1", "true", "yes")


def joint_step_numpy(ks: np.ndarray, ka: np.ndarray, phase: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """One joint slice: out[j, l] = sum_{i,k} ks[j,i] ka[l,k] phase[i+j, k+l] psi[i,k]."""
    ns, na = psi.shape
    out = np.empty((ns, na), dtype=np.complex128)
    # win[i, l, k] = phase[j + i, l + k] for the current j
    for j in range(ns):
        win = sliding_window_view(phase[j:j + ns], na, axis=1)
        out[j] = np.einsum("i,ilk,lk,ik->l", ks[j], win, ka, psi, optimize=False)
    return out


def interaction_action_numpy(hs: np.ndarray, ha: np.ndarray, table: np.ndarray, eps: float) -> np.ndarray:
    """-eps * sum_t table[hs[p, t], ha[q, t]] for every path pair (p, q)."""
    out = np.zeros((hs.shape[0], ha.shape[0]))
    for t in range(hs.shape[1]):
        out -= table[np.ix_(hs[:, t], ha[:, t])]
    return eps * out


if HAVE_NUMBA:

    @njit(cache=True)
    def joint_step_numba(ks, ka, phase, psi):
        ns, na = psi.shape
        out = np.zeros((ns, na), dtype=np.complex128)
        for j in range(ns):
            for i in range(ns):
                kji = ks[j, i]
                if kji == 0:
                    continue
                for l in range(na):
                    acc = 0j
                    for k in range(na):
                        acc += ka[l, k] * phase[i + j, k + l] * psi[i, k]
                    out[j, l] += kji * acc
        return out

    @njit(cache=True)
    def interaction_action_numba(hs, ha, table, eps):
        p, n = hs.shape
        q = ha.shape[0]
        out = np.zeros((p, q))
        for a in range(p):
            for b in range(q):
                acc = 0.0
                for t in range(n):
                    acc += table[hs[a, t], ha[b, t]]
                out[a, b] = -eps * acc
        return out

else:  # pragma: no cover
    joint_step_numba = joint_step_numpy
    interaction_action_numba = interaction_action_numpy


def joint_step(ks, ka, phase, psi):
    if USE_NUMBA:
        return joint_step_numba(
            np.ascontiguousarray(ks, dtype=np.complex128),
            np.ascontiguousarray(ka, dtype=np.complex128),
            np.ascontiguousarray(phase, dtype=np.complex128),
            np.ascontiguousarray(psi, dtype=np.complex128),
        )
    return joint_step_numpy(ks, ka, phase, psi)


def interaction_action(hs, ha, table, eps):
    if USE_NUMBA:
        return interaction_action_numba(
            np.ascontiguousarray(hs, dtype=np.int64),
            np.ascontiguousarray(ha, dtype=np.int64),
            np.ascontiguousarray(table, dtype=np.float64),
            float(eps),
        )
    return interaction_action_numpy(hs, ha, table, eps)


def joint_step_batch(ks, ka, phase, psi):
    """Batched joint slice over a leading axis, arranged as BLAS products.

    With M_s = ks * phase[i + j, s], out[:, :, l] = sum_k ka[l, k] psi[:, :, k] @ M_{k+l}^T.
    """
    ns, na = psi.shape[1:]
    idx = np.add.outer(np.arange(ns), np.arange(ns))
    out = np.zeros_like(psi, dtype=np.complex128)
    mats = [ks * phase[idx, s] for s in range(2 * na - 1)]
    diagonal = not np.any(ka - np.diag(np.diag(ka)))
    for l in range(na):
        for k in ([l] if diagonal else range(na)):
            if ka[l, k] != 0:
                out[:, :, l] += ka[l, k] * (psi[:, :, k] @ mats[k + l].T)
    return out


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
