"""Single-node cavity updates of the two-argument vertex tables.

A message table ``f[a, b]`` is the vertex free energy of a node with colour
``b`` whose ancestor has colour ``a``.  Every update is gauge fixed by
subtracting entry ``[0, 0]``; the gauge constants cancel in all observables
because node and link terms are sampled from the same member multiset.

The numba kernels below work on stacked descendant tables and are shared by
the public single-node functions and the population sweeps.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numba import njit

from .model import ModelParams, colour_vectors, phi_table

# two zero-T costs closer than this are treated as tied
TIE_TOL = 1e-9


@njit(cache=True)
def logsumexp(x):
    """Max-shifted ``log(sum(exp(x)))`` over a 1-d array."""
    m = -np.inf
    for v in x:
        if v > m:
            m = v
    if m == -np.inf:
        return -np.inf
    s = 0.0
    for v in x:
        s += np.exp(v - m)
    return m + np.log(s)


@njit(cache=True)
def _node_finite(Fs, Es, desc, nd, phi, dig, beta, with_energy, out_f, out_e, s, se, vals):
    """Finite-T update of one node from descendants ``desc[:nd]`` of ``Fs``/``Es``."""
    Q = phi.shape[0]
    K = phi.shape[2]
    for b in range(Q):
        for k in range(K):
            acc = 0.0
            eacc = 0.0
            for t in range(nd):
                acc += Fs[desc[t], b, dig[k, t]]
                if with_energy:
                    eacc += Es[desc[t], b, dig[k, t]]
            s[k] = acc
            se[k] = eacc
        for a in range(Q):
            m = np.inf
            for k in range(K):
                v = s[k] + phi[a, b, k]
                vals[k] = v
                if v < m:
                    m = v
            tot = 0.0
            etot = 0.0
            for k in range(K):
                w = np.exp(-beta * (vals[k] - m))
                tot += w
                if with_energy:
                    etot += w * (se[k] + phi[a, b, k])
            out_f[a, b] = m - np.log(tot) / beta
            if with_energy:
                out_e[a, b] = etot / tot
    g = out_f[0, 0]
    for a in range(Q):
        for b in range(Q):
            out_f[a, b] -= g
    if with_energy:
        h = out_e[0, 0]
        for a in range(Q):
            for b in range(Q):
                out_e[a, b] -= h


@njit(cache=True)
def _node_zero(Fs, Ss, desc, nd, phi, dig, tol, out_f, out_s, out_n, s, ss, vals):
    """T=0 update: minimum over descendant colourings plus the log-count of
    minimisers weighted by the descendants' vertex entropies."""
    Q = phi.shape[0]
    K = phi.shape[2]
    for b in range(Q):
        for k in range(K):
            acc = 0.0
            sacc = 0.0
            for t in range(nd):
                acc += Fs[desc[t], b, dig[k, t]]
                sacc += Ss[desc[t], b, dig[k, t]]
            s[k] = acc
            ss[k] = sacc
        for a in range(Q):
            m = np.inf
            for k in range(K):
                v = s[k] + phi[a, b, k]
                vals[k] = v
                if v < m:
                    m = v
            smax = -np.inf
            for k in range(K):
                if vals[k] <= m + tol and ss[k] > smax:
                    smax = ss[k]
            tot = 0.0
            n = 0
            for k in range(K):
                if vals[k] <= m + tol:
                    x = ss[k] - smax
                    tot += 1.0 if x == 0.0 else np.exp(x)
                    n += 1
            out_f[a, b] = m
            out_s[a, b] = smax + np.log(tot)
            out_n[a, b] = n
    g = out_f[0, 0]
    h = out_s[0, 0]
    for a in range(Q):
        for b in range(Q):
            out_f[a, b] -= g
            out_s[a, b] -= h


@dataclass
class MinimizerSet:
    """Descendant colourings attaining the T=0 minimum for one ``(a, b)`` cell."""

    colourings: list[tuple[int, ...]]
    entropy_sums: np.ndarray

    def __len__(self):
        return len(self.colourings)


def _stack(tables: Sequence[np.ndarray], Q: int, n: int, what: str) -> np.ndarray:
    if len(tables) != n:
        raise ValueError(f"expected {n} descendant {what} tables, got {len(tables)}")
    if n == 0:
        return np.zeros((1, Q, Q))
    arr = np.ascontiguousarray(np.stack([np.asarray(t, dtype=np.float64) for t in tables]))
    if arr.shape[1:] != (Q, Q):
        raise ValueError(f"{what} tables must be {Q}x{Q}, got {arr.shape[1:]}")
    return arr


def _workspace(K):
    return np.empty(K), np.empty(K), np.empty(K)


def update_message_finite_T(descendants: Sequence[np.ndarray], c_j: int,
                            params: ModelParams) -> np.ndarray:
    """Gauge-fixed finite-T vertex free energy of a degree-``c_j`` node."""
    if params.temperature <= 0:
        raise ValueError("finite-T update needs temperature > 0")
    f, _ = _finite(descendants, None, c_j, params, with_energy=False)
    return f


def update_energy_table(descendant_messages: Sequence[np.ndarray],
                        descendant_energies: Sequence[np.ndarray], c_j: int,
                        params: ModelParams, e_av_shift: float = 0.0) -> np.ndarray:
    """Boltzmann-weighted vertex energy, shifted by ``e_av_shift`` then gauge fixed.

    The weights come from ``descendant_messages``; the shift is cancelled by
    the gauge and is accepted only for symmetry with the recursion.
    """
    if params.temperature <= 0:
        raise ValueError("energy tables are a finite-T quantity")
    _, e = _finite(descendant_messages, descendant_energies, c_j, params, with_energy=True)
    e = e - e_av_shift
    return e - e[0, 0]


def _finite(messages, energies, c_j, params, with_energy):
    Q = params.Q
    nd = c_j - 1
    Fs = _stack(messages, Q, nd, "message")
    Es = _stack(energies, Q, nd, "energy") if with_energy else np.zeros_like(Fs)
    if Es.shape != Fs.shape:
        raise ValueError("message and energy tables differ in shape")
    phi = phi_table(Q, c_j, params.lam)
    dig = colour_vectors(Q, nd) if nd else np.zeros((1, 1), dtype=np.int64)
    out_f = np.empty((Q, Q))
    out_e = np.empty((Q, Q))
    desc = np.arange(max(nd, 1), dtype=np.int64)
    _node_finite(Fs, Es, desc, nd, phi, dig, params.beta, with_energy, out_f, out_e,
                 *_workspace(phi.shape[2]))
    return out_f, out_e


def update_message_zero_T(descendants: Sequence[np.ndarray], c_j: int, params: ModelParams,
                          descendant_entropies: Sequence[np.ndarray] | None = None,
                          tol: float = TIE_TOL):
    """T=0 update.  Returns ``(table, minimizers)`` where ``minimizers[a][b]``
    is the :class:`MinimizerSet` of cell ``(a, b)``."""
    Q = params.Q
    nd = c_j - 1
    Fs = _stack(descendants, Q, nd, "message")
    if descendant_entropies is None:
        Ss = np.zeros_like(Fs)
    else:
        Ss = _stack(descendant_entropies, Q, nd, "entropy")
    phi = phi_table(Q, c_j, params.lam)
    dig = colour_vectors(Q, nd)
    sums = np.zeros((Q, dig.shape[0]))
    ssum = np.zeros((Q, dig.shape[0]))
    for t in range(nd):
        sums += Fs[t][:, dig[:, t]]
        ssum += Ss[t][:, dig[:, t]]
    table = np.empty((Q, Q))
    minimizers = [[None] * Q for _ in range(Q)]
    for a in range(Q):
        for b in range(Q):
            vals = sums[b] + phi[a, b]
            m = vals.min()
            hit = np.flatnonzero(vals <= m + tol)
            table[a, b] = m
            minimizers[a][b] = MinimizerSet([tuple(int(x) for x in dig[k]) for k in hit],
                                            ssum[b, hit].copy())
    return table - table[0, 0], minimizers


def update_entropy_table_zero_T(descendant_messages: Sequence[np.ndarray],
                                descendant_entropies: Sequence[np.ndarray], c_j: int,
                                params: ModelParams, minimizers=None,
                                gauge: bool = False) -> np.ndarray:
    """Raw vertex entropies ``ln sum_{q*} exp(sum_k S_k(b, q*_k))``.

    ``minimizers`` may be passed from :func:`update_message_zero_T`; it is
    recomputed otherwise.  With ``gauge=True`` entry ``[0, 0]`` is subtracted,
    as the population sweeps do.
    """
    Q = params.Q
    if minimizers is None:
        _, minimizers = update_message_zero_T(descendant_messages, c_j, params,
                                              descendant_entropies)
    out = np.empty((Q, Q))
    for a in range(Q):
        for b in range(Q):
            ms = minimizers[a][b]
            if len(ms) == 0:
                raise RuntimeError(f"empty minimiser set in cell ({a}, {b})")
            w = np.asarray(ms.entropy_sums)
            top = w.max()
            out[a, b] = top + np.log(np.exp(w - top).sum())
    return out - out[0, 0] if gauge else out


def symmetric_table(diag: float, off: float, Q: int) -> np.ndarray:
    """Colour-symmetric table with ``diag`` on ``a == b`` and ``off`` elsewhere."""
    t = np.full((Q, Q), float(off))
    np.fill_diagonal(t, float(diag))
    return t


def ratio_z(table: np.ndarray, beta: float) -> float:
    """``exp(-beta (f(a,a) - f(a,b)))`` read off a colour-symmetric table."""
    return float(np.exp(-beta * (table[0, 0] - table[0, 1])))
