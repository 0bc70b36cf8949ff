"""Colour-symmetric (paramagnetic) solutions.

In the paramagnetic state each message reduces to the scalar
``z = exp(-beta (f(a,a) - f(a,b)))``.  The closed forms below cover nodes of
degree 3 and 4 (any Q at finite T, Q = 4 at T = 0); other cases, and the
lambda-interpolated cost, go through :func:`paramagnetic_reduction_generic`,
which iterates the full Q x Q update on symmetric tables.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy import stats

from .cavity import _node_finite, symmetric_table
from .model import EnsembleSpec, ModelParams, colour_vectors, ensemble_from_mean, \
    neighbourhood_table, phi_table

SQRT2_M1 = math.sqrt(2.0) - 1.0
# 95% point of the two-sample Kolmogorov-Smirnov statistic, in units of sqrt(2/M)
KS_CRITICAL = 1.358


def _esym(z) -> tuple[float, ...]:
    """Elementary symmetric polynomials e1..en of the inputs."""
    e = [1.0] + [0.0] * len(z)
    for x in z:
        for k in range(len(z), 0, -1):
            e[k] += e[k - 1] * x
    return tuple(e[1:])


def z_update(z_inputs, c_j: int, params: ModelParams) -> float:
    """Scalar paramagnetic recursion for a node of degree 3 or 4."""
    z_inputs = [float(x) for x in z_inputs]
    if len(z_inputs) != c_j - 1:
        raise ValueError(f"degree {c_j} needs {c_j - 1} inputs, got {len(z_inputs)}")
    if any(x < 0 for x in z_inputs):
        raise ValueError("z inputs must be non-negative")
    Q = params.Q
    if params.zero_temperature:
        if Q != 4:
            raise ValueError("T=0 closed forms are available for Q = 4 only")
        if c_j == 3:
            return 0.0
        if c_j == 4:
            return (Q - 1) / (6.0 + sum(z_inputs))
        raise ValueError("closed forms exist for degree 3 and 4 only")
    return _z_update_finite(np.asarray(z_inputs), c_j, Q, math.exp(-params.beta))


@njit(cache=True)
def _z_update_finite(zin, c, Q, z):
    Q1, Q2, Q3, Q4 = Q - 1.0, Q - 2.0, Q - 3.0, Q - 4.0
    if c == 3:
        s1 = zin[0] + zin[1]
        s2 = zin[0] * zin[1]
        num = Q1 * Q2 + Q1 * z**2 + Q1 * z**4 * s1 + z**10 * s2
        den = Q2 * Q3 + 3 * Q2 * z**2 + z**6 + (Q2 * z**2 + z**4) * s1 + z**6 * s2
        return z**2 * num / den
    s1 = zin[0] + zin[1] + zin[2]
    s2 = zin[0] * zin[1] + zin[1] * zin[2] + zin[0] * zin[2]
    s3 = zin[0] * zin[1] * zin[2]
    num = (Q1 * Q2 * Q3 + 3 * Q1 * Q2 * z**2 + Q1 * z**6 + (Q1 * Q2 * z**4 + Q1 * z**6) * s1
           + Q1 * z**10 * s2 + z**18 * s3)
    den = (Q2 * Q3 * Q4 + 6 * Q2 * Q3 * z**2 + 3 * Q2 * z**4 + 4 * Q2 * z**6 + z**12
           + (Q2 * Q3 * z**2 + 3 * Q2 * z**4 + z**8) * s1 + (Q2 * z**6 + z**8) * s2
           + z**12 * s3)
    return z**2 * num / den


@dataclass
class ParamagneticState:
    """Population of scalar messages; ``conn[i]`` is the degree of member ``i``."""

    z: np.ndarray
    conn: np.ndarray
    params: ModelParams
    ensemble: EnsembleSpec
    stationary: bool = True
    sweeps: int = 0

    def shorthand(self, n: int) -> int:
        return self.params.Q - n

    def z_of_degree(self, c: int) -> np.ndarray:
        return self.z[self.conn == c]


@njit(cache=True)
def _z_sweep(z, conn, order, desc, zero_t, Q, zb):
    zin = np.empty(3)
    for j in order:
        c = conn[j]
        for t in range(c - 1):
            zin[t] = z[desc[j, t]]
        if zero_t:
            if c == 3:
                z[j] = 0.0
            else:
                z[j] = (Q - 1.0) / (6.0 + zin[0] + zin[1] + zin[2])
        else:
            z[j] = _z_update_finite(zin, c, Q, zb)


def _excess_draw(conn, ens, rng, shape):
    from .population import draw_members
    return draw_members(conn, ens, rng, shape)


def z_population(ensemble: EnsembleSpec, params: ModelParams, M: int = 10_000, seed=0,
                 sweeps: int = 500, ks_tol: float = 0.005, ks_window: int = 10,
                 z0: float | None = None) -> ParamagneticState:
    """Iterate a population of ``M`` scalar messages until the successive-sweep
    Kolmogorov-Smirnov distance stays below its threshold for ``ks_window``
    sweeps (or the values stop moving), or ``sweeps`` is exhausted.

    The threshold is ``ks_tol`` or the 95% two-sample critical value
    ``1.358 sqrt(2/M)``, whichever is larger; below that floor a stationary
    population cannot be told from a drifting one.
    """
    if ensemble.floor_c not in (3, 4) or ensemble.max_connectivity > 4:
        raise ValueError("scalar recursions cover degrees 3 and 4 only")
    zero_t = params.zero_temperature
    if zero_t and params.Q != 4:
        raise ValueError("T=0 scalar recursion needs Q = 4; use the full-table reduction")
    rng = np.random.default_rng(seed)
    from .population import _assign_connectivities
    conn = _assign_connectivities(ensemble, M, rng)
    z = np.full(M, 0.45 if z0 is None else z0)
    zb = 0.0 if zero_t else math.exp(-params.beta)
    threshold = max(ks_tol, KS_CRITICAL * math.sqrt(2.0 / M))
    calm = 0
    prev = np.sort(z)
    done = 0
    for done in range(1, sweeps + 1):
        order = rng.permutation(M)
        desc = _excess_draw(conn, ensemble, rng, (M, 3))
        _z_sweep(z, conn, order, desc, zero_t, params.Q, zb)
        cur = np.sort(z)
        moved = np.max(np.abs(cur - prev))
        ks = stats.ks_2samp(prev, cur).statistic if moved > 1e-12 else 0.0
        calm = calm + 1 if (ks < threshold or moved < 1e-12) else 0
        prev = cur
        if calm >= ks_window and done >= 2 * ks_window:
            break
    return ParamagneticState(z, conn, params, ensemble, stationary=calm >= ks_window,
                             sweeps=done)


def z_population_zero_T(ensemble: EnsembleSpec, M: int = 10_000, seed=0, sweeps: int = 500,
                        Q: int = 4) -> ParamagneticState:
    if Q > 4:
        raise ValueError("T=0 scalar reduction holds for Q <= 4; use the full-table module")
    return z_population(ensemble, ModelParams(Q, 0.0), M, seed, sweeps)


def fixed_point_z(c: int, params: ModelParams, z0: float = 0.5, tol: float = 1e-15,
                  max_iter: int = 100_000) -> float:
    """Node-independent fixed point for a regular ensemble of degree ``c``."""
    z = z0
    for _ in range(max_iter):
        new = z_update([z] * (c - 1), c, params)
        if abs(new - z) <= tol * max(1.0, abs(z)):
            return new
        z = new
    raise RuntimeError("scalar recursion did not converge")


# --- closed-form node and link terms ----------------------------------------

def _node_sums(c, zs, Q, z):
    """Partition sum (relative to the minimal cost c+1) and energy of a
    degree-``c`` node with neighbour ratios ``zs``."""
    Q1, Q2, Q3, Q4 = Q - 1, Q - 2, Q - 3, Q - 4
    if c == 3:
        s1, s2, s3 = _esym(zs)
        D = (Q1 * Q2 * Q3 + 3 * Q1 * Q2 * z**2 + Q1 * z**6 + (Q1 * Q2 * z**2 + Q1 * z**4) * s1
             + Q1 * z**6 * s2 + z**12 * s3)
        N = (4 * Q1 * Q2 * Q3 + 18 * Q1 * Q2 * z**2 + 10 * Q1 * z**6
             + (6 * Q1 * Q2 * z**2 + 8 * Q1 * z**4) * s1 + 10 * Q1 * z**6 * s2
             + 16 * z**12 * s3)
        return D, N / D
    if c == 4:
        s1, s2, s3, s4 = _esym(zs)
        D = (Q1 * Q2 * Q3 * Q4 + 6 * Q1 * Q2 * Q3 * z**2 + 3 * Q1 * Q2 * z**4
             + 4 * Q1 * Q2 * z**6 + Q1 * z**12
             + (Q1 * Q2 * Q3 * z**2 + 3 * Q1 * Q2 * z**4 + Q1 * z**8) * s1
             + (Q1 * Q2 * z**6 + Q1 * z**8) * s2 + Q1 * z**12 * s3 + z**20 * s4)
        N = (5 * Q1 * Q2 * Q3 * Q4 + 42 * Q1 * Q2 * Q3 * z**2 + 27 * Q1 * Q2 * z**4
             + 44 * Q1 * Q2 * z**6 + 17 * Q1 * z**12
             + (7 * Q1 * Q2 * Q3 * z**2 + 27 * Q1 * Q2 * z**4 + 13 * Q1 * z**8) * s1
             + (11 * Q1 * Q2 * z**6 + 13 * Q1 * z**8) * s2 + 17 * Q1 * z**12 * s3
             + 25 * z**20 * s4)
        return D, N / D
    raise ValueError("closed forms exist for degree 3 and 4 only")


@dataclass
class Thermo:
    f_av: float
    e_av: float
    s_av: float
    warning: str | None = None


def _draw_z(state, rng, shape):
    idx = _excess_draw(state.conn, state.ensemble, rng, shape)
    return state.z[idx]


def paramagnetic_thermodynamics(state: ParamagneticState, samples: int = 20_000,
                                seed=1) -> Thermo:
    """Free energy, energy and entropy of the paramagnetic state.

    Node and link terms are averaged over messages drawn from the population
    with the excess probabilities; for a node-independent state (integer
    ``<c>``) this is exact.
    """
    params, ens = state.params, state.ensemble
    Q = params.Q
    warning = None if state.stationary else "z population not stationary"
    if params.zero_temperature:
        if Q != 4:
            raise ValueError("T=0 closed forms need Q = 4")
        f = sum(p * _min_cost(c) for c, p in zip(ens.connectivities, ens.node_probs) if p > 0)
        return Thermo(f, f, paramagnetic_entropy_zero_T(ens, Q, state), warning)
    T = params.temperature
    z = math.exp(-params.beta)
    rng = np.random.default_rng(seed)
    uniform = np.ptp(state.z) == 0.0
    n = 1 if uniform else samples
    f_node = 0.0
    e_node = 0.0
    for c, p in zip(ens.connectivities, ens.node_probs):
        if p == 0:
            continue
        zs = _draw_z(state, rng, (n, c))
        D, E = _node_sums(c, zs.T, Q, z)
        f_node += p * np.mean((c + 1) - T * np.log(Q * D))
        e_node += p * np.mean(E)
    zi, zj = _draw_z(state, rng, n), _draw_z(state, rng, n)
    f_link = np.mean(-T * np.log(Q * (Q - 1 + zi * zj)))
    f = f_node - ens.mean_connectivity / 2.0 * f_link
    return Thermo(float(f), float(e_node), float((e_node - f) / T), warning)


def _min_cost(c: int) -> int:
    return {3: 4, 4: 7}[c]


def paramagnetic_entropy_zero_T(ensemble: EnsembleSpec, Q: int = 4,
                                state: ParamagneticState | None = None,
                                pairs: int = 400_000, seed=2) -> float:
    """T=0 paramagnetic entropy for ``3 <= <c> <= 4``.

    Uses ``ln(Q Q1 Q2 Q3) + p4 f3 ln Q1 - <c>/2 [ln(Q Q1) - f4^2 ln Q1]
    - p4 <ln z> - (<c>/2 f4 - p4) f4 <ln(Q1 + z1 z2)>`` with ``z`` ranging over
    the degree-4 messages of ``state``.  At ``<c> = 3`` this is
    ``ln(Q2 Q3 / sqrt(Q Q1))`` for any ``Q >= 4``; degree-4 nodes need ``Q = 4``.
    """
    mc = ensemble.mean_connectivity
    if not 3.0 <= mc <= 4.0:
        raise ValueError("closed form covers 3 <= <c> <= 4")
    if Q < 4 or (Q != 4 and mc > 3.0):
        raise ValueError("T=0 paramagnetic entropy is derived for Q = 4 (Q >= 4 at <c> = 3)")
    Q1, Q2, Q3 = Q - 1, Q - 2, Q - 3
    p4 = mc - 3.0
    f3, f4 = 3 * (4 - mc) / mc, 4 * (mc - 3) / mc
    s = math.log(Q * Q1 * Q2 * Q3) + p4 * f3 * math.log(Q1) - mc / 2 * (
        math.log(Q * Q1) - f4**2 * math.log(Q1))
    if p4 == 0:
        return s
    if state is None:
        state = z_population_zero_T(ensemble_from_mean(mc, Q), seed=seed)
    z4 = state.z[state.conn == 4] if mc < 4 else state.z
    if np.ptp(z4) == 0:
        ln_pair = math.log(Q1 + z4[0] ** 2)
    else:
        rng = np.random.default_rng(seed)
        a, b = rng.choice(z4, pairs), rng.choice(z4, pairs)
        ln_pair = float(np.mean(np.log(Q1 + a * b)))
    return float(s - p4 * np.mean(np.log(z4)) - (mc / 2 * f4 - p4) * f4 * ln_pair)


def paramagnetic_entropy_zero_T_direct(state: ParamagneticState, samples: int = 200_000,
                                       seed=3) -> float:
    """Same quantity from the node ln-sum over minimising colourings minus the
    link term, without the cavity rewriting."""
    ens = state.ensemble
    rng = np.random.default_rng(seed)
    p4, f4, mc = ens.node_probs[1], ens.excess_probs[1], ens.mean_connectivity
    if ens.floor_c == 4:
        p4, f4 = 1.0, 1.0
    z4 = state.z[state.conn == 4]
    node = (1 - p4) * math.log(24.0)
    if p4 > 0:
        k = rng.binomial(4, f4, size=samples)
        draws = rng.choice(z4, (samples, 4))
        sums = np.where(np.arange(4) < k[:, None], draws, 0.0).sum(axis=1)
        node += p4 * float(np.mean(np.log(24.0 * (6.0 + sums))))
    link = (1 - f4**2) * math.log(12.0)
    if f4 > 0:
        a, b = rng.choice(z4, samples), rng.choice(z4, samples)
        link += f4**2 * float(np.mean(np.log(4.0 * (3.0 + a * b))))
    return node - mc / 2 * link


# --- generic reduction on symmetric Q x Q tables -----------------------------

def _sym_update(d_inputs, c, params, beta, phi, dig):
    """Diagonal-minus-offdiagonal gap of the full update on symmetric inputs."""
    Q = params.Q
    nd = c - 1
    Fs = np.stack([symmetric_table(x, 0.0, Q) for x in d_inputs]) if nd else np.zeros((1, Q, Q))
    out_f = np.empty((Q, Q))
    out_e = np.empty((Q, Q))
    K = phi.shape[2]
    _node_finite(Fs, Fs, np.arange(max(nd, 1)), nd, phi, dig, beta, False, out_f, out_e,
                 np.empty(K), np.empty(K), np.empty(K))
    return out_f[0, 0] - out_f[0, 1]


def paramagnetic_reduction_generic(params: ModelParams, ensemble: EnsembleSpec,
                                   M: int = 2000, seed=0, max_sweeps: int = 2000,
                                   tol: float = 1e-13) -> tuple[ParamagneticState, Thermo]:
    """Colour-symmetric solution from the full table update (any Q, any
    lambda, finite T), with free energy, energy and entropy from full traces.

    For integer ``<c>`` the state is a single node-independent gap; otherwise a
    population of ``M`` gaps is iterated.
    """
    if params.zero_temperature:
        raise ValueError("the generic reduction runs at finite T")
    Q, beta, T = params.Q, params.beta, params.temperature
    lo, hi = ensemble.connectivities
    tabs = {c: (phi_table(Q, c, params.lam), colour_vectors(Q, c - 1)) for c in (lo, hi)}
    regular = ensemble.node_probs[1] == 0.0
    if regular:
        d = 0.0
        for it in range(max_sweeps * 50):
            new = _sym_update([d] * (lo - 1), lo, params, beta, *tabs[lo])
            if not np.isfinite(new):
                raise FloatingPointError("symmetric iteration diverged")
            if abs(new - d) < tol:
                d = new
                break
            d = new
        else:
            raise FloatingPointError("symmetric iteration did not converge")
        gaps = np.array([d])
        conn = np.array([lo])
    else:
        rng = np.random.default_rng(seed)
        from .population import _assign_connectivities
        conn = _assign_connectivities(ensemble, M, rng)
        gaps = np.zeros(M)
        for _ in range(min(max_sweeps, 200)):
            desc = _excess_draw(conn, ensemble, rng, (M, hi - 1))
            for j in rng.permutation(M):
                c = conn[j]
                gaps[j] = _sym_update(gaps[desc[j, :c - 1]], c, params, beta, *tabs[c])
    state = ParamagneticState(np.exp(-beta * gaps), conn, params, ensemble)
    return state, _symmetric_thermo(gaps, conn, params, ensemble, seed)


def _symmetric_thermo(gaps, conn, params, ensemble, seed, samples=4000):
    Q, beta, T = params.Q, params.beta, params.temperature
    rng = np.random.default_rng(seed)
    uniform = len(gaps) == 1
    n = 1 if uniform else samples
    pool = np.arange(len(gaps))

    def draw(shape):
        if uniform:
            return np.zeros(shape, dtype=np.int64)
        return _excess_draw(conn, ensemble, rng, shape)

    f_node = e_node = 0.0
    for c, p in zip(ensemble.connectivities, ensemble.node_probs):
        if p == 0:
            continue
        conf, cost = neighbourhood_table(Q, c, params.lam)
        same = conf[:, 1:] == conf[:, :1]
        idx = draw((n, c))
        # energy of each colouring = cost + sum of gaps where neighbour matches centre
        v = cost[None, :] + (same[None, :, :] * gaps[idx][:, None, :]).sum(axis=2)
        m = v.min(axis=1, keepdims=True)
        w = np.exp(-beta * (v - m))
        Z = w.sum(axis=1)
        f_node += p * np.mean(m[:, 0] - T * np.log(Z))
        e_node += p * np.mean((w * cost[None, :]).sum(axis=1) / Z)
    i, j = draw(n), draw(n)
    link = -T * np.log(Q * (Q - 1) + Q * np.exp(-beta * (gaps[i] + gaps[j])))
    f = f_node - ensemble.mean_connectivity / 2.0 * np.mean(link)
    return Thermo(float(f), float(e_node), float((e_node - f) / T))


def paramagnetic_entropy(mean_c: float, T: float, Q: int = 4, lam: float = 1.0,
                         M: int = 10_000, seed=0) -> float:
    """Paramagnetic entropy at ``(<c>, T)``; closed forms when they apply."""
    params = ModelParams(Q, T, lam)
    ens = ensemble_from_mean(mean_c, Q)
    if T == 0.0:
        return paramagnetic_entropy_zero_T(ens, Q, seed=seed)
    if lam == 1.0 and ens.floor_c in (3, 4) and ens.max_connectivity <= 4:
        if ens.node_probs[1] == 0.0:
            zf = fixed_point_z(ens.floor_c, params)
            st = ParamagneticState(np.array([zf]), np.array([ens.floor_c]), params, ens)
        else:
            st = z_population(ens, params, M, seed)
        return paramagnetic_thermodynamics(st, seed=seed).s_av
    return paramagnetic_reduction_generic(params, ens, seed=seed)[1].s_av


def find_zero_entropy_temperature(mean_c: float, bracket=(0.3, 1.0), Q: int = 4,
                                  lam: float = 1.0, tol: float = 1e-4, seed=0) -> float:
    """Temperature where the paramagnetic entropy changes sign."""
    def s(T):
        return paramagnetic_entropy(mean_c, T, Q, lam, seed=seed)

    lo, hi = bracket
    s_lo, s_hi = s(lo), s(hi)
    if s_lo * s_hi > 0:
        raise ValueError(f"no sign change of the entropy in T bracket {bracket}")
    return _bisect(s, lo, hi, s_lo, tol)


def find_zero_entropy_connectivity(bracket=(3.5, 4.0), Q: int = 4, tol: float = 1e-4,
                                   seed=0, M: int = 20_000) -> float:
    """``<c>`` where the T=0 paramagnetic entropy changes sign."""
    def s(c):
        ens = ensemble_from_mean(c, Q)
        st = z_population_zero_T(ens, M=M, seed=seed)
        return paramagnetic_entropy_zero_T(ens, Q, st, seed=seed)

    lo, hi = bracket
    s_lo, s_hi = s(lo), s(hi)
    if s_lo * s_hi > 0:
        raise ValueError(f"no sign change of the entropy in <c> bracket {bracket}")
    return _bisect(s, lo, hi, s_lo, tol)


def _bisect(fun, lo, hi, f_lo, tol, max_iter=60):
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        f_mid = fun(mid)
        if abs(f_mid) < tol or hi - lo < 1e-6:
            return mid
        if (f_mid < 0) == (f_lo < 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
