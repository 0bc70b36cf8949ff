"""Population dynamics for the vertex-table recursion.

The population is stored as stacked arrays rather than member objects:
``F[i]`` is the message table of member ``i``, ``S[i]`` its T=0 vertex
entropies and ``E[i]`` its finite-T vertex energies.  All randomness of a
sweep (update order and descendant indices) is drawn up front from a numpy
``Generator`` so that two populations can be driven by one shared stream.
"""
from __future__ import annotations

import copy
import io
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numba import njit

from .cavity import TIE_TOL, _node_finite, _node_zero
from .model import EnsembleSpec, ModelParams, colour_vectors, ensemble_from_mean, phi_table

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1


@dataclass
class PopulationMember:
    connectivity: int
    message: np.ndarray
    energy: np.ndarray | None = None
    entropy: np.ndarray | None = None


@dataclass
class Population:
    F: np.ndarray
    S: np.ndarray
    E: np.ndarray
    conn: np.ndarray
    ensemble: EnsembleSpec
    params: ModelParams
    seed: int | None
    rng: np.random.Generator
    colours: np.ndarray
    epoch: int = 0
    meas_rng: np.random.Generator = field(default=None)
    entropy_mode: str = "counting"
    symmetrise: bool = True

    @property
    def N(self) -> int:
        return self.F.shape[0]

    @property
    def Q(self) -> int:
        return self.params.Q

    def member(self, i: int) -> PopulationMember:
        return PopulationMember(int(self.conn[i]), self.F[i], self.E[i], self.S[i])

    def copy(self) -> "Population":
        return copy.deepcopy(self)

    def set_temperature(self, T: float) -> None:
        self.params = self.params.with_temperature(T)

    def set_mean_connectivity(self, mean_c: float) -> None:
        """Move ``<c>`` and relabel the fewest members needed to match the new
        node probabilities; tables are kept and refresh on their next update."""
        self.ensemble = ensemble_from_mean(mean_c, self.Q)
        self.conn = _assign_connectivities(self.ensemble, self.N, self.rng, self.conn)


def _assign_connectivities(ens: EnsembleSpec, N: int, rng: np.random.Generator,
                           current: np.ndarray | None = None) -> np.ndarray:
    lo, hi = ens.connectivities
    n_hi = int(round(N * ens.node_probs[1]))
    if current is None:
        conn = np.full(N, lo, dtype=np.int64)
        conn[rng.permutation(N)[:n_hi]] = hi
        return conn
    conn = current.copy()
    outside = (conn != lo) & (conn != hi)
    conn[outside] = lo
    have = np.flatnonzero(conn == hi)
    if len(have) > n_hi:
        conn[rng.choice(have, len(have) - n_hi, replace=False)] = lo
    elif len(have) < n_hi:
        pool = np.flatnonzero(conn == lo)
        conn[rng.choice(pool, n_hi - len(have), replace=False)] = hi
    return conn


ENTROPY_MODES = ("counting", "propagated")
DEFAULT_COLOUR_BIAS = 100.0


def init_population(N: int, ensemble: EnsembleSpec, params: ModelParams, mode: str = "zero",
                    epsilon: float = 1e-6, seed=None, colour_bias: float | None = None,
                    entropy_mode: str = "counting", symmetrise: bool = True) -> Population:
    """Fresh population.

    Every member gets a random nominal colour ``q``; its table is the integer
    table ``colour_bias * (1 - delta(b, q))`` (zero on the nominal colour).
    ``mode="random"`` adds i.i.d. uniform noise in ``[0, epsilon)`` per cell.
    ``colour_bias=0`` gives the colour-symmetric zero table.

    ``entropy_mode`` selects the T=0 weighting of minimising colourings:
    ``"counting"`` weights them uniformly (vertex entropy tables stay zero),
    ``"propagated"`` carries the full vertex-entropy recursion.
    ``symmetrise`` writes every updated table under a fresh random colour
    relabelling, which keeps the population free of a global colour bias.
    """
    if entropy_mode not in ENTROPY_MODES:
        raise ValueError(f"unknown entropy mode {entropy_mode!r}")
    if colour_bias is None:
        colour_bias = DEFAULT_COLOUR_BIAS
    if N < 1:
        raise ValueError("population needs N >= 1")
    if mode not in ("zero", "random"):
        raise ValueError(f"unknown init mode {mode!r}")
    if mode == "random" and not epsilon > 0:
        raise ValueError("random init needs epsilon > 0")
    Q = params.Q
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    dyn_ss, meas_ss = ss.spawn(2)
    rng = np.random.default_rng(dyn_ss)
    conn = _assign_connectivities(ensemble, N, rng)
    colours = rng.integers(Q, size=N)
    F = np.full((N, Q, Q), float(colour_bias))
    F[np.arange(N), :, colours] = 0.0
    if mode == "random":
        F += rng.uniform(0.0, epsilon, size=F.shape)
    F -= F[:, :1, :1]
    return Population(F=F, S=np.zeros((N, Q, Q)), E=np.zeros((N, Q, Q)), conn=conn,
                      ensemble=ensemble, params=params, seed=seed, rng=rng, colours=colours,
                      meas_rng=np.random.default_rng(meas_ss), entropy_mode=entropy_mode,
                      symmetrise=symmetrise)


def member_table(Q: int, colour: int, colour_bias: float = DEFAULT_COLOUR_BIAS) -> np.ndarray:
    """Initial table of a member with nominal colour ``colour``."""
    t = np.full((Q, Q), float(colour_bias))
    t[:, colour] = 0.0
    return t - t[0, 0]


class _Tables:
    """Per-connectivity cost tables and colour enumerations for the kernels."""

    def __init__(self, Q: int, c_lo: int, lam: float):
        self.c_lo = c_lo
        self.phi_lo = phi_table(Q, c_lo, lam)
        self.dig_lo = colour_vectors(Q, c_lo - 1)
        self.phi_hi = phi_table(Q, c_lo + 1, lam)
        self.dig_hi = colour_vectors(Q, c_lo)


_TABLE_CACHE: dict = {}


def kernel_tables(pop_or_params, c_lo: int | None = None) -> _Tables:
    if isinstance(pop_or_params, Population):
        params, c_lo = pop_or_params.params, pop_or_params.ensemble.floor_c
    else:
        params = pop_or_params
    key = (params.Q, c_lo, params.lam)
    if key not in _TABLE_CACHE:
        _TABLE_CACHE[key] = _Tables(*key)
    return _TABLE_CACHE[key]


def draw_members(conn: np.ndarray, ensemble: EnsembleSpec, rng: np.random.Generator,
                 shape) -> np.ndarray:
    """Member indices drawn with the excess probabilities ``c P(c) / <c>``:
    first a degree class from the excess distribution, then a uniform member
    of that class."""
    lo, hi = ensemble.connectivities
    pick_hi = rng.random(shape) < ensemble.excess_probs[1]
    u = rng.random(shape)
    idx_lo = np.flatnonzero(conn == lo)
    idx_hi = np.flatnonzero(conn == hi)
    if len(idx_lo) == 0:
        idx_lo = np.arange(len(conn))
    if len(idx_hi) == 0:
        idx_hi = np.arange(len(conn))
    out = idx_lo[np.minimum((u * len(idx_lo)).astype(np.int64), len(idx_lo) - 1)]
    hi_pick = idx_hi[np.minimum((u * len(idx_hi)).astype(np.int64), len(idx_hi) - 1)]
    return np.where(pick_hi, hi_pick, out)


def draw_sweep(pop: Population, rng: np.random.Generator | None = None):
    """Random update order, ``max_c - 1`` descendant slots per update and one
    colour relabelling per update (identity when ``pop.symmetrise`` is off)."""
    rng = pop.rng if rng is None else rng
    order = rng.permutation(pop.N)
    width = max(pop.ensemble.floor_c, 1)
    desc = draw_members(pop.conn, pop.ensemble, rng, (pop.N, width))
    perm = np.tile(np.arange(pop.Q), (pop.N, 1))
    if pop.symmetrise:
        perm = rng.permuted(perm, axis=1)
    return order, desc, perm


@njit(cache=True)
def _sweep_kernel(F, S, E, Fs, Ss, Es, conn, order, desc, perm, c_lo, phi_lo, dig_lo, phi_hi,
                  dig_hi, zero_t, beta, with_energy, tol):
    Q = F.shape[1]
    Kmax = phi_hi.shape[2]
    out_f = np.empty((Q, Q))
    out_x = np.empty((Q, Q))
    out_n = np.empty((Q, Q), dtype=np.int64)
    s = np.empty(Kmax)
    sx = np.empty(Kmax)
    vals = np.empty(Kmax)
    for j in order:
        if conn[j] == c_lo:
            phi = phi_lo
            dig = dig_lo
        else:
            phi = phi_hi
            dig = dig_hi
        nd = conn[j] - 1
        d = desc[j]
        pj = perm[j]
        if zero_t:
            _node_zero(Fs, Ss, d, nd, phi, dig, tol, out_f, out_x, out_n, s, sx, vals)
        else:
            _node_finite(Fs, Es, d, nd, phi, dig, beta, with_energy, out_f, out_x, s, sx, vals)
        # relabelled write: new[p(a), p(b)] = old[a, b], then re-gauge
        for a in range(Q):
            for b in range(Q):
                F[j, pj[a], pj[b]] = out_f[a, b]
                if zero_t or with_energy:
                    X = S if zero_t else E
                    X[j, pj[a], pj[b]] = out_x[a, b]
        g = F[j, 0, 0]
        h = S[j, 0, 0] if zero_t else E[j, 0, 0]
        for a in range(Q):
            for b in range(Q):
                F[j, a, b] -= g
                if zero_t:
                    S[j, a, b] -= h
                elif with_energy:
                    E[j, a, b] -= h


def _run_sweep(pop: Population, draw, layered: bool, with_energy: bool = True) -> None:
    order, desc, perm = draw
    tabs = kernel_tables(pop)
    zero_t = pop.params.check_kernel_mode()
    beta = 0.0 if zero_t else pop.params.beta
    counting = zero_t and pop.entropy_mode == "counting"
    if counting:
        pop.S[:] = 0.0
    if layered:
        # synchronous: every update reads the previous epoch
        Fs, Ss, Es = pop.F.copy(), pop.S.copy(), pop.E.copy()
    else:
        # sequential: reads see updates made earlier in the sweep; in counting
        # mode the entropy reads stay on a separate zero array
        Fs, Es = pop.F, pop.E
        Ss = np.zeros_like(pop.S) if counting else pop.S
    _sweep_kernel(pop.F, pop.S, pop.E, Fs, Ss, Es, pop.conn, order, desc, perm, tabs.c_lo,
                  tabs.phi_lo, tabs.dig_lo, tabs.phi_hi, tabs.dig_hi, zero_t, beta,
                  with_energy, TIE_TOL)
    if counting:
        pop.S[:] = 0.0
    pop.epoch += 1


def sweep_sequential(pop: Population, rng: np.random.Generator | None = None) -> Population:
    """One sweep: every member updated once in random order, in place."""
    _run_sweep(pop, draw_sweep(pop, rng), layered=False)
    return pop


@dataclass
class ModulationReport:
    dominant_colour: int
    dominance: float
    mean_moments: np.ndarray


def colour_bias_moments(pop: Population) -> np.ndarray:
    """Population average of each member's single-site colour distribution,
    where member ``i`` prefers colour ``b`` with weight ``exp(-beta min_a f(a, b))``
    (at T=0: uniform over the minimising ``b``)."""
    g = pop.F.min(axis=1)
    if pop.params.zero_temperature:
        w = (g <= g.min(axis=1, keepdims=True) + TIE_TOL).astype(float)
    else:
        x = -pop.params.beta * (g - g.min(axis=1, keepdims=True))
        w = np.exp(x)
    w /= w.sum(axis=1, keepdims=True)
    return w.mean(axis=0)


def sweep_layered(pop: Population, rng: np.random.Generator | None = None):
    """Synchronous sweep: all updates read the previous epoch's tables."""
    _run_sweep(pop, draw_sweep(pop, rng), layered=True)
    m = colour_bias_moments(pop)
    return pop, ModulationReport(int(np.argmax(m)), float(m.max()), m)


def sweep(pop: Population, layered: bool = False, rng=None) -> Population:
    if layered:
        return sweep_layered(pop, rng)[0]
    return sweep_sequential(pop, rng)


def equilibrate(pop: Population, sweeps: int, layered: bool = False) -> Population:
    for _ in range(sweeps):
        sweep(pop, layered)
    return pop


# --- checkpoints -----------------------------------------------------------

def save_checkpoint(pop: Population, path) -> None:
    """Lossless ``.npz`` dump of the tables, ensemble, params and RNG states."""
    meta = {
        "version": CHECKPOINT_VERSION,
        "epoch": pop.epoch,
        "seed": pop.seed if pop.seed is None or isinstance(pop.seed, int) else repr(pop.seed),
        "Q": pop.params.Q,
        "temperature": pop.params.temperature,
        "lam": pop.params.lam,
        "mean_c": pop.ensemble.mean_connectivity,
        "entropy_mode": pop.entropy_mode,
        "symmetrise": pop.symmetrise,
        "rng": pop.rng.bit_generator.state,
        "meas_rng": pop.meas_rng.bit_generator.state,
    }
    np.savez(path, F=pop.F, S=pop.S, E=pop.E, conn=pop.conn, colours=pop.colours,
             meta=np.array(json.dumps(meta)))


def load_checkpoint(path) -> Population:
    with np.load(path) as z:
        meta = json.loads(str(z["meta"]))
        if meta["version"] != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta['version']}")
        params = ModelParams(meta["Q"], meta["temperature"], meta["lam"])
        rng = np.random.default_rng()
        rng.bit_generator.state = meta["rng"]
        meas = np.random.default_rng()
        meas.bit_generator.state = meta["meas_rng"]
        return Population(F=z["F"].copy(), S=z["S"].copy(), E=z["E"].copy(),
                          conn=z["conn"].copy(), ensemble=ensemble_from_mean(meta["mean_c"],
                                                                             meta["Q"]),
                          params=params, seed=meta["seed"], rng=rng, colours=z["colours"].copy(),
                          epoch=meta["epoch"], meas_rng=meas,
                          entropy_mode=meta["entropy_mode"], symmetrise=meta["symmetrise"])
