"""Ensemble observables measured on a population snapshot.

A measurement creates test nodes, connects each to ``c`` members drawn with
the excess probabilities, and averages over the test node's closed
neighbourhood colourings.  The members used by the test nodes are then
paired at random into links, each member appearing in the link term exactly
as often as in the node term, so the per-member gauge constants cancel.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from numba import njit

from .cavity import TIE_TOL
from .model import EnsembleSpec, ModelParams, neighbourhood_table
from .population import Population, draw_members

HIST_BINS = 200


@dataclass
class ObservableRecord:
    f_av: float
    e_av_local: float
    e_av_global: float
    s_av: float
    q_ea: float
    f_incom: float
    f_incom_by_c: tuple[float, float]
    f_unsat: float
    moment_histogram: np.ndarray = field(repr=False)
    d: float = float("nan")
    sample_count: int = 0
    mean_c: float = float("nan")
    temperature: float = float("nan")
    epoch: int = 0

    def row(self) -> dict:
        out = asdict(self)
        out.pop("moment_histogram")
        lo, hi = out.pop("f_incom_by_c")
        out["f_incom_lo"], out["f_incom_hi"] = lo, hi
        return out


@dataclass
class MatchedSample:
    """Test-node degrees, their neighbour members and the link pairing.

    Every member index occurs in ``pairs`` exactly as often as in
    ``neighbours`` (padding entries ``-1`` excluded).
    """

    degrees: np.ndarray
    neighbours: np.ndarray
    pairs: np.ndarray

    @property
    def usage(self) -> np.ndarray:
        return self.neighbours[self.neighbours >= 0]

    def check(self) -> None:
        a = np.sort(self.usage)
        b = np.sort(self.pairs.ravel())
        if a.shape != b.shape or not np.array_equal(a, b):
            raise ValueError("link pairs do not reuse the node-term member multiset")


def matched_sample(pop: Population, n_test: int, rng: np.random.Generator | None = None
                   ) -> MatchedSample:
    rng = pop.meas_rng if rng is None else rng
    ens = pop.ensemble
    lo = ens.floor_c
    degrees = lo + (rng.random(n_test) < ens.node_probs[1]).astype(np.int64)
    while degrees.sum() % 2:
        # one extra test node until the usage multiset can be paired exactly
        degrees = np.append(degrees, lo + int(rng.random() < ens.node_probs[1]))
    width = lo + 1
    nb = draw_members(pop.conn, ens, rng, (len(degrees), width))
    nb[degrees == lo, lo] = -1
    usage = nb[nb >= 0]
    pairs = rng.permutation(usage).reshape(-1, 2)
    return MatchedSample(degrees, nb, pairs)


def _aux_tables(Q, c, lam):
    conf, cost = neighbourhood_table(Q, c, lam)
    present = np.zeros(len(conf), dtype=np.int64)
    for k, row in enumerate(conf):
        present[k] = len(set(row.tolist()))
    missing = Q - present
    return np.ascontiguousarray(conf), cost, missing


@njit(cache=True)
def _measure_nodes(F, S, E, degrees, nb, conf_lo, cost_lo, miss_lo, conf_hi, cost_hi, miss_hi,
                   c_lo, zero_t, beta, with_energy, tol, f_out, el_out, eg_out, s_out,
                   mom_out, inc_out, uns_out, weights_out):
    Q = F.shape[1]
    Kmax = cost_hi.shape[0]
    v = np.empty(Kmax)
    w = np.empty(Kmax)
    xs = np.empty(Kmax)
    for i in range(degrees.shape[0]):
        c = degrees[i]
        if c == c_lo:
            conf = conf_lo
            cost = cost_lo
            miss = miss_lo
        else:
            conf = conf_hi
            cost = cost_hi
            miss = miss_hi
        K = cost.shape[0]
        m = np.inf
        for k in range(K):
            qi = conf[k, 0]
            acc = cost[k]
            for t in range(c):
                acc += F[nb[i, t], qi, conf[k, t + 1]]
            v[k] = acc
            if acc < m:
                m = acc
        if zero_t:
            smax = -np.inf
            for k in range(K):
                if v[k] <= m + tol:
                    sacc = 0.0
                    qi = conf[k, 0]
                    for t in range(c):
                        sacc += S[nb[i, t], qi, conf[k, t + 1]]
                    xs[k] = sacc
                    if sacc > smax:
                        smax = sacc
            Z = 0.0
            for k in range(K):
                if v[k] <= m + tol:
                    w[k] = np.exp(xs[k] - smax)
                else:
                    w[k] = 0.0
                Z += w[k]
            f_out[i] = m
            s_out[i] = smax + np.log(Z)
        else:
            Z = 0.0
            for k in range(K):
                w[k] = np.exp(-beta * (v[k] - m))
                Z += w[k]
            f_out[i] = m - np.log(Z) / beta
            s_out[i] = 0.0
        el = 0.0
        eg = 0.0
        inc = 0.0
        uns = 0.0
        for q in range(Q):
            mom_out[i, q] = 0.0
        for k in range(K):
            if w[k] == 0.0:
                continue
            p = w[k] / Z
            el += p * cost[k]
            if with_energy:
                qi = conf[k, 0]
                acc = cost[k]
                for t in range(c):
                    acc += E[nb[i, t], qi, conf[k, t + 1]]
                eg += p * acc
            mom_out[i, conf[k, 0]] += p
            if miss[k] > 0:
                inc += p
                uns += p * miss[k] / Q
        el_out[i] = el
        eg_out[i] = eg
        inc_out[i] = inc
        uns_out[i] = uns
        wsum = 0.0
        for q in range(Q):
            wsum += mom_out[i, q]
        weights_out[i] = wsum


@njit(cache=True)
def _measure_links(F, S, E, pairs, zero_t, beta, with_energy, tol, f_out, e_out, s_out):
    Q = F.shape[1]
    v = np.empty((Q, Q))
    for p in range(pairs.shape[0]):
        i = pairs[p, 0]
        j = pairs[p, 1]
        m = np.inf
        for a in range(Q):
            for b in range(Q):
                x = F[i, a, b] + F[j, b, a]
                v[a, b] = x
                if x < m:
                    m = x
        if zero_t:
            smax = -np.inf
            for a in range(Q):
                for b in range(Q):
                    if v[a, b] <= m + tol:
                        y = S[i, a, b] + S[j, b, a]
                        if y > smax:
                            smax = y
            Z = 0.0
            for a in range(Q):
                for b in range(Q):
                    if v[a, b] <= m + tol:
                        Z += np.exp(S[i, a, b] + S[j, b, a] - smax)
            f_out[p] = m
            s_out[p] = smax + np.log(Z)
            e_out[p] = 0.0
        else:
            Z = 0.0
            ez = 0.0
            for a in range(Q):
                for b in range(Q):
                    wt = np.exp(-beta * (v[a, b] - m))
                    Z += wt
                    if with_energy:
                        ez += wt * (E[i, a, b] + E[j, b, a])
            f_out[p] = m - np.log(Z) / beta
            e_out[p] = ez / Z
            s_out[p] = 0.0


@dataclass
class NodeTerms:
    """Per-test-node averages and per-link terms of one matched measurement."""

    sample: MatchedSample
    f_node: np.ndarray
    e_local: np.ndarray
    e_node: np.ndarray
    s_node: np.ndarray
    moments: np.ndarray
    incom: np.ndarray
    unsat: np.ndarray
    f_link: np.ndarray
    e_link: np.ndarray
    s_link: np.ndarray
    zero_t: bool


def measure_terms(pop: Population, sample: MatchedSample, with_energy: bool | None = None
                  ) -> NodeTerms:
    params = pop.params
    zero_t = params.zero_temperature
    beta = 0.0 if zero_t else params.beta
    if with_energy is None:
        with_energy = not zero_t
    lo = pop.ensemble.floor_c
    conf_lo, cost_lo, miss_lo = _aux_tables(params.Q, lo, params.lam)
    conf_hi, cost_hi, miss_hi = _aux_tables(params.Q, lo + 1, params.lam)
    n = len(sample.degrees)
    f, el, eg, s, inc, uns, wts = (np.empty(n) for _ in range(7))
    mom = np.empty((n, params.Q))
    _measure_nodes(pop.F, pop.S, pop.E, sample.degrees, sample.neighbours, conf_lo, cost_lo,
                   miss_lo, conf_hi, cost_hi, miss_hi, lo, zero_t, beta, with_energy, TIE_TOL,
                   f, el, eg, s, mom, inc, uns, wts)
    if not np.allclose(wts, 1.0, atol=1e-9):
        raise FloatingPointError("node weights do not normalise")
    npair = len(sample.pairs)
    fl, enl, sl = np.empty(npair), np.empty(npair), np.empty(npair)
    _measure_links(pop.F, pop.S, pop.E, sample.pairs, zero_t, beta, with_energy, TIE_TOL,
                   fl, enl, sl)
    return NodeTerms(sample, f, el, eg, s, mom, inc, uns, fl, enl, sl, zero_t)


def measure_node_average(pop: Population, functional, samples: int = 10_000, rng=None):
    """Weighted node average of ``functional(centre, neighbours)`` with its
    standard error over test nodes.  At T=0 the weights live on the minimising
    colourings and are ``exp(sum of vertex entropies)``."""
    params = pop.params
    sample = matched_sample(pop, samples, rng)
    zero_t = params.zero_temperature
    vals = []
    for c, nb in zip(sample.degrees, sample.neighbours):
        nb = nb[:c]
        conf, cost = neighbourhood_table(params.Q, int(c), params.lam)
        v = cost.copy()
        for t in range(c):
            v += pop.F[nb[t], conf[:, 0], conf[:, t + 1]]
        if zero_t:
            hit = v <= v.min() + TIE_TOL
            x = np.full(len(v), -np.inf)
            x[hit] = sum(pop.S[nb[t], conf[hit, 0], conf[hit, t + 1]] for t in range(c))
        else:
            x = -params.beta * v
        w = np.exp(x - x.max())
        w /= w.sum()
        a = np.array([functional(int(r[0]), r[1:]) for r in conf], dtype=float)
        vals.append(float(w @ a))
    vals = np.asarray(vals)
    return vals.mean(), vals.std(ddof=1) / math.sqrt(len(vals)) if len(vals) > 1 else 0.0


def free_energy_average(terms: NodeTerms) -> float:
    """Node term minus the matched link term: ``(sum f_node - sum f_link) / n``."""
    terms.sample.check()
    return (terms.f_node.sum() - terms.f_link.sum()) / len(terms.f_node)


def energy_estimates(terms: NodeTerms) -> tuple[float, float]:
    """Local (``<phi>``) and global (vertex-energy) estimates of the energy."""
    local = float(terms.e_local.mean())
    if terms.zero_t:
        return local, free_energy_average(terms)
    terms.sample.check()
    glob = (terms.e_node.sum() - terms.e_link.sum()) / len(terms.e_node)
    return local, float(glob)


def entropy_average(terms: NodeTerms, temperature: float | None = None) -> float:
    if terms.zero_t:
        terms.sample.check()
        return float((terms.s_node.sum() - terms.s_link.sum()) / len(terms.s_node))
    if not temperature:
        raise ValueError("finite-T entropy needs the temperature")
    f = free_energy_average(terms)
    _, e = energy_estimates(terms)
    return float((e - f) / temperature)


def q_ea_from_moments(moments: np.ndarray) -> float:
    Q = moments.shape[1]
    return float(Q / (Q - 1) * np.mean(np.sum((moments - 1.0 / Q) ** 2, axis=1)))


def moment_histogram(moments: np.ndarray, bins: int = HIST_BINS) -> tuple[np.ndarray, np.ndarray]:
    """Density of colour moments on ``[0, 1]``; returns ``(bin_centres, density)``."""
    edges = np.linspace(0.0, 1.0, bins + 1)
    # nudge exact rationals away from bin edges
    dens, _ = np.histogram(np.clip(moments.ravel(), 0.0, 1.0), bins=edges, density=True)
    return 0.5 * (edges[1:] + edges[:-1]), dens


def order_parameters(terms: NodeTerms):
    q = q_ea_from_moments(terms.moments)
    return q, moment_histogram(terms.moments)[1]


def satisfaction_fractions(terms: NodeTerms, floor_c: int):
    deg = terms.sample.degrees
    by_c = []
    for c in (floor_c, floor_c + 1):
        mask = deg == c
        by_c.append(float(terms.incom[mask].mean()) if mask.any() else float("nan"))
    return float(terms.incom.mean()), tuple(by_c), float(terms.unsat.mean())


def damage_distance(pop_a: Population, pop_b: Population, samples: int = 10_000,
                    rng=None) -> float:
    """Mean squared difference of colour moments on shared test nodes."""
    if pop_a.N != pop_b.N:
        raise ValueError("damage pair populations differ in size")
    sample = matched_sample(pop_a, samples, rng)
    ma = measure_terms(pop_a, sample, with_energy=False).moments
    mb = measure_terms(pop_b, sample, with_energy=False).moments
    return float(np.mean(np.sum((ma - mb) ** 2, axis=1)))


def measure(pop: Population, samples: int = 10_000, rng=None) -> ObservableRecord:
    sample = matched_sample(pop, samples, rng)
    terms = measure_terms(pop, sample)
    f = free_energy_average(terms)
    el, eg = energy_estimates(terms)
    T = pop.params.temperature
    if terms.zero_t:
        s = entropy_average(terms)
    else:
        s = (eg - f) / T
    q, hist = order_parameters(terms)
    inc, inc_c, uns = satisfaction_fractions(terms, pop.ensemble.floor_c)
    return ObservableRecord(f_av=float(f), e_av_local=el, e_av_global=float(eg), s_av=s,
                            q_ea=q, f_incom=inc, f_incom_by_c=inc_c, f_unsat=uns,
                            moment_histogram=hist, sample_count=len(sample.degrees),
                            mean_c=pop.ensemble.mean_connectivity, temperature=T,
                            epoch=pop.epoch)
