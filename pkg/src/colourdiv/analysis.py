"""Steady-state runs and transition locators shared by the CLI, demos and tests."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ModelParams, ensemble_from_mean
from .observables import ObservableRecord
from .paramagnet import ParamagneticState, fixed_point_z, paramagnetic_thermodynamics, \
    z_population
from .population import equilibrate, init_population
from .protocols import ControlTarget, evolve_damage_pair, run_controlled, run_plain

SCALARS = ("f_av", "e_av_local", "e_av_global", "s_av", "q_ea", "f_incom", "f_unsat")


@dataclass
class SteadyState:
    """Per-sample time averages of the scalar observables."""

    mean_c: float
    temperature: float
    per_sample: dict[str, np.ndarray]
    histogram: np.ndarray
    records: list[list[ObservableRecord]]

    def mean(self, key: str) -> float:
        return float(np.mean(self.per_sample[key]))

    def stderr(self, key: str) -> float:
        v = self.per_sample[key]
        return float(np.std(v, ddof=1) / math.sqrt(len(v))) if len(v) > 1 else 0.0


def steady_state(mean_c: float, T: float = 0.0, init: str = "zero", samples: int = 1,
                 N: int = 10_000, seed: int = 1, Q: int = 4, lam: float = 1.0,
                 equilibration: int = 200, measurement: int = 100, measure_every: int = 10,
                 test_nodes: int = 10_000, epsilon: float = 1e-6, **pop_kw) -> SteadyState:
    """Run ``samples`` independent populations and average each over its
    measurement phase."""
    ens = ensemble_from_mean(mean_c, Q)
    params = ModelParams(Q, T, lam)
    seeds = np.random.SeedSequence(seed).spawn(samples)
    acc = {k: [] for k in SCALARS}
    hist = []
    recs = []
    for ss in seeds:
        pop = init_population(N, ens, params, mode=init, epsilon=epsilon, seed=ss, **pop_kw)
        rs = run_plain(pop, equilibration, measurement, measure_every, test_nodes)
        recs.append(rs)
        for k in SCALARS:
            acc[k].append(np.mean([getattr(r, k) for r in rs]))
        hist.append(np.mean([r.moment_histogram for r in rs], axis=0))
    return SteadyState(mean_c, T, {k: np.asarray(v) for k, v in acc.items()},
                       np.mean(hist, axis=0), recs)


def paramagnetic_free_energy(mean_c: float, T: float, Q: int = 4, M: int = 10_000,
                             seed=0) -> float:
    params = ModelParams(Q, T)
    ens = ensemble_from_mean(mean_c, Q)
    if T == 0.0 and Q == 4:
        return 4 * ens.node_probs[0] + 7 * ens.node_probs[1] if ens.floor_c == 3 else \
            float("nan")
    if ens.node_probs[1] == 0.0:
        z = fixed_point_z(ens.floor_c, params)
        st = ParamagneticState(np.array([z]), np.array([ens.floor_c]), params, ens)
    else:
        st = z_population(ens, params, M, seed)
    return paramagnetic_thermodynamics(st, seed=seed).f_av


def first_crossing(xs, ys) -> float:
    """Linear interpolation of the first sign change of ``ys`` along ``xs``."""
    xs, ys = np.asarray(xs, float), np.asarray(ys, float)
    for k in range(len(xs) - 1):
        if ys[k] == 0.0:
            return float(xs[k])
        if ys[k] * ys[k + 1] < 0:
            return float(xs[k] - ys[k] * (xs[k + 1] - xs[k]) / (ys[k + 1] - ys[k]))
    raise ValueError("no sign change on the grid")


def discontinuity(xs, ys, floor: float = 0.005, jump: float = 0.02) -> float:
    """Midpoint of the first step where ``ys`` falls from above ``jump`` to
    below ``floor``."""
    for k in range(len(xs) - 1):
        if ys[k] > jump and ys[k + 1] < floor:
            return 0.5 * (xs[k] + xs[k + 1])
    raise ValueError("no discontinuous drop on the grid")


def branch_merge(qs, Ts) -> tuple[float, float]:
    """Vertex ``(q*, T*)`` of a quadratic fit ``T(q)`` through the controlled
    branch points; ``T*`` is where the stable and unstable branches merge."""
    a, b, c = np.polyfit(np.asarray(qs, float), np.asarray(Ts, float), 2)
    if a >= 0:
        raise ValueError("branch points do not bend over; no merging found")
    q = -b / (2 * a)
    return float(q), float(c - b * b / (4 * a))


def controlled_temperature(q_target: float, mean_c: float = 3.0, T0: float = 0.56,
                           N: int = 10_000, seed: int = 1, warmup: int = 100,
                           sweeps: int = 300, gain: float = 0.01, proportional: float = 1.0,
                           window: int = 100, samples: int = 2000) -> float:
    """Temperature that holds ``q_EA`` at ``q_target`` (stable or unstable branch)."""
    pop = init_population(N, ensemble_from_mean(mean_c), ModelParams(4, T0), mode="random",
                          seed=seed)
    equilibrate(pop, warmup)
    T, _ = run_controlled(pop, ControlTarget("fixed_qea", q_target, gain=gain,
                                             proportional=proportional, window=window),
                          sweeps, samples)
    return T


def damage_final(mean_c: float, samples: int = 30, N: int = 10_000, seed: int = 1,
                 sweeps: int = 60, tail: int = 20, test_nodes: int = 2000,
                 measure_every: int = 5) -> np.ndarray:
    """Per-sample damage distance averaged over the last ``tail`` sweeps."""
    out = []
    keep = max(tail // measure_every, 1)
    for ss in np.random.SeedSequence(seed).spawn(samples):
        pop = init_population(N, ensemble_from_mean(mean_c), ModelParams(4, 0.0), seed=ss)
        d = evolve_damage_pair(pop, seed=ss.spawn(1)[0], sweeps=sweeps, samples=test_nodes,
                               measure_every=measure_every)
        out.append(float(np.mean(d[-keep:])))
    return np.asarray(out)
