"""Run protocols built on the sweeps: plain runs, feedback-controlled runs,
annealed continuation and damage-spreading pairs."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .model import ZERO_T_CUTOFF
from .observables import ObservableRecord, damage_distance, matched_sample, measure, \
    measure_terms, q_ea_from_moments, satisfaction_fractions
from .population import Population, _run_sweep, draw_sweep, equilibrate, member_table, sweep

log = logging.getLogger(__name__)


class ControlError(RuntimeError):
    """The control variable was pinned at its admissible bound."""


@dataclass
class ControlTarget:
    """Feedback target.  ``kind`` is ``"fixed_fincom"`` (controls ``<c>``) or
    ``"fixed_qea"`` (controls T).  Both observables decrease with their control
    variable, so the step is ``-gain * (target - measured)``.

    ``proportional`` adds a term ``-proportional * (target - measured)`` that
    is not accumulated (PI control); an integral-only loop cannot hold an
    unstable branch.
    """

    kind: str
    target: float
    gain: float = 0.1
    window: int = 50
    proportional: float = 0.0

    def __post_init__(self):
        if self.kind not in ("fixed_fincom", "fixed_qea"):
            raise ValueError(f"unknown control kind {self.kind!r}")
        if not 0.0 <= self.target <= 1.0:
            raise ValueError(f"target {self.target} outside [0, 1]")
        if self.gain <= 0 or self.proportional < 0:
            raise ValueError("gains must be positive")

    @property
    def control_variable(self) -> str:
        return "mean_connectivity" if self.kind == "fixed_fincom" else "temperature"


@dataclass
class Trajectory:
    control: list[float] = field(default_factory=list)
    records: list[ObservableRecord] = field(default_factory=list)

    def append(self, x: float, rec: ObservableRecord) -> None:
        self.control.append(float(x))
        self.records.append(rec)

    def converged(self, window: int) -> float:
        return float(np.mean(self.control[-window:]))

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])


C_RANGE = (3.0, 4.0)
T_RANGE = (ZERO_T_CUTOFF, 5.0)


def _interpolated_fincom(pop: Population, by_c) -> float:
    """``p_lo f_lo + p_hi f_hi`` at the current ensemble."""
    lo, hi = by_c
    p_lo, p_hi = pop.ensemble.node_probs
    if p_hi == 0 or np.isnan(hi):
        return lo
    if p_lo == 0 or np.isnan(lo):
        return hi
    return p_lo * lo + p_hi * hi


def run_controlled(pop: Population, control: ControlTarget, sweeps: int,
                   samples: int = 2000) -> tuple[float, Trajectory]:
    """Sweep while steering ``<c>`` or T toward the target observable.

    Returns the converged control value (mean over the last ``window``
    sweeps) and the full trajectory.  Overshoot is clamped to ``<c>`` in
    [3, 4] or T in ``[0.02, 5]``; pinning at a bound for a whole window aborts.
    """
    traj = Trajectory()
    lo_b, hi_b = C_RANGE if control.kind == "fixed_fincom" else T_RANGE
    pinned = 0
    base = pop.ensemble.mean_connectivity if control.kind == "fixed_fincom" \
        else pop.params.temperature
    for _ in range(sweeps):
        sweep(pop)
        sample = matched_sample(pop, samples)
        terms = measure_terms(pop, sample, with_energy=False)
        if control.kind == "fixed_fincom":
            _, by_c, _ = satisfaction_fractions(terms, pop.ensemble.floor_c)
            measured = _interpolated_fincom(pop, by_c)
        else:
            measured = q_ea_from_moments(terms.moments)
        err = control.target - measured
        raw = base - control.gain * err
        base = min(max(raw, lo_b), hi_b)
        new = base - control.proportional * err
        clamped = min(max(new, lo_b), hi_b)
        pinned = pinned + 1 if (clamped != new or base != raw) else 0
        if pinned >= control.window:
            raise ControlError(f"{control.control_variable} pinned at {clamped} "
                               f"(target {control.target}, measured {measured:.4f})")
        if control.kind == "fixed_fincom":
            pop.set_mean_connectivity(clamped)
        else:
            pop.set_temperature(clamped)
        rec = _quick_record(pop, terms, measured, control)
        traj.append(clamped, rec)
    return traj.converged(min(control.window, len(traj.control))), traj


def _quick_record(pop, terms, measured, control):
    inc, by_c, uns = satisfaction_fractions(terms, pop.ensemble.floor_c)
    q = q_ea_from_moments(terms.moments)
    return ObservableRecord(f_av=float("nan"), e_av_local=float(terms.e_local.mean()),
                            e_av_global=float("nan"), s_av=float("nan"), q_ea=q,
                            f_incom=inc, f_incom_by_c=by_c, f_unsat=uns,
                            moment_histogram=np.empty(0),
                            sample_count=len(terms.sample.degrees),
                            mean_c=pop.ensemble.mean_connectivity,
                            temperature=pop.params.temperature, epoch=pop.epoch)


def run_plain(pop: Population, equilibration: int = 200, measurement: int = 100,
              measure_every: int = 10, samples: int = 10_000) -> list[ObservableRecord]:
    """Equilibrate, then measure every ``measure_every`` sweeps."""
    equilibrate(pop, equilibration)
    out = []
    for k in range(1, measurement + 1):
        sweep(pop)
        if k % measure_every == 0:
            out.append(measure(pop, samples))
    return out


def run_annealed(pop: Population, schedule, variable: str = "mean_connectivity",
                 equilibration: int = 200, measurement: int = 100, measure_every: int = 10,
                 samples: int = 10_000) -> list[tuple[float, list[ObservableRecord]]]:
    """Step ``<c>`` or T through a monotone schedule, equilibrating at each point."""
    schedule = [float(x) for x in schedule]
    diffs = np.diff(schedule)
    if len(schedule) > 1 and not (np.all(diffs >= 0) or np.all(diffs <= 0)):
        raise ValueError("annealing schedule must be monotone")
    if variable not in ("mean_connectivity", "temperature"):
        raise ValueError(f"cannot anneal {variable!r}")
    out = []
    for x in schedule:
        if variable == "mean_connectivity":
            pop.set_mean_connectivity(x)
        else:
            pop.set_temperature(x)
        out.append((x, run_plain(pop, equilibration, measurement, measure_every, samples)))
    return out


def damage(pop: Population, node: int, colour_bias: float | None = None,
           rng: np.random.Generator | None = None) -> tuple[Population, np.ndarray]:
    """Clone of ``pop`` whose descendants of ``node`` (as drawn for the next
    sweep) have their nominal colours relabelled ``q -> Q-1-q`` and their
    tables reset accordingly.  Returns the clone and the damaged members."""
    from .population import DEFAULT_COLOUR_BIAS
    bias = DEFAULT_COLOUR_BIAS if colour_bias is None else colour_bias
    rng = np.random.default_rng(0) if rng is None else rng
    _, desc, _ = draw_sweep(pop, rng)
    hit = np.unique(desc[node, :pop.conn[node] - 1])
    twin = pop.copy()
    Q = pop.Q
    for k in hit:
        twin.colours[k] = Q - 1 - twin.colours[k]
        twin.F[k] = member_table(Q, int(twin.colours[k]), bias)
        twin.S[k] = 0.0
        twin.E[k] = 0.0
    return twin, hit


def evolve_damage_pair(pop: Population, seed, sweeps: int = 200, samples: int = 10_000,
                       node: int | None = None, perturb: bool = True,
                       measure_every: int = 1) -> np.ndarray:
    """Evolve ``pop`` and a damaged clone under one shared randomness stream.

    Both populations receive the same update order and descendant indices on
    every sweep and are measured on the same test nodes.  Returns ``d`` per
    measured epoch (index 0 is before the first sweep).
    """
    rng = np.random.default_rng(seed)
    if node is None:
        node = int(rng.integers(pop.N))
    twin, _ = damage(pop, node, rng=np.random.default_rng(rng.integers(2**63)))
    if not perturb:
        twin = pop.copy()
    a, b = pop, twin
    ds = [damage_distance(a, b, samples, np.random.default_rng(rng.integers(2**63)))]
    for t in range(1, sweeps + 1):
        draw = draw_sweep(a, rng)
        _run_sweep(a, draw, layered=False)
        _run_sweep(b, draw, layered=False)
        if t % measure_every == 0:
            ds.append(damage_distance(a, b, samples,
                                      np.random.default_rng(rng.integers(2**63))))
    return np.asarray(ds)
