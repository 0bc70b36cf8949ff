"""Cost function, graph ensemble and colour-space utilities.

Colours are 0-based (``0..Q-1``) everywhere inside the package.  The only
1-based surfaces are the instance text files written by :mod:`colourdiv.oracle`
and the CLI output that mirrors them.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

# below this temperature the finite-T kernels are replaced by the T=0 ones
ZERO_T_CUTOFF = 0.02


@dataclass(frozen=True)
class ModelParams:
    """Number of colours, temperature (``0.0`` is the exact T=0 mode) and the
    second-neighbour mixing ``lam`` of the interpolated model."""

    Q: int = 4
    temperature: float = 0.0
    lam: float = 1.0

    def __post_init__(self):
        if int(self.Q) != self.Q or self.Q < 2:
            raise ValueError(f"Q must be an integer >= 2, got {self.Q}")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lam must lie in [0, 1], got {self.lam}")
        if not self.temperature >= 0.0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")

    @property
    def zero_temperature(self) -> bool:
        """True when the T=0 kernels are used (exact zero or below the cutoff)."""
        return self.temperature < ZERO_T_CUTOFF

    @property
    def beta(self) -> float:
        if self.temperature == 0.0:
            raise ValueError("beta is undefined at T = 0")
        return 1.0 / self.temperature

    def with_temperature(self, temperature: float) -> "ModelParams":
        return ModelParams(self.Q, float(temperature), self.lam)

    def check_kernel_mode(self) -> bool:
        """Return the zero-T flag, warning when a small positive T is rerouted."""
        if 0.0 < self.temperature < ZERO_T_CUTOFF:
            warnings.warn(
                f"T={self.temperature} is below {ZERO_T_CUTOFF}; using the T=0 kernels",
                RuntimeWarning,
                stacklevel=3,
            )
        return self.zero_temperature


@dataclass(frozen=True)
class EnsembleSpec:
    """Linear-connectivity ensemble: degrees ``floor_c`` and ``floor_c + 1``."""

    mean_connectivity: float
    floor_c: int
    node_probs: tuple[float, float]
    excess_probs: tuple[float, float]

    @property
    def connectivities(self) -> tuple[int, int]:
        return (self.floor_c, self.floor_c + 1)

    @property
    def max_connectivity(self) -> int:
        return self.floor_c + 1 if self.node_probs[1] > 0 else self.floor_c

    def node_prob(self, c: int) -> float:
        if c == self.floor_c:
            return self.node_probs[0]
        if c == self.floor_c + 1:
            return self.node_probs[1]
        return 0.0

    def excess_prob(self, c: int) -> float:
        if c == self.floor_c:
            return self.excess_probs[0]
        if c == self.floor_c + 1:
            return self.excess_probs[1]
        return 0.0


def ensemble_from_mean(mean_c: float, Q: int | None = None) -> EnsembleSpec:
    """Linear-connectivity ensemble with mean ``mean_c``.

    Node probabilities are ``1 - <c> + floor(<c>)`` and ``<c> - floor(<c>)``;
    the link side uses the excess probabilities ``c P(c) / <c>``.
    """
    mean_c = float(mean_c)
    upper = Q if Q is not None else math.inf
    if not 2.0 <= mean_c <= upper:
        raise ValueError(f"mean connectivity must lie in [2, {upper}], got {mean_c}")
    lo = int(math.floor(mean_c))
    p_hi = mean_c - lo
    p_lo = 1.0 - p_hi
    f_lo = lo * p_lo / mean_c
    f_hi = (lo + 1) * p_hi / mean_c
    return EnsembleSpec(mean_c, lo, (p_lo, p_hi), (f_lo, f_hi))


def sample_connectivity(ensemble: EnsembleSpec, side: str, rng: np.random.Generator) -> int:
    """Draw one degree from the node (``P(c)``) or link (excess) distribution."""
    return int(sample_connectivities(ensemble, side, rng, 1)[0])


def sample_connectivities(ensemble: EnsembleSpec, side: str, rng: np.random.Generator,
                          size: int) -> np.ndarray:
    if side == "node":
        p_hi = ensemble.node_probs[1]
    elif side == "link":
        p_hi = ensemble.excess_probs[1]
    else:
        raise ValueError(f"side must be 'node' or 'link', got {side!r}")
    return ensemble.floor_c + (rng.random(size) < p_hi).astype(np.int64)


def make_rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def _check_colours(colours: Sequence[int], Q: int) -> None:
    for q in colours:
        if not 0 <= q < Q:
            raise ValueError(f"colour {q} outside 0..{Q - 1}")


def colour_counts(centre: int, neighbours: Sequence[int], Q: int) -> np.ndarray:
    _check_colours([centre, *neighbours], Q)
    counts = np.zeros(Q, dtype=np.int64)
    counts[centre] += 1
    for q in neighbours:
        counts[q] += 1
    return counts


def phi(centre: int, neighbours: Sequence[int], Q: int) -> int:
    """Sum of squared colour multiplicities in the closed neighbourhood."""
    counts = colour_counts(centre, neighbours, Q)
    return int(np.dot(counts, counts))


def phi_lambda(centre: int, neighbours: Sequence[int], Q: int, lam: float) -> float:
    """Interpolated cost ``(c+1) + 2 #(centre-neighbour coincidences)
    + 2 lam #(unordered neighbour-neighbour coincidences)``.

    ``lam = 1`` recovers :func:`phi`, ``lam = 0`` is plain graph colouring.
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lam must lie in [0, 1], got {lam}")
    _check_colours([centre, *neighbours], Q)
    direct = sum(1 for q in neighbours if q == centre)
    pairs = sum(1 for j, k in itertools.combinations(neighbours, 2) if j == k)
    return (len(neighbours) + 1) + 2.0 * direct + 2.0 * lam * pairs


def optimal_count_pattern(Q: int, m: int) -> tuple[int, ...]:
    """Colour multiplicities minimising ``sum n_q^2`` with ``sum n_q = m``.

    ``m mod Q`` colours appear ``ceil(m/Q)`` times, the rest ``floor(m/Q)``
    times; returned in descending order.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    base, extra = divmod(m, Q)
    return tuple([base + 1] * extra + [base] * (Q - extra))


def min_phi(Q: int, c: int) -> int:
    """Smallest possible phi for a node with ``c`` neighbours."""
    return sum(n * n for n in optimal_count_pattern(Q, c + 1))


@lru_cache(maxsize=None)
def colour_vectors(Q: int, length: int) -> np.ndarray:
    """All ``Q**length`` colour vectors, lexicographic, shape ``(Q**length, length)``."""
    if length == 0:
        return np.zeros((1, 0), dtype=np.int64)
    grid = np.array(list(itertools.product(range(Q), repeat=length)), dtype=np.int64)
    grid.setflags(write=False)
    return grid


@lru_cache(maxsize=None)
def phi_table(Q: int, c: int, lam: float = 1.0) -> np.ndarray:
    """Cost of a degree-``c`` node for every (ancestor, node, descendants) colouring.

    Shape ``(Q, Q, Q**(c-1))``; entry ``[a, b, k]`` is the cost centred on a
    node of colour ``b`` whose ancestor has colour ``a`` and whose ``c-1``
    descendants carry ``colour_vectors(Q, c-1)[k]``.
    """
    desc = colour_vectors(Q, c - 1)
    out = np.empty((Q, Q, desc.shape[0]), dtype=np.float64)
    for a in range(Q):
        for b in range(Q):
            for k, qs in enumerate(desc):
                nb = (a, *qs)
                out[a, b, k] = phi(b, nb, Q) if lam == 1.0 else phi_lambda(b, nb, Q, lam)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def neighbourhood_table(Q: int, c: int, lam: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Closed-neighbourhood colourings of a degree-``c`` node and their costs.

    Returns ``(colourings, costs)``: colourings has shape ``(Q**(c+1), c+1)``
    with the centre colour in column 0.
    """
    conf = colour_vectors(Q, c + 1)
    costs = np.array(
        [phi(r[0], r[1:], Q) if lam == 1.0 else phi_lambda(r[0], r[1:], Q, lam) for r in conf],
        dtype=np.float64,
    )
    costs.setflags(write=False)
    return conf, costs
