"""Finite graph instances: generation, exact ground states and annealing.

These are instance-level checks of the zero-T ensemble claims.  Small graphs
carry many short loops, so nothing here stands in for ensemble numbers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numba import njit

from .model import EnsembleSpec, min_phi


@dataclass
class GraphInstance:
    """Simple undirected graph; ``edges`` holds 0-based ``(u, v)`` with ``u < v``."""

    N: int
    edges: np.ndarray

    @property
    def adjacency(self) -> list[np.ndarray]:
        nb = [[] for _ in range(self.N)]
        for u, v in self.edges:
            nb[u].append(v)
            nb[v].append(u)
        return [np.array(sorted(x), dtype=np.int64) for x in nb]

    @property
    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.N)

    @property
    def mean_connectivity(self) -> float:
        return 2.0 * len(self.edges) / self.N

    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        adj = self.adjacency
        ptr = np.zeros(self.N + 1, dtype=np.int64)
        ptr[1:] = np.cumsum([len(a) for a in adj])
        idx = np.concatenate(adj) if self.N else np.zeros(0, dtype=np.int64)
        return ptr, idx.astype(np.int64)

    def lower_bound(self, Q: int) -> int:
        """Sum over nodes of the smallest possible neighbourhood cost."""
        return int(sum(min_phi(Q, int(c)) for c in self.degrees))


@dataclass
class ColourAssignment:
    colours: np.ndarray
    energy: int
    f_incom: float
    f_unsat: float


class InstanceError(RuntimeError):
    pass


def generate_instance(N: int, ensemble: EnsembleSpec, seed=None,
                      max_attempts: int = 10_000) -> GraphInstance:
    """Configuration-model graph with degrees drawn from the node probabilities;
    pairings with self-loops or repeated edges are rejected and redrawn."""
    rng = np.random.default_rng(seed)
    lo = ensemble.floor_c
    if ensemble.node_probs[1] == 0.0 and (N * lo) % 2:
        raise InstanceError(f"a {lo}-regular graph needs N * {lo} even, got N={N}")
    for _ in range(max_attempts):
        deg = lo + (rng.random(N) < ensemble.node_probs[1]).astype(np.int64)
        if deg.sum() % 2 or deg.max() >= N:
            continue
        stubs = np.repeat(np.arange(N), deg)
        for _ in range(100):
            pairs = rng.permutation(stubs).reshape(-1, 2)
            pairs.sort(axis=1)
            if np.any(pairs[:, 0] == pairs[:, 1]):
                continue
            if len(np.unique(pairs, axis=0)) != len(pairs):
                continue
            order = np.lexsort((pairs[:, 1], pairs[:, 0]))
            return GraphInstance(N, pairs[order])
    raise InstanceError(f"no simple graph found for N={N}, <c>={ensemble.mean_connectivity} "
                        f"after {max_attempts} degree sequences")


def complete_graph(N: int) -> GraphInstance:
    edges = np.array([(u, v) for u in range(N) for v in range(u + 1, N)], dtype=np.int64)
    return GraphInstance(N, edges.reshape(-1, 2))


@njit(cache=True)
def _counts(colours, ptr, idx, Q):
    N = colours.shape[0]
    cnt = np.zeros((N, Q), dtype=np.int64)
    for j in range(N):
        cnt[j, colours[j]] += 1
        for t in range(ptr[j], ptr[j + 1]):
            cnt[j, colours[idx[t]]] += 1
    return cnt


@njit(cache=True)
def _energy(colours, ptr, idx, Q):
    cnt = _counts(colours, ptr, idx, Q)
    e = 0
    for j in range(cnt.shape[0]):
        for q in range(Q):
            e += cnt[j, q] * cnt[j, q]
    return e


def evaluate(graph: GraphInstance, colours, Q: int) -> ColourAssignment:
    colours = np.asarray(colours, dtype=np.int64)
    if colours.shape != (graph.N,) or colours.min(initial=0) < 0 or colours.max(initial=0) >= Q:
        raise ValueError("colour vector does not match the graph and Q")
    ptr, idx = graph.csr()
    cnt = _counts(colours, ptr, idx, Q)
    missing = (cnt == 0).sum(axis=1)
    return ColourAssignment(colours, int((cnt ** 2).sum()), float(np.mean(missing > 0)),
                            float(np.mean(missing / Q)))


@njit(cache=True)
def _recolour(cnt, colours, ptr, idx, v, new):
    """Move node ``v`` to colour ``new``; returns the energy change."""
    old = colours[v]
    if old == new:
        return 0
    d = 2 * (cnt[v, new] - cnt[v, old] + 1)
    cnt[v, old] -= 1
    cnt[v, new] += 1
    for t in range(ptr[v], ptr[v + 1]):
        j = idx[t]
        d += 2 * (cnt[j, new] - cnt[j, old] + 1)
        cnt[j, old] -= 1
        cnt[j, new] += 1
    colours[v] = new
    return d


@njit(cache=True)
def _exhaustive(ptr, idx, Q, N):
    """All colourings with node 0 fixed to colour 0, odometer order."""
    colours = np.zeros(N, dtype=np.int64)
    cnt = _counts(colours, ptr, idx, Q)
    e = 0
    for j in range(N):
        for q in range(Q):
            e += cnt[j, q] * cnt[j, q]
    best = e
    count = 1
    witness = colours.copy()
    while True:
        i = N - 1
        while i >= 1 and colours[i] == Q - 1:
            e += _recolour(cnt, colours, ptr, idx, i, 0)
            i -= 1
        if i < 1:
            break
        e += _recolour(cnt, colours, ptr, idx, i, colours[i] + 1)
        if e < best:
            best = e
            count = 1
            witness[:] = colours
        elif e == best:
            count += 1
    return best, count, witness


@njit(cache=True)
def _node_bound(cnt_row, free, Q):
    """Smallest sum of squares reachable by adding ``free`` items to ``cnt_row``."""
    tmp = cnt_row.copy()
    for _ in range(free):
        k = 0
        for q in range(1, Q):
            if tmp[q] < tmp[k]:
                k = q
        tmp[k] += 1
    s = 0
    for q in range(Q):
        s += tmp[q] * tmp[q]
    return s


@njit(cache=True)
def _branch_and_bound(ptr, idx, order, Q, N, upper, budget):
    colours = -np.ones(N, dtype=np.int64)
    cnt = np.zeros((N, Q), dtype=np.int64)
    free = np.empty(N, dtype=np.int64)
    lb = np.empty(N, dtype=np.int64)
    for j in range(N):
        free[j] = ptr[j + 1] - ptr[j] + 1
        lb[j] = _node_bound(cnt[j], free[j], Q)
    total = lb.sum()
    root = total
    best = upper
    witness = -np.ones(N, dtype=np.int64)
    tries = -np.ones(N, dtype=np.int64)
    used = np.zeros(N + 1, dtype=np.int64)  # colours in use before position k
    k = 0
    visits = 0
    exact = True
    while k >= 0:
        v = order[k]
        if colours[v] >= 0:
            q = colours[v]
            cnt[v, q] -= 1
            free[v] += 1
            for t in range(ptr[v], ptr[v + 1]):
                cnt[idx[t], q] -= 1
                free[idx[t]] += 1
            colours[v] = -1
            total -= lb[v]
            lb[v] = _node_bound(cnt[v], free[v], Q)
            total += lb[v]
            for t in range(ptr[v], ptr[v + 1]):
                j = idx[t]
                total -= lb[j]
                lb[j] = _node_bound(cnt[j], free[j], Q)
                total += lb[j]
        q = tries[k] + 1
        # colour symmetry: a new colour may only be the lowest unused one
        if q >= Q or q > used[k]:
            tries[k] = -1
            k -= 1
            continue
        tries[k] = q
        visits += 1
        if visits > budget:
            exact = False
            break
        colours[v] = q
        cnt[v, q] += 1
        free[v] -= 1
        for t in range(ptr[v], ptr[v + 1]):
            cnt[idx[t], q] += 1
            free[idx[t]] -= 1
        total -= lb[v]
        lb[v] = _node_bound(cnt[v], free[v], Q)
        total += lb[v]
        for t in range(ptr[v], ptr[v + 1]):
            j = idx[t]
            total -= lb[j]
            lb[j] = _node_bound(cnt[j], free[j], Q)
            total += lb[j]
        if total >= best:
            continue
        if k == N - 1:
            best = total
            witness[:] = colours
            if best == root:
                break
            continue
        used[k + 1] = max(used[k], q + 1)
        k += 1
        tries[k] = -1
    return best, witness, exact, visits


def degeneracy_order(graph: GraphInstance) -> np.ndarray:
    """Reverse min-degree elimination order."""
    adj = [set(a.tolist()) for a in graph.adjacency]
    alive = set(range(graph.N))
    out = []
    while alive:
        v = min(alive, key=lambda x: (len(adj[x] & alive), x))
        out.append(v)
        alive.remove(v)
    return np.array(out[::-1], dtype=np.int64)


@dataclass
class GroundState:
    min_energy: int
    count: int | None
    witness: ColourAssignment
    exact: bool

    @property
    def f_incom(self) -> float:
        return self.witness.f_incom


def brute_force_ground_state(graph: GraphInstance, Q: int = 4, budget: int = 10**8,
                             exhaustive_limit: int = 4**12) -> GroundState:
    """Exact optimum.  Exhaustive enumeration (with an exact ground-state
    count) when ``Q**(N-1)`` fits ``exhaustive_limit``, branch-and-bound with the
    per-node cost bound otherwise.  If ``budget`` node visits run out, the best
    assignment found so far is returned with ``exact=False``."""
    ptr, idx = graph.csr()
    N = graph.N
    if N == 0:
        raise ValueError("empty graph")
    if Q ** (N - 1) <= exhaustive_limit:
        best, count, wit = _exhaustive(ptr, idx, Q, N)
        return GroundState(int(best), int(count) * Q, evaluate(graph, wit, Q), True)
    seed_state = anneal_instance(graph, Q, seed=0)
    best, wit, exact, _ = _branch_and_bound(ptr, idx, degeneracy_order(graph), Q, N,
                                            seed_state.energy + 1, budget)
    if wit[0] < 0:
        # the annealed state was already optimal (or the budget ran out first)
        return GroundState(seed_state.energy, None, seed_state, bool(exact))
    return GroundState(int(best), None, evaluate(graph, wit, Q), bool(exact))


@njit(cache=True)
def _anneal(colours, ptr, idx, Q, temps, moves, seed, check_every):
    np.random.seed(seed)
    N = colours.shape[0]
    cnt = _counts(colours, ptr, idx, Q)
    e = 0
    for j in range(N):
        for q in range(Q):
            e += cnt[j, q] * cnt[j, q]
    best = e
    best_c = colours.copy()
    n = 0
    for T in temps:
        for _ in range(moves):
            v = np.random.randint(N)
            new = np.random.randint(Q - 1)
            if new >= colours[v]:
                new += 1
            old = colours[v]
            d = _recolour(cnt, colours, ptr, idx, v, new)
            if d > 0 and np.random.random() >= math.exp(-d / T):
                _recolour(cnt, colours, ptr, idx, v, old)
            else:
                e += d
                if e < best:
                    best = e
                    best_c[:] = colours
            n += 1
            if n % check_every == 0:
                if e != _energy(colours, ptr, idx, Q):
                    return -1, best_c
    return best, best_c


def geometric_schedule(t_start: float = 2.0, t_end: float = 0.01, factor: float = 0.98
                       ) -> np.ndarray:
    n = int(math.floor(math.log(t_end / t_start) / math.log(factor))) + 1
    return t_start * factor ** np.arange(n)


def anneal_instance(graph: GraphInstance, Q: int = 4, schedule=None, seed=None,
                    moves_per_node: int = 10) -> ColourAssignment:
    """Single-flip Metropolis with geometric cooling; best state seen.

    The running energy is checked against a full recomputation every 1000
    moves."""
    rng = np.random.default_rng(seed)
    temps = geometric_schedule() if schedule is None else np.asarray(schedule, dtype=float)
    ptr, idx = graph.csr()
    colours = rng.integers(Q, size=graph.N).astype(np.int64)
    best, best_c = _anneal(colours, ptr, idx, Q, temps, moves_per_node * graph.N,
                           int(rng.integers(2**31)), 1000)
    if best < 0:
        raise AssertionError("incremental energy drifted from recomputation")
    return evaluate(graph, best_c, Q)


# --- instance files ------------------------------------------------------------

def write_instance(path, graph: GraphInstance, Q: int, colours=None) -> None:
    """Header ``N E Q``, one ``u v`` line per edge (1-based), optional colour line."""
    lines = [f"{graph.N} {len(graph.edges)} {Q}"]
    lines += [f"{u + 1} {v + 1}" for u, v in graph.edges]
    if colours is not None:
        lines.append(" ".join(str(int(c) + 1) for c in colours))
    Path(path).write_text("\n".join(lines) + "\n")


def read_instance(path) -> tuple[GraphInstance, int, np.ndarray | None]:
    rows = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    try:
        N, E, Q = (int(x) for x in rows[0])
        edges = np.array([[int(a) - 1, int(b) - 1] for a, b in rows[1:1 + E]],
                         dtype=np.int64).reshape(-1, 2)
    except (ValueError, IndexError) as exc:
        raise ValueError(f"malformed instance file {path}: {exc}") from None
    if len(edges) != E:
        raise ValueError(f"{path}: header promises {E} edges, found {len(edges)}")
    colours = None
    if len(rows) > 1 + E:
        colours = np.array([int(c) - 1 for c in rows[1 + E]], dtype=np.int64)
        if len(colours) != N:
            raise ValueError(f"{path}: colour line has {len(colours)} entries, expected {N}")
    return GraphInstance(N, edges), Q, colours
