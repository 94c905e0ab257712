"""Undirected simple graphs: construction, Laplacians, grounding, Cheeger constant.

Nodes are 0-indexed internally. The edge-list file format is 1-indexed::

    # comment
    N M
    i j
    ...
"""

from __future__ import annotations

from collections import defaultdict, deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import GenerationError, GroundingSetError, InfeasibleError, TooLargeError

CHEEGER_N_MAX = 20


@dataclass(frozen=True)
class Graph:
    """Immutable undirected simple graph on nodes ``0..n-1``."""

    n: int
    edges: frozenset[tuple[int, int]] = field(default_factory=frozenset)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"node count must be positive, got {self.n}")
        raw = list(self.edges)
        norm = set()
        for i, j in raw:
            i, j = int(i), int(j)
            if i == j:
                raise ValueError(f"self-loop at node {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"edge ({i}, {j}) out of range for n={self.n}")
            e = (i, j) if i < j else (j, i)
            if e in norm:
                raise ValueError(f"duplicate edge {e}")
            norm.add(e)
        object.__setattr__(self, "edges", frozenset(norm))

    @property
    def m(self) -> int:
        return len(self.edges)

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def has_edge(self, i: int, j: int) -> bool:
        return ((i, j) if i < j else (j, i)) in self.edges

    def adjacency(self) -> np.ndarray:
        adj = np.zeros((self.n, self.n))
        for i, j in self.edges:
            adj[i, j] = adj[j, i] = 1.0
        return adj

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=int)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def degree(self, i: int) -> int:
        return int(self.degrees()[i])

    def neighbors(self, i: int) -> list[int]:
        return sorted({j for e in self.edges if i in e for j in e if j != i})

    @property
    def max_degree(self) -> int:
        return int(self.degrees().max())

    def regular_degree(self) -> int | None:
        """Common degree if the graph is regular, else None."""
        deg = self.degrees()
        return int(deg[0]) if np.all(deg == deg[0]) else None

    def is_connected(self) -> bool:
        """Breadth-first search from node 0."""
        nbrs = defaultdict(list)
        for i, j in self.edges:
            nbrs[i].append(j)
            nbrs[j].append(i)
        seen = {0}
        queue = deque([0])
        while queue:
            u = queue.popleft()
            for v in nbrs[u]:
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
        return len(seen) == self.n

    def laplacian(self) -> np.ndarray:
        return laplacian(self)

    def relabel(self, perm: Iterable[int]) -> "Graph":
        """Return the graph with node ``i`` renamed to ``perm[i]``."""
        perm = list(perm)
        return Graph(self.n, frozenset((perm[i], perm[j]) for i, j in self.edges))


def laplacian(g: Graph) -> np.ndarray:
    """Combinatorial Laplacian ``D - A`` with unit edge weights."""
    return np.diag(g.degrees().astype(float)) - g.adjacency()


# --- small named graphs -------------------------------------------------------------


def from_edges(n: int, edges: Iterable[tuple[int, int]], one_indexed: bool = False) -> Graph:
    off = 1 if one_indexed else 0
    return Graph(n, frozenset((i - off, j - off) for i, j in edges))


def complete_graph(n: int) -> Graph:
    return Graph(n, frozenset((i, j) for i in range(n) for j in range(i + 1, n)))


def cycle_graph(n: int) -> Graph:
    if n < 3:
        raise ValueError("a simple cycle needs at least 3 nodes")
    return Graph(n, frozenset((i, (i + 1) % n) for i in range(n)))


def path_graph(n: int) -> Graph:
    return Graph(n, frozenset((i, i + 1) for i in range(n - 1)))


def counterexample_graph() -> Graph:
    """Four-node graph whose algebraic connectivity equals its grounded eigenvalue.

    Grounding node 0 leaves ``lambda_2 == 1 == lambda_bar_1``.
    """
    return from_edges(4, [(1, 2), (1, 3), (1, 4), (2, 4)], one_indexed=True)


# --- random generation ---------------------------------------------------------------


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _pair_stubs(n: int, d: int, rng: np.random.Generator) -> set | None:
    # Pairing model: shuffle the n*d stubs, keep the pairs that form new simple
    # edges and re-pair the rejected stubs. Returns None on a dead end.
    edges: set[tuple[int, int]] = set()
    stubs = np.repeat(np.arange(n), d)
    while stubs.size:
        rng.shuffle(stubs)
        leftover: dict[int, int] = defaultdict(int)
        for a, b in zip(stubs[0::2].tolist(), stubs[1::2].tolist()):
            if a > b:
                a, b = b, a
            if a != b and (a, b) not in edges:
                edges.add((a, b))
            else:
                leftover[a] += 1
                leftover[b] += 1
        if leftover and not _can_pair(edges, leftover):
            return None
        stubs = np.array([v for v, c in leftover.items() for _ in range(c)], dtype=int)
    return edges


def _can_pair(edges, leftover) -> bool:
    nodes = list(leftover)
    for x in range(len(nodes)):
        for y in range(x):
            a, b = sorted((nodes[x], nodes[y]))
            if (a, b) not in edges:
                return True
    return False


def random_regular(n: int, d: int, seed=None, max_tries: int = 1000) -> Graph:
    """Connected random ``d``-regular simple graph on ``n`` nodes.

    Uses the stub-pairing model with rejection of loops and repeated edges;
    disconnected samples are discarded and redrawn. Deterministic for a fixed
    ``seed``.
    """
    if n < 1 or d < 0 or d >= n or (n * d) % 2:
        raise InfeasibleError(f"no {d}-regular simple graph on {n} nodes")
    if (n > 1 and d == 0) or (n > 2 and d == 1):
        raise InfeasibleError(f"{d}-regular graphs on {n} nodes are never connected")
    rng = _rng(seed)
    for _ in range(max_tries):
        edges = _pair_stubs(n, d, rng)
        if edges is None:
            continue
        g = Graph(n, frozenset(edges))
        if g.is_connected():
            return g
    raise GenerationError(f"no connected {d}-regular graph on {n} nodes after {max_tries} tries")


def random_connected_gnp(n: int, p: float, seed=None, max_tries: int = 1000) -> Graph:
    """Erdos-Renyi G(n, p) sample conditioned on connectivity (rejection)."""
    rng = _rng(seed)
    iu, ju = np.triu_indices(n, 1)
    for _ in range(max_tries):
        keep = rng.random(iu.size) < p
        g = Graph(n, frozenset(zip(iu[keep].tolist(), ju[keep].tolist())))
        if g.is_connected():
            return g
    raise GenerationError(f"no connected G({n}, {p}) sample after {max_tries} tries")


# --- Cheeger constant ---------------------------------------------------------------


@dataclass(frozen=True)
class CheegerEstimate:
    lower: float
    upper: float
    method: str
    exact: float | None = None
    subset: frozenset[int] | None = None

    def __post_init__(self):
        if self.lower > self.upper + 1e-12:
            raise ValueError("lower bound exceeds upper bound")


def _enumerate_cheeger(g: Graph) -> tuple[float, frozenset[int]]:
    # Every cut is seen once by fixing node 0 inside X; the ratio uses the
    # smaller side, which has the same boundary.
    n = g.n
    masks = np.arange(2 ** (n - 1) - 1, dtype=np.uint32)  # drop X = V
    bits = [np.ones(masks.size, dtype=np.uint8)]
    for v in range(1, n):
        bits.append(((masks >> (v - 1)) & 1).astype(np.uint8))
    size = np.zeros(masks.size, dtype=np.int32)
    for b in bits:
        size += b
    cut = np.zeros(masks.size, dtype=np.int32)
    for i, j in g.edges:
        cut += bits[i] ^ bits[j]
    small = np.minimum(size, n - size)
    ratio = cut / small
    best = int(np.argmin(ratio))
    inside = frozenset(v for v in range(n) if bits[v][best])
    if len(inside) > n / 2:
        inside = frozenset(range(n)) - inside
    return float(ratio[best]), inside


def cheeger(g: Graph, mode: str = "exact", n_max: int = CHEEGER_N_MAX) -> CheegerEstimate:
    """Isoperimetric constant ``min |dX|/|X|`` over ``|X| <= n/2``.

    ``mode="exact"`` enumerates all ``2**(n-1)`` cuts (``n <= n_max``).
    ``mode="bounds"`` inverts the Cheeger inequality
    ``h^2/(2 d_max) <= lambda_2 <= 2h`` into ``[lambda_2/2, sqrt(2 d_max lambda_2)]``.
    """
    if g.n < 2:
        raise ValueError("Cheeger constant needs at least two nodes")
    if mode == "exact":
        if g.n > n_max:
            raise TooLargeError(f"exact enumeration limited to n <= {n_max}, got {g.n}")
        h, subset = _enumerate_cheeger(g)
        return CheegerEstimate(h, h, "enumeration", exact=h, subset=subset)
    if mode == "bounds":
        lam2 = max(float(np.linalg.eigvalsh(laplacian(g))[1]), 0.0)
        return CheegerEstimate(lam2 / 2, float(np.sqrt(2 * g.max_degree * lam2)), "spectral-bound")
    raise ValueError(f"unknown mode {mode!r}")


# --- grounding ----------------------------------------------------------------------


@dataclass(frozen=True)
class GroundedLaplacian:
    """Principal submatrix of ``L`` on the non-grounded nodes.

    ``coupling[r, c]`` is the adjacency between kept node ``kept[r]`` and
    grounded node ``grounded[c]``; ``lam`` is its row sum (the diagonal of the
    leader-coupling matrix).
    """

    matrix: np.ndarray
    kept: tuple[int, ...]
    grounded: tuple[int, ...]
    coupling: np.ndarray

    @property
    def lam(self) -> np.ndarray:
        return self.coupling.sum(axis=1)

    @property
    def Lambda(self) -> np.ndarray:
        return np.diag(self.lam)

    @property
    def m(self) -> int:
        return len(self.grounded)


def ground(g: Graph, s: Iterable[int]) -> GroundedLaplacian:
    s = sorted(set(int(v) for v in s))
    if not s:
        raise GroundingSetError("grounding set is empty")
    if len(s) >= g.n:
        raise GroundingSetError("cannot ground every node")
    if s[0] < 0 or s[-1] >= g.n:
        raise GroundingSetError(f"grounding set {s} out of range for n={g.n}")
    kept = [v for v in range(g.n) if v not in set(s)]
    lap = laplacian(g)
    adj = g.adjacency()
    return GroundedLaplacian(
        matrix=lap[np.ix_(kept, kept)],
        kept=tuple(kept),
        grounded=tuple(s),
        coupling=adj[np.ix_(kept, s)],
    )


# --- file I/O -----------------------------------------------------------------------


def _content_lines(text: str):
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            yield line


def parse_edgelist(text: str) -> Graph:
    lines = list(_content_lines(text))
    if not lines:
        raise ValueError("empty edge list")
    n, m = (int(t) for t in lines[0].split())
    body = lines[1:]
    if len(body) != m:
        raise ValueError(f"header announces {m} edges, found {len(body)}")
    edges = []
    for line in body:
        i, j = (int(t) for t in line.split())
        edges.append((i, j))
    return from_edges(n, edges, one_indexed=True)


def format_edgelist(g: Graph) -> str:
    out = [f"{g.n} {g.m}"]
    out += [f"{i + 1} {j + 1}" for i, j in g.sorted_edges()]
    return "\n".join(out) + "\n"


def read_edgelist(path) -> Graph:
    return parse_edgelist(Path(path).read_text())


def write_edgelist(g: Graph, path) -> None:
    Path(path).write_text(format_edgelist(g))


def parse_grounding_set(text: str) -> list[int]:
    """One line of 1-indexed node ids, returned 0-indexed."""
    lines = list(_content_lines(text))
    if len(lines) != 1:
        raise ValueError("grounding set must be a single line")
    return [int(t) - 1 for t in lines[0].replace(",", " ").split()]


def format_grounding_set(s: Iterable[int]) -> str:
    return " ".join(str(v + 1) for v in sorted(s)) + "\n"
