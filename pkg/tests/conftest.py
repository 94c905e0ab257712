import itertools

import networkx as nx
import numpy as np
import pytest
from hypothesis import strategies as st

from conslab import graph as gr


def to_nx(g: gr.Graph) -> nx.Graph:
    h = nx.Graph()
    h.add_nodes_from(range(g.n))
    h.add_edges_from(g.edges)
    return h


def from_nx(h: nx.Graph) -> gr.Graph:
    h = nx.convert_node_labels_to_integers(h)
    return gr.Graph(h.number_of_nodes(), frozenset(tuple(e) for e in h.edges()))


def brute_cheeger(g: gr.Graph) -> float:
    """min over |X| <= n/2 of boundary/|X|, by plain subset enumeration."""
    best = np.inf
    for k in range(1, g.n // 2 + 1):
        for X in itertools.combinations(range(g.n), k):
            xs = set(X)
            cut = sum((i in xs) != (j in xs) for i, j in g.edges)
            best = min(best, cut / k)
    return best


def power_sums(M) -> list[int]:
    """trace(M^k) for k = 1..n in exact integer arithmetic; by Newton's
    identities these pin down the spectrum of an integer matrix."""
    M = np.asarray(M).astype(object)
    out, P = [], M
    for _ in range(M.shape[0]):
        out.append(int(np.trace(P)))
        P = P.dot(M)
    return out


def small_connected_graphs(max_n=7):
    """Every connected graph in the networkx atlas with 2..max_n nodes."""
    for h in nx.graph_atlas_g():
        if 2 <= h.number_of_nodes() <= max_n and nx.is_connected(h):
            yield from_nx(h)


@st.composite
def connected_graphs(draw, min_n=2, max_n=10):
    n = draw(st.integers(min_n, max_n))
    perm = draw(st.permutations(range(n)))
    edges = {tuple(sorted((perm[i], perm[draw(st.integers(0, i - 1))]))) for i in range(1, n)}
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    extra = draw(st.lists(st.sampled_from(pairs), max_size=len(pairs)))
    return gr.Graph(n, frozenset(edges | set(extra)))


@pytest.fixture
def remark_graph():
    return gr.counterexample_graph()


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for num in sorted(results):
            terminalreporter.write_line(results[num])
