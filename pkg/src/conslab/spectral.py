"""Spectra of Laplacians and grounded Laplacians, and the inequality checks built on them."""

from __future__ import annotations

import csv
import io
import statistics
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import graph as gr
from ._parallel import pmap
from .errors import GroundingSetError, InfeasibleError, NotSymmetricError

SYMMETRY_TOL = 1e-10
ZERO_TOL = 1e-8  # relative to the largest eigenvalue
BOUND_TOL = 1e-9


@dataclass(frozen=True)
class SpectralSummary:
    """Ascending spectrum of a (grounded) Laplacian.

    ``lambda2``/``lambdaN`` are the pair that enters the eigenratio and the gain
    formula: the second-smallest and largest eigenvalue of ``L``, or for a
    grounded summary the smallest and largest eigenvalue of the grounded
    Laplacian.
    """

    eigenvalues: np.ndarray
    is_grounded: bool = False
    m: int = 0
    eigenvectors: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def lambda2(self) -> float:
        return float(self.eigenvalues[0] if self.is_grounded else self.eigenvalues[1])

    @property
    def lambdaN(self) -> float:
        return float(self.eigenvalues[-1])

    @property
    def eigenratio(self) -> float:
        if self.lambdaN <= 0:
            return 0.0
        return self.lambda2 / self.lambdaN

    @property
    def active(self) -> np.ndarray:
        """Eigenvalues whose modes carry disagreement (drop the zero mode of ``L``)."""
        return self.eigenvalues if self.is_grounded else self.eigenvalues[1:]

    @property
    def zero_count(self) -> int:
        scale = max(abs(self.lambdaN), 1.0)
        return int(np.sum(np.abs(self.eigenvalues) <= ZERO_TOL * scale))


def spectrum(M, grounded: bool = False, m: int = 0, vectors: bool = False) -> SpectralSummary:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise NotSymmetricError(f"expected a square matrix, got shape {M.shape}")
    scale = max(np.abs(M).max(initial=0.0), 1.0)
    if np.abs(M - M.T).max(initial=0.0) > SYMMETRY_TOL * scale:
        raise NotSymmetricError("matrix is not symmetric")
    if vectors:
        w, v = np.linalg.eigh(M)
        return SpectralSummary(w, grounded, m, v)
    return SpectralSummary(np.linalg.eigvalsh(M), grounded, m)


def laplacian_spectrum(g: gr.Graph) -> SpectralSummary:
    return spectrum(gr.laplacian(g))


def grounded_spectrum(g: gr.Graph, s: Iterable[int]) -> SpectralSummary:
    gl = gr.ground(g, s)
    return spectrum(gl.matrix, grounded=True, m=gl.m)


# --- bound reports ------------------------------------------------------------------


@dataclass(frozen=True)
class BoundReport:
    """An inequality ``lhs <= rhs`` evaluated numerically."""

    name: str
    lhs: float
    rhs: float
    satisfied: bool
    slack: float


def bound(name: str, lhs: float, rhs: float, tol: float = BOUND_TOL) -> BoundReport:
    lhs, rhs = float(lhs), float(rhs)
    ok = lhs <= rhs + tol * max(1.0, abs(rhs))
    return BoundReport(name, lhs, rhs, bool(ok), rhs - lhs)


def bounds_csv(reports: Iterable[BoundReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["name", "lhs", "rhs", "satisfied", "slack"])
    for r in reports:
        w.writerow([r.name, repr(r.lhs), repr(r.rhs), int(r.satisfied), repr(r.slack)])
    return buf.getvalue()


def interlacing_check(g: gr.Graph, grounded_node: int) -> list[BoundReport]:
    """``lambda_i <= lambda_bar_i <= lambda_{i+1}`` for every ``i``."""
    full = laplacian_spectrum(g).eigenvalues
    red = grounded_spectrum(g, [grounded_node]).eigenvalues
    out = []
    for i, mu in enumerate(red):
        out.append(bound(f"interlace.lower[{i + 1}]", full[i], mu))
        out.append(bound(f"interlace.upper[{i + 1}]", mu, full[i + 1]))
    return out


def lemma1_check(g: gr.Graph, grounded_node: int, c: float | None = None) -> list[BoundReport]:
    """Interlacing ``lambda_bar_1 <= lambda_2`` plus, for d-regular graphs, the
    size bound ``lambda_bar_1 <= d/(N-1)`` and (given an expansion constant
    ``c <= h``) ``lambda_2 >= d - sqrt(d^2 - c^2)``.

    The regular-only bounds are omitted for irregular graphs.
    """
    full = laplacian_spectrum(g)
    red = grounded_spectrum(g, [grounded_node])
    out = [bound("lemma1.interlacing", red.lambda2, full.lambda2)]
    d = g.regular_degree()
    if d is None:
        return out
    out.append(bound("lemma1.grounded_upper", red.lambda2, d / (g.n - 1)))
    if c is not None:
        if not 0 <= c <= d:
            raise ValueError(f"expansion constant must lie in [0, d], got {c}")
        out.append(bound("lemma1.expander_lower", d - np.sqrt(d * d - c * c), full.lambda2))
    return out


def lemma2_check(g: gr.Graph, grounded_node: int) -> list[BoundReport]:
    full = laplacian_spectrum(g)
    red = grounded_spectrum(g, [grounded_node])
    deg = g.degrees()
    kept = [v for v in range(g.n) if v != grounded_node]
    dmax_f = int(deg[kept].max())
    edge_sum = max(int(deg[i] + deg[j]) for i, j in g.edges)
    out = [
        bound("lemma2.grounded_max_ge_dmax", dmax_f, red.lambdaN),
        bound("lemma2.lambdaN_le_edge_degree_sum", full.lambdaN, edge_sum),
        bound("lemma2.grounded_ratio_le_ratio", red.eigenratio, full.eigenratio),
    ]
    if g.regular_degree() is not None:
        out.append(bound("lemma2.grounded_max_over_lambdaN_ge_half", 0.5, red.lambdaN / full.lambdaN))
    return out


def multi_ground_monotonicity(g: gr.Graph, s_small: Iterable[int], s_large: Iterable[int]) -> list[BoundReport]:
    """Growing the grounding set cannot lower the smallest grounded eigenvalue
    nor raise the largest one."""
    small, large = set(s_small), set(s_large)
    if not small or not small < large:
        raise GroundingSetError("grounding sets must be nonempty and strictly nested")
    a = grounded_spectrum(g, small)
    b = grounded_spectrum(g, large)
    return [
        bound("monotone.lambda_min", a.lambda2, b.lambda2),
        bound("monotone.lambda_max", b.lambdaN, a.lambdaN),
        bound("monotone.eigenratio", a.eigenratio, b.eigenratio),
    ]


# --- scaling studies ----------------------------------------------------------------


@dataclass(frozen=True)
class Family:
    """Graph family for scaling sweeps: ``kind`` is ``"regular"`` or ``"complete"``."""

    kind: str = "regular"
    d: int = 4

    def sample(self, n: int, seed: int) -> gr.Graph:
        if self.kind == "regular":
            return gr.random_regular(n, self.d, seed=np.random.default_rng([seed, n, self.d]))
        if self.kind == "complete":
            return gr.complete_graph(n)
        raise ValueError(f"unknown family {self.kind!r}")

    def check(self, n: int) -> None:
        if self.kind == "regular":
            if self.d >= n or (n * self.d) % 2:
                raise InfeasibleError(f"no {self.d}-regular graph on {n} nodes")


@dataclass(frozen=True)
class ScalingRow:
    N: int
    seed: int
    lambda2: float
    lambdaN: float
    eigenratio: float
    grounded: bool


SCALING_HEADER = ["N", "seed", "lambda2", "lambdaN", "eigenratio", "grounded"]


def eigenratio_scaling(
    family: Family,
    sizes: Sequence[int],
    grounded: bool,
    seeds: Sequence[int] | int = 10,
    ground_node: int = 0,
) -> list[ScalingRow]:
    """One row per ``(N, seed)``; grounded rows ground ``ground_node``.

    The same ``(N, seed)`` cell always yields the same graph, so grounded and
    nongrounded sweeps are paired sample by sample.
    """
    if isinstance(seeds, int):
        seeds = list(range(seeds))
    for n in sizes:
        family.check(n)

    def cell(args):
        n, seed = args
        g = family.sample(n, seed)
        s = grounded_spectrum(g, [ground_node]) if grounded else laplacian_spectrum(g)
        return ScalingRow(n, seed, s.lambda2, s.lambdaN, s.eigenratio, grounded)

    return pmap(cell, [(n, s) for n in sizes for s in seeds])


def median_by_size(rows: Iterable[ScalingRow], key: str = "eigenratio") -> dict[int, float]:
    by_n: dict[int, list[float]] = {}
    for r in rows:
        by_n.setdefault(r.N, []).append(getattr(r, key))
    return {n: statistics.median(v) for n, v in sorted(by_n.items())}


def scaling_csv(rows: Iterable[ScalingRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SCALING_HEADER)
    for r in rows:
        w.writerow([r.N, r.seed, repr(r.lambda2), repr(r.lambdaN), repr(r.eigenratio), int(r.grounded)])
    return buf.getvalue()
