"""Countermeasures against grounding: robust pre-design, redesign, and grounding more nodes."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import control as ct
from . import graph as gr
from . import sim
from . import spectral as sp
from ._parallel import pmap
from .errors import TooLargeError, UnconsensusableError

log = logging.getLogger(__name__)

PREDESIGN_CAP = 200
PREDESIGN_GRID = 200


@dataclass(frozen=True)
class CountermeasurePlan:
    kind: str
    success: bool
    achieved_margin: float
    unstable_product: float
    gain: ct.GainDesign | None = None
    extra_grounded: tuple[int, ...] = ()
    grounded: tuple[int, ...] = ()
    history: tuple[float, ...] = ()
    detail: str = ""

    @property
    def K(self) -> np.ndarray | None:
        return None if self.gain is None else self.gain.K


PLAN_HEADER = ["kind", "extra_nodes", "margin", "unstable_product", "success"]


def plans_csv(plans: Iterable[CountermeasurePlan]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PLAN_HEADER)
    for p in plans:
        extra = " ".join(str(v + 1) for v in p.extra_grounded)
        w.writerow([p.kind, extra, repr(p.achieved_margin), repr(p.unstable_product), int(p.success)])
    return buf.getvalue()


def passive_predesign(g: gr.Graph, dyn: ct.Dynamics, cap: int = PREDESIGN_CAP, grid: int = PREDESIGN_GRID) -> CountermeasurePlan:
    """One gain that keeps the network and every single-node grounding of it stable.

    The MARI gain is ``B'PA/(c B'PB)``; with ``P`` fixed, only the centre ``c``
    is free. It is swept over ``[min_i lambda_bar_1^(i), lambda_N]`` and the
    value with the smallest worst-case spectral radius is kept.
    """
    if g.n > cap:
        raise TooLargeError(f"pre-design enumerates all {g.n} groundings; cap is {cap}")
    full = sp.laplacian_spectrum(g)
    grounded = [sp.grounded_spectrum(g, [v]) for v in range(g.n)]
    prod = dyn.unstable_product
    margins = [ct.consensusability_margin(s) for s in grounded]
    worst_node = int(np.argmin(margins))
    if not dyn.is_schur and prod >= margins[worst_node] * (1 - ct.CONSENSUS_SLACK):
        return CountermeasurePlan(
            "passive-predesign",
            False,
            margins[worst_node],
            prod,
            detail=f"grounding node {worst_node + 1} leaves margin {margins[worst_node]:.6g} <= {prod:.6g}",
        )
    mus = np.concatenate([full.active] + [s.active for s in grounded])
    lo = min(s.lambda2 for s in grounded)
    hi = full.lambdaN
    r_eff = lo / hi
    prod_ok = dyn.is_schur or prod < ct.consensusability_margin(r_eff)
    zeta = ct.choose_zeta(dyn, r_eff) if prod_ok else ct.choose_zeta(dyn)
    P = ct.solve_mari(dyn, zeta)
    best = (np.inf, None, None)
    for c in np.linspace(lo, hi, grid):
        K = ct.gain_for_center(dyn, P, c)
        radii = ct.closed_loop_radii(dyn.A, dyn.B, K, mus)
        worst = float(radii.max())
        if worst < best[0]:
            best = (worst, c, K)
    worst, c, K = best
    design = ct.GainDesign(P, K, lo, hi, ct.mari_residual(dyn.A, dyn.B, P, zeta), zeta, dyn.A, dyn.B, center=float(c))
    ok = worst < 1 - ct.SCHUR_SLACK
    detail = f"worst closed-loop radius {worst:.12g} at centre {c:.6g}"
    return CountermeasurePlan(
        "passive-predesign", ok, ct.consensusability_margin(r_eff), prod, gain=design, detail=detail
    )


def active_redesign(g: gr.Graph, s: Iterable[int], dyn: ct.Dynamics, kind: str = "active-redesign", extra=()) -> CountermeasurePlan:
    """Redesign the gain for the grounded spectrum; raises when the grounded
    network is not consensusable."""
    s = tuple(sorted(set(s)))
    spec = sp.grounded_spectrum(g, s)
    verdict = ct.is_consensusable(dyn, spec)
    if not verdict:
        raise UnconsensusableError(
            f"grounded margin {verdict.margin:.6g} does not exceed unstable product {verdict.unstable_product:.6g}"
        )
    design = ct.design_gain(dyn, spec)
    ok = bool(design.radii(spec.active).max() < 1 - ct.SCHUR_SLACK)
    return CountermeasurePlan(kind, ok, verdict.margin, verdict.unstable_product, design, tuple(extra), s)


def ground_more(
    g: gr.Graph,
    s0: Iterable[int],
    dyn: ct.Dynamics,
    budget: int,
    stop_early: bool = True,
) -> CountermeasurePlan:
    """Greedily ground extra nodes, each round taking the node that maximizes
    the grounded eigenratio (smallest index on ties), then redesign the gain.

    With ``stop_early`` the search ends as soon as the margin exceeds the
    unstable product; otherwise exactly ``budget`` nodes are added.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    current = set(s0)
    prod = dyn.unstable_product
    spec = sp.grounded_spectrum(g, current)
    history = [ct.consensusability_margin(spec)]
    extra: list[int] = []
    if not (stop_early and ct.is_consensusable(dyn, spec)):
        for _ in range(budget):
            cands = [v for v in range(g.n) if v not in current]
            if len(cands) <= 1:
                break
            ratios = pmap(lambda v: sp.grounded_spectrum(g, current | {v}).eigenratio, cands)
            pick = cands[int(np.argmax(ratios))]
            current.add(pick)
            extra.append(pick)
            margin = ct.consensusability_margin(max(ratios))
            if margin < history[-1] * (1 - 1e-12):
                raise AssertionError("grounded margin decreased after grounding another node")
            history.append(margin)
            if stop_early and (dyn.is_schur or prod < margin * (1 - ct.CONSENSUS_SLACK)):
                break
    try:
        plan = active_redesign(g, current, dyn, kind="ground-more", extra=extra)
    except UnconsensusableError:
        return CountermeasurePlan(
            "ground-more",
            False,
            history[-1],
            prod,
            extra_grounded=tuple(extra),
            grounded=tuple(sorted(current)),
            history=tuple(history),
            detail="budget exhausted",
        )
    return CountermeasurePlan(**{**plan.__dict__, "history": tuple(history)})


@dataclass
class RateComparison:
    rows: list = field(default_factory=list)
    consistent: bool = True


def convergence_rate_compare(
    plans: Sequence[CountermeasurePlan],
    g: gr.Graph,
    initial: sim.NetworkState,
    horizon: int = 3000,
    value=None,
) -> RateComparison:
    """Simulate each plan from ``initial`` with all its grounded nodes fixed at
    ``value`` (default: origin) and compare settling against ``lambda_bar_1``.

    A larger grounded eigenvalue is expected to settle no slower; departures
    are logged, not raised.
    """
    n = initial.x.shape[1]
    value = np.zeros(n) if value is None else np.asarray(value, dtype=float)
    out = RateComparison()
    for p in plans:
        if not p.success:
            raise ValueError(f"plan {p.kind} did not succeed")
        system = sim.ClosedLoop.from_graph(g, p.gain.A, p.gain.B, p.gain.K)
        ev = sim.GroundingEvent(0, p.grounded, "fix", value=value)
        trace = sim.run(initial, system, [ev], horizon)
        spec = sp.grounded_spectrum(g, p.grounded)
        radius = float(p.gain.radii(spec.active).max())
        out.rows.append(
            {
                "kind": p.kind,
                "grounded": p.grounded,
                "lambda_bar_1": spec.lambda2,
                "radius": radius,
                "settling": converge_steps(trace),
                "verdict": trace.verdict,
            }
        )
    ordered = sorted(out.rows, key=lambda r: r["lambda_bar_1"])
    for a, b in zip(ordered, ordered[1:]):
        sa, sb = a["settling"], b["settling"]
        if sa is None or sb is None or sb > sa:
            out.consistent = False
            log.warning(
                "larger grounded eigenvalue %.4g settled in %s steps vs %s for %.4g",
                b["lambda_bar_1"], sb, sa, a["lambda_bar_1"],
            )
    return out


def converge_steps(trace: sim.SimulationTrace, after: int = 0, tol: float = sim.CONVERGE_TOL) -> int | None:
    """Steps past ``after`` until disagreement stays below ``tol``; None if never."""
    d = trace.disagreement[after:]
    above = np.nonzero(d > tol)[0]
    if above.size == 0:
        return 0
    if above[-1] == d.size - 1:
        return None
    return int(above[-1] + 1)
