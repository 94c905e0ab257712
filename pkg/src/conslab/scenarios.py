"""Scripted loss and recovery experiments on random regular networks."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import control as ct
from . import countermeasure as cm
from . import graph as gr
from . import sim
from . import spectral as sp


def unstable_dynamics(a11: float = 1.07) -> ct.Dynamics:
    """Double integrator whose position channel is scaled by ``a11``."""
    return ct.Dynamics(np.array([[a11, 1.0], [0.0, 1.0]]), sim.PLATOON_B)


@dataclass
class LossResult:
    graph: gr.Graph
    design: ct.GainDesign
    margin: float
    grounded_margin: float
    unstable_product: float
    trace: sim.SimulationTrace
    ground_step: int | None

    @property
    def straddles(self) -> bool:
        return self.grounded_margin < self.unstable_product < self.margin

    @property
    def pre_verdict(self) -> str:
        return self.trace.phases[0][2]

    @property
    def post_verdict(self) -> str:
        return self.trace.phases[-1][2]

    def report(self) -> dict:
        return {
            "delta_A": self.margin,
            "delta_bar_A": self.grounded_margin,
            "unstable_product": self.unstable_product,
            "straddle": int(self.straddles),
            "pre_verdict": self.pre_verdict,
            "post_verdict": self.post_verdict,
        }


def loss_scenario(
    N: int = 20,
    d: int = 6,
    seed=0,
    a11: float = 1.07,
    ground_step: int | None = 100,
    horizon: int = 2600,
    ground_node: int = 0,
) -> LossResult:
    """Consensus with a gain tuned to the full network, then ``ground_node`` is
    frozen at the origin at ``ground_step`` (None disables grounding)."""
    g = gr.random_regular(N, d, seed=seed)
    dyn = unstable_dynamics(a11)
    full = sp.laplacian_spectrum(g)
    grounded = sp.grounded_spectrum(g, [ground_node])
    design = ct.design_gain(dyn, full)
    system = sim.ClosedLoop.from_graph(g, dyn.A, dyn.B, design.K)
    events = []
    if ground_step is not None:
        events.append(sim.GroundingEvent(ground_step, (ground_node,), "fix", value=np.zeros(2)))
    x0 = sim.random_initial(N, 2, seed=np.random.default_rng([0 if seed is None else seed, N, 1]))
    trace = sim.run(x0, system, events, horizon, snapshot_every=max(1, horizon // 200))
    return LossResult(
        g,
        design,
        ct.consensusability_margin(full),
        ct.consensusability_margin(grounded),
        dyn.unstable_product,
        trace,
        ground_step,
    )


@dataclass
class RecoveryResult:
    graph: gr.Graph
    plan: cm.CountermeasurePlan | None
    trace: sim.SimulationTrace
    recover_step: int
    settling: int | None
    meta: dict = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return self.trace.verdict == "converged"


def recovery_scenario(
    N: int = 20,
    d: int = 6,
    seed=0,
    a11: float = 1.07,
    budget: int = 1,
    ground_step: int = 50,
    recover_step: int = 150,
    horizon: int = 1500,
    ground_node: int = 0,
    stop_early: bool = False,
) -> RecoveryResult:
    """Ground ``ground_node`` at ``ground_step``; at ``recover_step`` freeze the
    extra nodes chosen by :func:`ground_more` at the same value and switch to
    the redesigned gain. ``budget=0`` skips recovery.

    ``settling`` counts steps after recovery until the disagreement stays at or
    below the convergence tolerance.
    """
    g = gr.random_regular(N, d, seed=seed)
    dyn = unstable_dynamics(a11)
    design = ct.design_gain(dyn, sp.laplacian_spectrum(g))
    system = sim.ClosedLoop.from_graph(g, dyn.A, dyn.B, design.K)
    events: list = [sim.GroundingEvent(ground_step, (ground_node,), "fix", value=np.zeros(2))]
    plan = None
    if budget > 0:
        plan = cm.ground_more(g, [ground_node], dyn, budget, stop_early=stop_early)
        if plan.success:
            events.append(sim.GroundingEvent(recover_step, plan.extra_grounded, "fix", copy_from=ground_node))
            events.append(sim.GainChange(recover_step, plan.K))
    x0 = sim.random_initial(N, 2, seed=np.random.default_rng([0 if seed is None else seed, N, 1]))
    trace = sim.run(x0, system, events, horizon, snapshot_every=max(1, horizon // 200))
    settling = cm.converge_steps(trace, after=recover_step) if trace.final_k > recover_step else None
    meta = {"seed": seed, "budget": budget}
    if plan is not None and plan.success:
        spec = sp.grounded_spectrum(g, plan.grounded)
        meta.update(lambda_bar_1=spec.lambda2, radius=float(plan.gain.radii(spec.active).max()))
    return RecoveryResult(g, plan, trace, recover_step, settling, meta)
