"""Closed-loop simulation of consensus networks, with grounding attacks and disturbances.

States are held as an ``(N, n)`` array, one row per agent. Non-grounded
agents follow ``x_i <- A x_i - B K (L x)_i``; grounded agents ignore their
neighbours and follow one of three rules:

* ``"fix"``      -- state frozen at ``value`` (its current state if not given),
* ``"cut"``      -- input cut, ``x <- A_bar x``,
* ``"takeover"`` -- ``x <- (A - B K1) x + B c1``, settling at
  ``c0 = (I - (A - B K1))^{-1} B c1``.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import control as ct
from . import graph as gr
from . import spectral as sp
from .errors import NotSchurError

CONVERGE_TOL = 1e-6
CONVERGE_WINDOW = 20
DIVERGE_TOL = 1e9


@dataclass
class NetworkState:
    x: np.ndarray
    k: int = 0

    def __post_init__(self):
        self.x = np.atleast_2d(np.asarray(self.x, dtype=float))

    @property
    def stacked(self) -> np.ndarray:
        return self.x.reshape(-1)


@dataclass(frozen=True)
class LeaderRule:
    form: str
    value: np.ndarray | None = None
    A_bar: np.ndarray | None = None
    K1: np.ndarray | None = None
    c1: np.ndarray | float | None = None

    def __post_init__(self):
        if self.form not in ("fix", "cut", "takeover"):
            raise ValueError(f"unknown grounding form {self.form!r}")
        if self.form == "takeover" and (self.K1 is None or self.c1 is None):
            raise ValueError("takeover grounding needs K1 and c1")


@dataclass(frozen=True)
class GroundingEvent:
    at_step: int
    nodes: tuple[int, ...]
    form: str = "fix"
    value: np.ndarray | None = None
    A_bar: np.ndarray | None = None
    K1: np.ndarray | None = None
    c1: np.ndarray | float | None = None
    copy_from: int | None = None

    def rule(self) -> LeaderRule:
        return LeaderRule(self.form, self.value, self.A_bar, self.K1, self.c1)


@dataclass(frozen=True)
class Disturbance:
    """Adds ``offset`` to ``node``'s state after every step ``k`` with ``start <= k < stop``."""

    start: int
    stop: int
    node: int
    offset: np.ndarray


@dataclass(frozen=True)
class GainChange:
    at_step: int
    K: np.ndarray


@dataclass(frozen=True)
class ClosedLoop:
    L: np.ndarray
    A: np.ndarray
    B: np.ndarray
    K: np.ndarray
    leaders: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "A", np.atleast_2d(np.asarray(self.A, dtype=float)))
        object.__setattr__(self, "B", np.asarray(self.B, dtype=float).reshape(-1, 1))
        object.__setattr__(self, "K", np.asarray(self.K, dtype=float).reshape(1, -1))
        n = self.A.shape[0]
        if self.B.shape[0] != n or self.K.shape[1] != n:
            raise ValueError("A, B, K dimensions disagree")
        L = np.asarray(self.L, dtype=float)
        rows, cols = np.nonzero(L - np.diag(np.diag(L)))
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "_links", (rows, cols, -L[rows, cols]))
        for v, rule in self.leaders.items():
            if not 0 <= v < self.N:
                raise ValueError(f"grounded node {v} out of range")
            if rule.form == "takeover":
                ABK = self.A - self.B @ np.asarray(rule.K1, dtype=float).reshape(1, -1)
                if ct.spectral_radius(ABK) >= 1:
                    raise NotSchurError("takeover needs A - B K1 Schur")

    @classmethod
    def from_graph(cls, g: gr.Graph, A, B, K, leaders=None) -> "ClosedLoop":
        return cls(gr.laplacian(g), A, B, K, dict(leaders or {}))

    @property
    def N(self) -> int:
        return self.L.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def followers(self) -> list[int]:
        return [v for v in range(self.N) if v not in self.leaders]

    def with_leaders(self, extra: dict) -> "ClosedLoop":
        return replace(self, leaders={**self.leaders, **extra})

    def with_gain(self, K) -> "ClosedLoop":
        return replace(self, K=K)

    def follower_matrix(self) -> np.ndarray:
        """``I (x) A - L_bar (x) BK`` over the followers (``L`` itself when nobody is grounded)."""
        f = self.followers
        Lbar = self.L[np.ix_(f, f)]
        return np.kron(np.eye(len(f)), self.A) - np.kron(Lbar, self.B @ self.K)

    def coupling_matrix(self) -> np.ndarray:
        """``C (x) BK`` where ``C`` is the follower-to-leader adjacency."""
        f, s = self.followers, sorted(self.leaders)
        C = -self.L[np.ix_(f, s)]
        return np.kron(C, self.B @ self.K)

    def leader_limits(self) -> dict:
        out = {}
        for v, rule in self.leaders.items():
            if rule.form == "fix":
                if rule.value is None:
                    raise ValueError(f"fixed value of node {v} not resolved yet")
                out[v] = np.asarray(rule.value, dtype=float).reshape(-1)
            elif rule.form == "takeover":
                out[v] = takeover_setpoint(self.A, self.B, rule.K1, rule.c1)
            else:
                A_bar = self.A if rule.A_bar is None else np.asarray(rule.A_bar, dtype=float)
                if ct.spectral_radius(A_bar) >= 1:
                    raise NotSchurError(f"cut-input node {v} has no limit (A_bar not Schur)")
                out[v] = np.zeros(self.n)
        return out


def takeover_setpoint(A, B, K1, c1) -> np.ndarray:
    """``c0 = (I - (A - B K1))^{-1} B c1``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float).reshape(-1, 1)
    K1 = np.asarray(K1, dtype=float).reshape(1, -1)
    c1 = np.asarray(c1, dtype=float).reshape(-1, 1)
    return np.linalg.solve(np.eye(A.shape[0]) - (A - B @ K1), B @ c1).reshape(-1)


def laplacian_apply(system: ClosedLoop, X: np.ndarray) -> np.ndarray:
    """``L X`` summed as ``sum_j w_ij (x_i - x_j)`` so equal blocks give exact zeros."""
    rows, cols, w = system._links
    D = (X[rows] - X[cols]) * w[:, None]
    return np.stack([np.bincount(rows, weights=D[:, c], minlength=X.shape[0]) for c in range(X.shape[1])], axis=1)


def step(state: NetworkState, system: ClosedLoop) -> NetworkState:
    X = state.x
    if X.shape != (system.N, system.n):
        raise ValueError(f"state shape {X.shape} does not match system ({system.N}, {system.n})")
    U = -laplacian_apply(system, X) @ system.K.T
    nxt = X @ system.A.T + U @ system.B.T
    for v, rule in system.leaders.items():
        if rule.form == "fix":
            nxt[v] = X[v] if rule.value is None else rule.value
        elif rule.form == "cut":
            A_bar = system.A if rule.A_bar is None else rule.A_bar
            nxt[v] = A_bar @ X[v]
        else:
            K1 = np.asarray(rule.K1, dtype=float).reshape(1, -1)
            c1 = np.asarray(rule.c1, dtype=float).reshape(-1)
            nxt[v] = (system.A - system.B @ K1) @ X[v] + (system.B @ c1.reshape(-1, 1)).reshape(-1)
    return NetworkState(nxt, state.k + 1)


def fixed_point(system: ClosedLoop) -> np.ndarray:
    """Limit state of a grounded network whose follower dynamics are Schur.

    Followers settle at ``(I - M)^{-1} (C (x) BK) x_leaders`` with ``M`` the
    follower matrix and ``x_leaders`` the leaders' limits.
    """
    if not system.leaders:
        raise ValueError("fixed_point needs at least one grounded node")
    M = system.follower_matrix()
    if ct.spectral_radius(M) >= 1:
        raise NotSchurError("grounded closed loop is not Schur; no fixed point is approached")
    limits = system.leader_limits()
    s = sorted(system.leaders)
    rhs = system.coupling_matrix() @ np.concatenate([limits[v] for v in s])
    xf = np.linalg.solve(np.eye(M.shape[0]) - M, rhs)
    out = np.empty((system.N, system.n))
    out[system.followers] = xf.reshape(-1, system.n)
    for v in s:
        out[v] = limits[v]
    return out


def disagreement(X: np.ndarray, leaders: Sequence[int] = ()) -> float:
    """``max_ij |x_i - x_j|_inf``, or with leaders the largest follower distance
    to the leaders' mean state."""
    if leaders:
        ref = X[list(leaders)].mean(axis=0)
        f = [v for v in range(X.shape[0]) if v not in set(leaders)]
        if not f:
            return 0.0
        return float(np.abs(X[f] - ref).max())
    return float((X.max(axis=0) - X.min(axis=0)).max())


@dataclass
class SimulationTrace:
    disagreement: np.ndarray
    states: list
    events: list
    verdict: str
    phases: list
    meta: dict = field(default_factory=dict)

    @property
    def final_k(self) -> int:
        return len(self.disagreement) - 1

    def phase_at(self, k: int) -> tuple:
        for ph in self.phases:
            if ph[0] <= k <= ph[1]:
                return ph
        return self.phases[-1]

    def csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "disagreement", "verdict_flag"])
        for k, d in enumerate(self.disagreement):
            w.writerow([k, repr(float(d)), self.phase_at(k)[2]])
        return buf.getvalue()

    def states_csv(self) -> str:
        if not self.states:
            return ""
        N, n = self.states[0][1].shape
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k"] + [f"x{i + 1}_{c + 1}" for i in range(N) for c in range(n)])
        for k, X in self.states:
            w.writerow([k] + [repr(float(v)) for v in X.reshape(-1)])
        return buf.getvalue()

    def event_log(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "event", "detail"])
        for row in self.events:
            w.writerow(row)
        return buf.getvalue()


def classify(values: np.ndarray, tol: float = CONVERGE_TOL, window: int = CONVERGE_WINDOW, div: float = DIVERGE_TOL) -> str:
    if values.size and (not np.all(np.isfinite(values)) or values.max() > div):
        return "diverged"
    if values.size >= window and np.all(values[-window:] <= tol):
        return "converged"
    return "inconclusive"


def run(
    initial: NetworkState,
    system: ClosedLoop,
    events: Sequence = (),
    horizon: int = 100,
    snapshot_every: int = 1,
    stop_on_divergence: bool = True,
    tol: float = CONVERGE_TOL,
    window: int = CONVERGE_WINDOW,
) -> SimulationTrace:
    """Simulate ``horizon`` steps, applying grounding/gain events before the
    step they are scheduled at."""
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    switches: dict[int, list] = {}
    disturbances = []
    for ev in events:
        at = ev.start if isinstance(ev, Disturbance) else ev.at_step
        if at > horizon:
            warnings.warn(f"event at step {at} lies beyond horizon {horizon}; ignored", stacklevel=2)
            continue
        if isinstance(ev, Disturbance):
            disturbances.append(ev)
        else:
            switches.setdefault(at, []).append(ev)

    boundaries = sorted(set(switches) | {min(d.stop, horizon) for d in disturbances} - {0})
    state = NetworkState(initial.x.copy(), initial.k)
    log = []
    dis = np.empty(horizon + 1)
    snaps = []
    last = horizon
    for k in range(horizon + 1):
        for ev in switches.get(k, []):
            system = _apply(system, ev, state, log, k)
        dis[k] = disagreement(state.x, sorted(system.leaders))
        if k % snapshot_every == 0:
            snaps.append((k, state.x.copy()))
        if stop_on_divergence and (not np.isfinite(dis[k]) or dis[k] > DIVERGE_TOL):
            last = k
            log.append((k, "stop", "disagreement above divergence threshold"))
            break
        if k == horizon:
            break
        state = step(state, system)
        for d in disturbances:
            if d.start <= k < d.stop:
                state.x[d.node] += np.asarray(d.offset, dtype=float)
                if k == d.start:
                    log.append((k, "disturbance", f"node {d.node + 1} offset {np.asarray(d.offset).tolist()}"))
    dis = dis[: last + 1]
    phases = []
    edges = [0] + [b for b in boundaries if b <= last] + [last + 1]
    for a, b in zip(edges[:-1], edges[1:]):
        if b > a:
            phases.append((a, b - 1, classify(dis[a:b], tol, window)))
    return SimulationTrace(dis, snaps, log, phases[-1][2], phases)


def _apply(system: ClosedLoop, ev, state: NetworkState, log: list, k: int) -> ClosedLoop:
    if isinstance(ev, GainChange):
        log.append((k, "gain", f"K={np.asarray(ev.K).reshape(-1).tolist()}"))
        return system.with_gain(ev.K)
    rules = {}
    for v in ev.nodes:
        rule = ev.rule()
        if rule.form == "fix" and rule.value is None:
            src = v if ev.copy_from is None else ev.copy_from
            rule = replace(rule, value=state.x[src].copy())
        rules[v] = rule
    log.append((k, "ground", f"{ev.form} nodes {' '.join(str(v + 1) for v in ev.nodes)}"))
    return system.with_leaders(rules)


def settling_steps(trace: SimulationTrace, after: int = 0, frac: float = 0.01) -> int | None:
    """Steps past ``after`` until disagreement stays within ``frac`` of its peak.

    None when the band is not reached by the end of the trace.
    """
    d = trace.disagreement[after:]
    if d.size == 0:
        return None
    peak = d.max()
    if peak == 0:
        return 0
    above = np.nonzero(d > frac * peak)[0]
    if above.size == 0:
        return 0
    if above[-1] == d.size - 1:
        return None
    return int(above[-1] + 1)


def random_initial(N: int, n: int, seed=None) -> NetworkState:
    rng = np.random.default_rng(seed)
    return NetworkState(rng.uniform(-1, 1, size=(N, n)))


# --- vehicle platoon -----------------------------------------------------------------

PLATOON_A = np.array([[1.0, 1.0], [0.0, 1.0]])
PLATOON_B = np.array([[0.0], [1.0]])
REFERENCE_SPEED = 1.0


def platoon_scenario(
    N: int,
    d: int,
    seed=None,
    grounded: bool = False,
    horizon: int = 3000,
    K=None,
    disturbance: bool = True,
    disturbed_node: int | None = None,
    window: tuple[int, int] = (10, 20),
    settle_frac: float = 1e-3,
) -> SimulationTrace:
    """Double-integrator platoon in deviation coordinates around the reference
    ``position = speed * k + spacing``.

    During ``window`` one vehicle drives at twice the reference speed, i.e.
    gains an extra ``REFERENCE_SPEED`` of position per step. In the grounded
    case node 0 is taken over and held on the reference (``K1 = K``, ``c1 = 0``).
    ``meta["settling"]`` counts steps from the disturbance onset until the
    disagreement stays within ``settle_frac`` of its peak.
    """
    g = gr.random_regular(N, d, seed=seed)
    if K is None:
        dyn = ct.Dynamics(PLATOON_A, PLATOON_B)
        K = ct.design_gain(dyn, sp.laplacian_spectrum(g)).K
    K = np.asarray(K, dtype=float).reshape(1, -1)
    system = ClosedLoop.from_graph(g, PLATOON_A, PLATOON_B, K)
    events: list = []
    if grounded:
        events.append(GroundingEvent(0, (0,), "takeover", K1=K, c1=0.0))
    node = N - 1 if disturbed_node is None else disturbed_node
    if disturbance:
        events.append(Disturbance(window[0], window[1], node, np.array([REFERENCE_SPEED, 0.0])))
    trace = run(NetworkState(np.zeros((N, 2))), system, events, horizon, snapshot_every=max(1, horizon // 200))
    trace.meta.update(
        N=N,
        d=d,
        seed=seed,
        grounded=grounded,
        K=K.reshape(-1).tolist(),
        settling=settling_steps(trace, after=window[0], frac=settle_frac) if disturbance else 0,
    )
    return trace
