"""Acceptance suite: twelve end-to-end criteria, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py`` (the lines appear in the terminal
summary) or ``python tests/test_acceptance.py``.
"""

import itertools
import statistics
import sys
import time
from pathlib import Path

import networkx as nx
import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from conslab import cli
from conslab import control as ct
from conslab import countermeasure as cm
from conslab import graph as gr
from conslab import scenarios as sc
from conslab import sim
from conslab import spectral as sp
from conslab.errors import NoConvergenceError

from conftest import from_nx

RESULTS: dict[int, str] = {}


def record(num: int, title: str, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'}  criterion {num:2d}  {title}: {detail}"
    RESULTS[num] = line
    print(line)
    assert ok, line


def read_csv(path: Path) -> list[dict]:
    lines = path.read_text().splitlines()
    header = lines[0].split(",")
    return [dict(zip(header, row.split(","))) for row in lines[1:]]


def run_cli(tmp: Path, command: str, text: str, out: str) -> Path:
    cfg = tmp / f"{out}.cfg"
    cfg.write_text(text)
    code = cli.main([command, "--config", str(cfg), "--out", str(tmp / out)])
    assert code == 0, f"{command} exited {code}"
    return tmp / out


# --- 1 ------------------------------------------------------------------------------


def test_counterexample_exact():
    t0 = time.perf_counter()
    g = gr.counterexample_graph()
    full = sp.laplacian_spectrum(g).eigenvalues
    red = sp.grounded_spectrum(g, [0]).eigenvalues
    dt = time.perf_counter() - t0
    err = max(np.abs(full - [0, 1, 3, 4]).max(), np.abs(red - [1, 1, 3]).max())
    record(1, "counterexample spectra", err <= 1e-10 and dt < 1.0, f"max error {err:.2e}, {dt * 1e3:.1f} ms")


# --- 2 ------------------------------------------------------------------------------


def interlacing_catalog():
    for h in nx.graph_atlas_g():
        if h.number_of_nodes() >= 2:
            yield from_nx(h)
    rng = np.random.default_rng(2)
    for _ in range(200):
        n = int(rng.integers(2, 11))
        p = rng.uniform(0.1, 0.9)
        edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
        yield gr.from_edges(n, edges)


def test_interlacing_suite():
    graphs = checks = bad = 0
    for g in interlacing_catalog():
        graphs += 1
        for v in range(g.n):
            reps = sp.interlacing_check(g, v)
            checks += len(reps)
            bad += sum(not r.satisfied for r in reps)
    record(2, "interlacing", bad == 0 and graphs >= 1200, f"{graphs} graphs, {checks} inequalities, {bad} violations")


# --- 3 ------------------------------------------------------------------------------


def cheeger_samples():
    rng = np.random.default_rng(3)
    for n in range(8, 17):
        for d in (3, 4, 5, 6):
            if (n * d) % 2 == 0 and d < n:
                for _ in range(6):
                    yield gr.random_regular(n, d, seed=rng)
    while True:
        n = int(rng.integers(4, 17))
        yield gr.random_connected_gnp(n, rng.uniform(0.2, 0.7), seed=rng)


def test_cheeger_inequalities():
    count = bad = 0
    for g in itertools.islice(cheeger_samples(), 320):
        h = gr.cheeger(g).exact
        s = sp.laplacian_spectrum(g)
        d = g.max_degree
        tol = 1e-9
        ok = h * h / (2 * d) <= s.lambda2 + tol and s.lambda2 <= 2 * h + tol and s.eigenratio >= h * h / (4 * d * d) - tol
        bad += not ok
        count += 1
    record(3, "Cheeger inequalities", bad == 0 and count >= 300, f"{count} exact samples (n<=16), {bad} violations")


# --- 4 ------------------------------------------------------------------------------


def test_scaling_fragility(tmp_path):
    t0 = time.perf_counter()
    out = run_cli(tmp_path, "scaling", "experiment = scaling\nd = 4\nsizes = 20,500\nseeds = 10\n", "scaling")
    rows = read_csv(out / "scaling.csv")
    dt = time.perf_counter() - t0

    def med(n, grounded):
        return statistics.median(float(r["eigenratio"]) for r in rows if int(r["N"]) == n and r["grounded"] == str(grounded))

    g_ratio = med(500, 1) / med(20, 1)
    n_ratio = med(500, 0) / med(20, 0)
    bound_ok = all(float(r["lambda2"]) <= 4 / (int(r["N"]) - 1) + 1e-12 for r in rows if r["grounded"] == "1")
    ok = g_ratio < 0.25 and n_ratio >= 0.5 and bound_ok and dt < 300
    record(
        4,
        "scaling fragility",
        ok,
        f"grounded median 500/20 = {g_ratio:.3f}, nongrounded = {n_ratio:.3f}, lambda_bar_1 <= d/(N-1): {bound_ok}, {dt:.1f} s",
    )


# --- 5 ------------------------------------------------------------------------------


def lemma2_graphs():
    rng = np.random.default_rng(5)
    for n, d in [(10, 3), (16, 4), (20, 6), (40, 4), (60, 6), (100, 4), (101, 6)]:
        for _ in range(5):
            yield gr.random_regular(n, d, seed=rng)
    for _ in range(40):
        yield gr.random_connected_gnp(int(rng.integers(5, 30)), rng.uniform(0.15, 0.6), seed=rng)


def test_lemma2_bounds():
    count = bad = half_checks = 0
    for g in lemma2_graphs():
        for v in range(0, g.n, max(1, g.n // 5)):
            reps = {r.name: r for r in sp.lemma2_check(g, v)}
            count += 1
            bad += not reps["lemma2.grounded_max_ge_dmax"].satisfied
            bad += not reps["lemma2.lambdaN_le_edge_degree_sum"].satisfied
            if g.regular_degree() is not None and g.n >= 40:
                half_checks += 1
                bad += not reps["lemma2.grounded_max_over_lambdaN_ge_half"].satisfied
    record(5, "lemma 2 degree bounds", bad == 0, f"{count} groundings, {half_checks} half-ratio checks, {bad} violations")


# --- 6 ------------------------------------------------------------------------------


def scalar_boundary(a: float) -> float:
    def feasible(z):
        try:
            ct.iterate_mari(np.array([[a]]), np.array([[1.0]]), z)
            return True
        except NoConvergenceError:
            return False

    lo, hi = 0.5 / abs(a), 1.5 / abs(a)
    while hi - lo > 1.5e-3 / abs(a):
        mid = (lo + hi) / 2
        lo, hi = (mid, hi) if feasible(mid) else (lo, mid)
    return (lo + hi) / 2


def test_mari_gain_correctness():
    rng = np.random.default_rng(6)
    done = bad = 0
    while done < 50:
        n = int(rng.integers(1, 5))
        A = rng.normal(size=(n, n))
        A *= rng.uniform(0.5, 1.4) / ct.spectral_radius(A)
        B = rng.normal(size=(n, 1))
        try:
            dyn = ct.Dynamics(A, B)
        except ValueError:
            continue
        spec = sp.laplacian_spectrum(gr.random_regular(12, 4, seed=rng))
        if not ct.is_consensusable(dyn, spec):
            continue
        zeta = ct.choose_zeta(dyn, spec.eigenratio)
        P = ct.solve_mari(dyn, zeta)
        K = ct.design_gain(dyn, spec).K
        ok = np.linalg.eigvalsh(P)[0] > 0 and ct.mari_residual(A, B, P, zeta) > 0
        ok = ok and ct.closed_loop_radii(A, B, K, spec.active).max() < 1
        bad += not ok
        done += 1
    errs = [abs(scalar_boundary(a) - 1 / a) for a in (1.5, 2.0, 4.0)]
    ok = bad == 0 and max(errs) < 1e-3
    record(6, "MARI and gain", ok, f"{done} random systems, {bad} failures; scalar boundary error {max(errs):.1e}")


# --- 7 and 8 ------------------------------------------------------------------------


@pytest.fixture(scope="module")
def loss_and_recovery(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("loss")
    loss = run_cli(tmp, "loss", "experiment = loss\nN = 20\nd = 6\na11 = 1.07\nseeds = 20\n", "loss")
    rec = run_cli(tmp, "recovery", "experiment = recovery\nN = 20\nd = 6\na11 = 1.07\nbudgets = 1,2\nseeds = 20\n", "recovery")
    return read_csv(loss / "loss_margins.csv"), read_csv(rec / "recovery_runs.csv")


def test_loss_of_consensusability(loss_and_recovery):
    rows, _ = loss_and_recovery
    straddle = [r for r in rows if r["straddle"] == "1"]
    for r in straddle:
        assert float(r["delta_bar_A"]) < 1.07 < float(r["delta_A"])
    good = [r for r in straddle if r["pre_verdict"] == "converged" and r["post_verdict"] == "diverged"]
    frac = len(straddle) / len(rows)
    ok = frac >= 0.5 and len(good) == len(straddle)
    record(7, "loss of consensusability", ok, f"straddle in {len(straddle)}/{len(rows)} seeds; converge-then-diverge in {len(good)}/{len(straddle)}")


def test_recovery(loss_and_recovery):
    loss_rows, rec_rows = loss_and_recovery
    lost = [int(r["seed"]) for r in loss_rows if r["straddle"] == "1" and r["post_verdict"] == "diverged"]
    by = {(int(r["seed"]), int(r["budget"])): r for r in rec_rows}
    recovered = nested = 0
    for s in lost:
        g = gr.random_regular(20, 6, seed=s)
        plan = cm.ground_more(g, [0], sc.unstable_dynamics(1.07), budget=5)
        one, two = by[(s, 1)], by[(s, 2)]
        if plan.success and plan.achieved_margin > 1.07 and len(plan.extra_grounded) <= 5 and one["verdict"] == two["verdict"] == "converged":
            recovered += 1
        e1, e2 = set(one["extra_nodes"].split()), set(two["extra_nodes"].split())
        if e1 < e2 and float(two["lambda_bar_1"]) > float(one["lambda_bar_1"]):
            nested += 1
    ok = lost and recovered == len(lost) and nested == len(lost)
    record(8, "recovery by grounding more", bool(ok), f"{recovered}/{len(lost)} lost seeds recovered; 2-node > 1-node lambda_bar_1 in {nested}/{len(lost)}")


# --- 9 ------------------------------------------------------------------------------


def test_monotonicity_lemma():
    rng = np.random.default_rng(9)
    bad = 0
    for i in range(200):
        g = gr.random_regular(int(rng.choice([12, 20, 30])), int(rng.choice([3, 4, 6])), seed=rng) if i % 2 else gr.random_connected_gnp(int(rng.integers(6, 25)), 0.3, seed=rng)
        perm = rng.permutation(g.n)
        m = int(rng.integers(1, g.n - 2))
        q = int(rng.integers(m + 1, g.n))
        reps = sp.multi_ground_monotonicity(g, perm[:m], perm[:q])
        bad += not (reps[0].satisfied and reps[1].satisfied)
    record(9, "grounding-set monotonicity", bad == 0, f"200 nested pairs, {bad} violations")


# --- 10 -----------------------------------------------------------------------------


def test_platoon_ordering(tmp_path):
    out = run_cli(tmp_path, "platoon", "experiment = platoon\nd = 6\nsizes = 20,100\nseeds = 10\nhorizon = 3000\n", "platoon")
    med = {(int(r["N"]), int(r["grounded"])): float(r["median_settling"]) for r in read_csv(out / "platoon_settling.csv")}
    g20, g100, n20, n100 = med[(20, 1)], med[(100, 1)], med[(20, 0)], med[(100, 0)]
    change = abs(n100 - n20) / n20
    ok = g100 > g20 > n20 and change < 0.5
    record(10, "platoon settling order", ok, f"grounded 100: {g100:g}, grounded 20: {g20:g}, nongrounded 20: {n20:g}, nongrounded 100: {n100:g} ({change:.0%} change)")


# --- 11 -----------------------------------------------------------------------------


def place_poles(tau: float, b: float, p1: float, p2: float) -> np.ndarray:
    """K1 putting the eigenvalues of [[1, tau], [0, 1]] - [0, b]' K1 at p1, p2."""
    k2 = (2 - p1 - p2) / b
    k1 = (p1 * p2 - 1 + b * k2) / (tau * b)
    return np.array([[k1, k2]])


def tail_check(system: sim.ClosedLoop, rng) -> float:
    fp = sim.fixed_point(system)
    rho = ct.spectral_radius(system.follower_matrix())
    horizon = int(np.ceil(np.log(1e-12) / np.log(rho))) + 50
    x0 = sim.NetworkState(rng.uniform(-1, 1, size=(system.N, system.n)))
    for v, lim in system.leader_limits().items():
        if system.leaders[v].form == "fix":
            x0.x[v] = lim
    tr = sim.run(x0, system, horizon=horizon, snapshot_every=horizon)
    return float(np.abs(tr.states[-1][1] - fp).max())


def test_fixed_point_consistency():
    rng = np.random.default_rng(11)
    errs, c0_errs = [], []
    for i in range(20):
        tau, b = rng.uniform(0.5, 1.5), rng.uniform(0.5, 2.0)
        A, B = np.array([[1.0, tau], [0.0, 1.0]]), np.array([[0.0], [b]])
        g = gr.random_regular(int(rng.choice([10, 16, 20])), int(rng.choice([3, 4])), seed=rng)
        s = [int(v) for v in rng.choice(g.n, size=int(rng.integers(1, 3)), replace=False)]
        K = ct.design_gain(ct.Dynamics(A, B), sp.grounded_spectrum(g, s)).K
        if i % 2 == 0:
            rules = {v: sim.LeaderRule("fix", value=rng.uniform(-2, 2, size=2)) for v in s}
        else:
            K1 = place_poles(tau, b, rng.uniform(0.1, 0.8), rng.uniform(-0.5, 0.8))
            c1 = rng.uniform(-1, 1)
            rules = {v: sim.LeaderRule("takeover", K1=K1, c1=c1) for v in s}
        system = sim.ClosedLoop.from_graph(g, A, B, K, rules)
        errs.append(tail_check(system, rng))
        if i % 2:
            c0 = sim.takeover_setpoint(A, B, K1, c1)
            c0_errs.append(float(np.abs(sim.fixed_point(system) - c0).max()))
    ok = max(errs) <= 1e-6 and max(c0_errs) <= 1e-8
    record(11, "fixed-point consistency", ok, f"20 systems, max tail error {max(errs):.1e}, max |x* - c0| {max(c0_errs):.1e}")


# --- 12 -----------------------------------------------------------------------------


DETERMINISM_CONFIGS = {
    "scaling": "experiment = scaling\nd = 4\nsizes = 20,60\nseeds = 3\n",
    "platoon": "experiment = platoon\nsizes = 20\nseeds = 2\nhorizon = 400\n",
    "loss": "experiment = loss\nseeds = 2\nhorizon = 1500\n",
    "recovery": "experiment = recovery\nseeds = 2\nbudgets = 1,2\n",
    "bounds": "experiment = bounds\nsizes = 10,12\nseeds = 3\n",
}


def test_determinism(tmp_path):
    compared = diffs = 0
    for cmd, text in DETERMINISM_CONFIGS.items():
        a = run_cli(tmp_path, cmd, text + "seed = 4\n", f"{cmd}_a")
        b = run_cli(tmp_path, cmd, text + "seed = 4\n", f"{cmd}_b")
        for f in sorted(a.glob("*.csv")):
            compared += 1
            diffs += f.read_bytes() != (b / f.name).read_bytes()
    record(12, "determinism", diffs == 0 and compared > 0, f"{compared} CSV files compared, {diffs} differ")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
