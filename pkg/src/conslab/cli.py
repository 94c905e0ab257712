"""Command-line experiment runner: ``conslab <command> --config PATH [--seed S] [--out DIR]``."""

from __future__ import annotations

import argparse
import csv
import io
import logging
import statistics
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import countermeasure as cm
from . import graph as gr
from . import scenarios as sc
from . import sim
from . import spectral as sp
from . import svg
from ._parallel import pmap
from .errors import ConfigError, ConslabError, NumericalError

log = logging.getLogger("conslab")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _num(v) -> str:
    if v is None:
        return ""
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def _median(values) -> float:
    """Median treating None (never settled) as +inf."""
    vals = [np.inf if v is None else v for v in values]
    return float(statistics.median(vals)) if vals else float("nan")


class Outputs:
    def __init__(self, root: Path):
        self.root = root
        root.mkdir(parents=True, exist_ok=True)
        self.written: list[Path] = []

    def write(self, name: str, text: str) -> None:
        path = self.root / name
        path.write_text(text)
        self.written.append(path)


# --- commands -----------------------------------------------------------------------


def cmd_scaling(c: cfgmod.ExperimentConfig, out: Outputs) -> None:
    fam = sp.Family(c.family, c.d)
    node = c.ground_node - 1
    rows = sp.eigenratio_scaling(fam, c.sizes, False, c.seed_list, node)
    rows += sp.eigenratio_scaling(fam, c.sizes, True, c.seed_list, node)
    out.write("scaling.csv", sp.scaling_csv(rows))
    plain = sp.median_by_size([r for r in rows if not r.grounded])
    grounded = sp.median_by_size([r for r in rows if r.grounded])
    out.write(
        "scaling.svg",
        svg.line_chart(
            [("nongrounded", list(plain), list(plain.values())), ("grounded", list(grounded), list(grounded.values()))],
            title=f"median eigenratio, {c.family} d={c.d}",
            xlabel="N",
            ylabel="eigenratio",
        ),
    )


def cmd_platoon(c: cfgmod.ExperimentConfig, out: Outputs) -> None:
    cells = [(n, gflag, s) for n in c.sizes for gflag in (False, True) for s in c.seed_list]

    def one(cell):
        n, gflag, s = cell
        return _platoon(n, c, s, gflag)

    traces = pmap(one, cells)
    rows = []
    for (n, gflag, s), tr in zip(cells, traces):
        rows.append([n, int(gflag), s, _num(tr.meta["settling"]), tr.verdict])
    out.write("platoon_runs.csv", _csv(["N", "grounded", "seed", "settling", "verdict"], rows))
    med_rows = []
    for n in c.sizes:
        for gflag in (False, True):
            vals = [tr.meta["settling"] for (m, g, _), tr in zip(cells, traces) if m == n and g == gflag]
            med_rows.append([n, int(gflag), _num(_median(vals))])
    out.write("platoon_settling.csv", _csv(["N", "grounded", "median_settling"], med_rows))
    series = []
    for (n, gflag, s), tr in zip(cells, traces):
        if s != c.seed_list[0]:
            continue
        tag = f"N{n}_{'grounded' if gflag else 'nongrounded'}"
        out.write(f"platoon_{tag}.csv", tr.csv())
        series.append((tag, list(range(tr.disagreement.size)), tr.disagreement.tolist()))
    out.write("platoon.svg", svg.line_chart(series, "platoon disagreement", "k", "disagreement", logy=True))


def _platoon(n, c, seed, grounded):
    return sim.platoon_scenario(
        n, c.d, seed=seed, grounded=grounded, horizon=c.horizon, disturbance=c.disturbance, window=tuple(c.window)
    )


LOSS_HEADER = ["seed", "delta_A", "delta_bar_A", "unstable_product", "straddle", "pre_verdict", "post_verdict"]


def cmd_loss(c: cfgmod.ExperimentConfig, out: Outputs) -> None:
    results = pmap(
        lambda s: sc.loss_scenario(c.N, c.d, s, c.a11, c.ground_step, c.horizon, c.ground_node - 1),
        c.seed_list,
    )
    rows = []
    for s, r in zip(c.seed_list, results):
        rep = r.report()
        rows.append([s] + [_num(rep[k]) for k in LOSS_HEADER[1:]])
    out.write("loss_margins.csv", _csv(LOSS_HEADER, rows))
    if results:
        first = results[0]
        out.write("loss_trace.csv", first.trace.csv())
        out.write("loss_events.csv", first.trace.event_log())
        d = first.trace.disagreement
        out.write("loss.svg", svg.line_chart([("disagreement", list(range(d.size)), d.tolist())], "loss of consensus", "k", "disagreement", logy=True))


RECOVERY_HEADER = ["seed", "budget", "extra_nodes", "margin", "lambda_bar_1", "radius", "settling", "verdict"]


def cmd_recovery(c: cfgmod.ExperimentConfig, out: Outputs) -> None:
    cells = [(b, s) for b in c.budgets for s in c.seed_list]
    ground_step = 0 if c.ground_step is None else c.ground_step

    def one(cell):
        b, s = cell
        return sc.recovery_scenario(
            c.N, c.d, s, c.a11, b, ground_step, c.recover_step, c.horizon, c.ground_node - 1
        )

    results = pmap(one, cells)
    rows, plans = [], []
    for (b, s), r in zip(cells, results):
        p = r.plan
        extra = " ".join(str(v + 1) for v in p.extra_grounded) if p else ""
        rows.append(
            [s, b, extra, _num(p.achieved_margin if p else None), _num(r.meta.get("lambda_bar_1")),
             _num(r.meta.get("radius")), _num(r.settling), r.trace.verdict]
        )
        if p is not None:
            plans.append(p)
    out.write("recovery_runs.csv", _csv(RECOVERY_HEADER, rows))
    out.write("recovery_plans.csv", cm.plans_csv(plans))
    rate = []
    for b in c.budgets:
        got = [r for (bb, _), r in zip(cells, results) if bb == b]
        ok = sum(r.converged for r in got)
        rate.append([b, len(got), ok, _num(ok / len(got) if got else float("nan")),
                     _num(_median([r.settling for r in got]))])
    out.write("recovery_rate.csv", _csv(["budget", "runs", "converged", "rate", "median_settling"], rate))
    series = []
    for (b, s), r in zip(cells, results):
        if s == c.seed_list[0]:
            out.write(f"recovery_budget{b}.csv", r.trace.csv())
            d = r.trace.disagreement
            series.append((f"budget {b}", list(range(d.size)), d.tolist()))
    out.write("recovery.svg", svg.line_chart(series, "loss and recovery", "k", "disagreement", logy=True))


def graph_bounds(g: gr.Graph, tag: str, node: int = 0) -> list[sp.BoundReport]:
    """Every bound check for one graph, names prefixed with ``tag``."""
    reps = []
    h = None
    full = sp.laplacian_spectrum(g)
    if g.n <= gr.CHEEGER_N_MAX:
        h = gr.cheeger(g).exact
        dmax = g.max_degree
        reps += [
            sp.bound("cheeger.lower", h * h / (2 * dmax), full.lambda2),
            sp.bound("cheeger.upper", full.lambda2, 2 * h),
            sp.bound("cheeger.eigenratio", h * h / (4 * dmax * dmax), full.eigenratio),
        ]
    d = g.regular_degree()
    c = None if h is None or d is None else min(h, d)
    reps += sp.lemma1_check(g, node, c)
    reps += sp.lemma2_check(g, node)
    other = (node + 1) % g.n
    reps += sp.multi_ground_monotonicity(g, {node}, {node, other})
    return [sp.BoundReport(f"{tag}/{r.name}", r.lhs, r.rhs, r.satisfied, r.slack) for r in reps]


def cmd_bounds(c: cfgmod.ExperimentConfig, out: Outputs) -> None:
    cells = []
    for n in c.sizes:
        for d in c.degrees:
            if d >= n or (n * d) % 2:
                log.warning("skipping infeasible family N=%d d=%d", n, d)
                continue
            cells += [(n, d, s) for s in c.seed_list]

    def one(cell):
        n, d, s = cell
        g = gr.random_regular(n, d, seed=np.random.default_rng([s, n, d]))
        return graph_bounds(g, f"N{n}.d{d}.s{s}", c.ground_node - 1)

    reports = [r for batch in pmap(one, cells) for r in batch]
    out.write("bounds.csv", sp.bounds_csv(reports))
    remark = gr.counterexample_graph()
    rem = [r for v in range(remark.n) for r in sp.interlacing_check(remark, v)]
    rem = [sp.BoundReport(f"remark.node{i // (2 * (remark.n - 1)) + 1}/{r.name}", r.lhs, r.rhs, r.satisfied, r.slack) for i, r in enumerate(rem)]
    out.write("bounds_remark.csv", sp.bounds_csv(rem))
    bad = [r.name for r in reports + rem if not r.satisfied]
    if bad:
        log.warning("%d bound violations, first: %s", len(bad), bad[0])


COMMANDS = {
    "scaling": cmd_scaling,
    "platoon": cmd_platoon,
    "loss": cmd_loss,
    "recovery": cmd_recovery,
    "bounds": cmd_bounds,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="conslab", description="Consensus experiments on grounded networks.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="key = value experiment file")
    p.add_argument("--seed", type=int, default=None, help="override the base seed")
    p.add_argument("--out", default=None, help="output directory (overrides config)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        c = cfgmod.load(args.config)
        if c.experiment != args.command:
            raise ConfigError(f"config is for {c.experiment!r}, not {args.command!r}")
        over = {}
        if args.seed is not None:
            over["seed"] = args.seed
        if args.out is not None:
            over["out"] = args.out
        c = c.with_overrides(**over)
        out = Outputs(Path(c.out))
        out.write("config.txt", c.dumps())
        COMMANDS[args.command](c, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConslabError, ValueError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for p in out.written:
        log.info("wrote %s", p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
