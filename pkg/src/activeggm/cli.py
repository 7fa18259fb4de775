"""Command-line interface.

Every stochastic subcommand requires ``--seed``.  ``--config`` takes a JSON
object whose keys are the subcommand's option names (dashes or
underscores); its values take precedence over flags.  Exit status is 0 on
success, 1 for bad input and 2 for numerical or runtime failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import active, chordal, harness, model, modelsel, twostage
from .cit import CitConfig, cit, read_matrix, write_matrix
from .graph import eta, format_graph, max_degree, metrics, read_graph, write_graph

logger = logging.getLogger("activeggm")


class InputError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(f"{self.prog}: {message}")


STOCHASTIC = {"generate", "sample", "active-run", "twostage", "experiment", "sweep"}


# -- shared option groups --------------------------------------------------------------

def _add_model_source(sp):
    g = sp.add_argument_group("model")
    g.add_argument("--model", help="directory holding graph.txt and theta.csv")
    g.add_argument("--kind", choices=sorted(model.GENERATORS), help="generator name")
    g.add_argument("--p", type=int, help="number of vertices")
    g.add_argument("--p1", type=int, help="weak vertices (chain, hub, two_chain)")
    g.add_argument("--rho1", type=float, default=0.1, help="weak chain entry (default 0.1)")
    g.add_argument("--rho2", type=float, default=0.3, help="strong chain entry (default 0.3)")
    g.add_argument("--cluster-size", type=int, default=20, help="cluster size (default 20)")
    g.add_argument("--prob-weak", type=float, default=0.2,
                   help="edge probability in weak clusters (default 0.2)")
    g.add_argument("--prob-strong", type=float, default=0.1,
                   help="edge probability in strong clusters (default 0.1)")
    g.add_argument("--frac-weak", type=float, default=0.2,
                   help="fraction of weak vertices (default 0.2)")
    g.add_argument("--eps", type=float, default=1e-4, help="precision offset (default 1e-4)")


def _generator_params(args) -> dict:
    if args.kind is None or args.p is None:
        raise InputError("give --model DIR or --kind with --p")
    kind = args.kind
    params = {"kind": kind, "p": args.p}
    if kind in ("chain", "two_chain"):
        params.update(rho1=args.rho1, rho2=args.rho2)
    if kind in ("chain", "hub", "two_chain"):
        if args.p1 is None:
            raise InputError(f"--p1 is required for kind {kind}")
        params["p1"] = args.p1
    if kind == "cluster":
        params.update(cluster_size=args.cluster_size, prob_weak=args.prob_weak,
                      prob_strong=args.prob_strong, frac_weak=args.frac_weak)
    if kind == "scale_free":
        params["frac_weak"] = args.frac_weak
    if kind in ("hub", "cluster", "scale_free"):
        params["eps"] = args.eps
    return params


def _load_model(args, rng):
    if args.model:
        d = Path(args.model)
        m = model.read_model(d / "graph.txt", d / "theta.csv")
        weak = d / "weak.txt"
        if weak.exists():
            vs = frozenset(int(t) for t in weak.read_text().split())
            m = model.GaussianModel(m.graph, m.theta, kind="file", weak=vs)
        return m
    return model.model_from_config(_generator_params(args), rng=rng)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _estimator_args(sp, selection_default="ebic"):
    sp.add_argument("--kappa-active", type=int, default=1, help="CIT cap while bracketing (default 1)")
    sp.add_argument("--kappa-final", type=int, default=2, help="CIT cap for the final graph (default 2)")
    sp.add_argument("--l", type=int, default=30, help="stability replicates (default 30)")
    sp.add_argument("--alpha-plus", type=float, default=0.1, help="upper-graph frequency (default 0.1)")
    sp.add_argument("--alpha-minus", type=float, default=1.0, help="lower-graph frequency (default 1.0)")
    sp.add_argument("--gamma", type=float, default=0.5, help="EBIC sparsity parameter (default 0.5)")
    sp.add_argument("--selection", choices=("ebic", "oracle"), default=selection_default,
                    help=f"final threshold choice (default {selection_default})")
    sp.add_argument("--tau-selection", choices=("replicate", "shared"), default="replicate",
                    help="EBIC per stability replicate or once per round (default replicate)")


# -- subcommands ------------------------------------------------------------------------

def cmd_generate(args):
    rng = np.random.default_rng(args.seed)
    m = model.model_from_config(_generator_params(args), rng=rng)
    out = _out_dir(args)
    model.write_model(m, out / "graph.txt", out / "theta.csv")
    (out / "weak.txt").write_text("".join(f"{v}\n" for v in sorted(m.weak)))
    print(f"wrote {m.kind} model with p={m.p}, {m.graph.n_edges} edges to {out}")


def cmd_sample(args):
    rng = np.random.default_rng(args.seed)
    m = _load_model(args, rng)
    x = model.sample(m, args.n, rng=rng)
    write_matrix(x, args.out)
    print(f"wrote {args.n} x {m.p} samples to {args.out}")


def cmd_cit(args):
    x = read_matrix(args.data)
    g = cit(x, CitConfig(args.kappa, args.tau, args.pruned, args.center))
    write_graph(g, args.out)
    print(f"{g.n_edges} edges written to {args.out}")


def cmd_triangulate(args):
    g = read_graph(args.graph)
    res = chordal.greedy_fill(g)
    lines = [format_graph(res.fill).rstrip("\n"), "# ordering " + " ".join(map(str, res.ordering))]
    lines += ["# clique " + " ".join(map(str, sorted(c))) for c in res.cliques]
    if args.out:
        write_graph(res.fill, args.out)
        lines = lines[1:]
    text = "\n".join(lines) + "\n"
    if args.cliques:
        Path(args.cliques).write_text(text)
    else:
        sys.stdout.write(text)


def _write_rows(path, rows):
    Path(path).write_text(harness.to_csv(rows[0], rows[1:]))


def cmd_active_run(args):
    rng = np.random.default_rng(args.seed)
    model_rng, stream_rng, run_rng = rng.spawn(3)
    m = _load_model(args, model_rng)
    est = active.EstimatorConfig(
        kappa_active=args.kappa_active, kappa_final=args.kappa_final, l=args.l,
        alpha_plus=args.alpha_plus, alpha_minus=args.alpha_minus, gamma=args.gamma,
        selection=args.selection, tau_selection=args.tau_selection,
        truth=m.graph if args.selection == "oracle" else None)
    draw = active.RowStream(m, stream_rng).reader()
    g, ledger = active.algorithm1(draw, active.ActiveState.initial(m.p), args.budget,
                                  args.rounds, args.delta, est, run_rng, p=m.p)
    out = _out_dir(args)
    write_graph(g, out / "graph.txt")
    _write_rows(out / "ledger.csv", ledger.csv_rows())
    tpr, fdr, ed = metrics(g, m.graph)
    print(f"scalars used {ledger.scalar_count} of {args.budget}; "
          f"TPR {tpr:.3f} FDR {fdr:.3f} ED {ed}")


def cmd_twostage(args):
    rng = np.random.default_rng(args.seed)
    model_rng, stream_rng = rng.spawn(2)
    m = _load_model(args, model_rng)
    dec = twostage.weak_split(m)
    k = args.eta if args.eta is not None else max(eta(m.graph), 1)
    rho = model.rho_params(m, dec, k)
    if rho.rho0 is None:
        rho = model.DifficultyParams(rho0=rho.rho2, rho1=rho.rho1, rho2=rho.rho2)
    draw = active.RowStream(m, stream_rng).reader()
    if args.alg == 4:
        res = twostage.algorithm4(draw, rho, k, args.c2, m.p)
    else:
        res = twostage.algorithm5(draw, dec, rho, k, args.c2)
    out = _out_dir(args)
    write_graph(res.graph, out / "graph.txt")
    _write_rows(out / "ledger.csv", res.ledger.csv_rows())
    p1, p2 = len(dec.v1), len(dec.v2)
    checks = twostage.check_a5_a7(m.p, p1, p2, rho, k, args.c2, args.c1)
    (out / "assumptions.txt").write_text("".join(c.line() + "\n" for c in checks))
    th1, th2 = model.rho_theta_params(m, dec)
    if th1 is not None and th2 is not None:
        try:
            rep = twostage.scaling_report(m.p, p1, th1, th2, max_degree(m.graph), k, len(dec.t))
            _write_rows(out / "scaling.csv", rep.csv_rows())
        except ValueError as exc:
            logger.warning("scaling report unavailable: %s", exc)
    tpr, fdr, ed = metrics(res.graph, m.graph)
    print(f"|V1_hat| = {len(res.split.v1)}, n0 = {res.plan.n0}, n1 = {res.n1}, "
          f"scalars = {res.ledger.scalar_count}; ED {ed}")


def _grid(args):
    if args.grid:
        return [float(v) for v in args.grid.split(",")]
    return modelsel.default_tau_grid(args.grid_points)


def cmd_select(args):
    x = read_matrix(args.data)
    path = modelsel.select(x, args.kappa, _grid(args), args.gamma)
    truth = read_graph(args.truth) if args.truth else None
    header = ["tau", "edges", "ebic"] + (["tpr", "fdr", "ed"] if truth else [])
    rows = []
    for tau, g, s in zip(path.taus, path.graphs, path.scores):
        row = [float(tau), g.n_edges, float(s)]
        if truth:
            row += [float(v) for v in metrics(g, truth)]
        rows.append(row)
    text = harness.to_csv(header, rows)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    if args.graph_out:
        write_graph(path.graph, args.graph_out)


def _experiment_config(args) -> harness.ExperimentConfig:
    d = dict(args.experiment or {})
    d.setdefault("seed", args.seed)
    for key in ("trials", "n", "threads", "selection", "tau_selection"):
        val = getattr(args, key, None)
        if val is not None:
            d.setdefault(key, val)
    if getattr(args, "model", None):
        raise InputError("experiments draw their own models; use --kind and --p")
    if "generator" not in d and getattr(args, "kind", None):
        d["generator"] = _generator_params(args)
    if "generator" not in d:
        raise InputError("experiment needs --kind/--p or a 'generator' config object")
    if "n" not in d:
        d["n"] = d["generator"].get("p", 1)
    return harness.ExperimentConfig.from_dict(d)


def cmd_experiment(args):
    cfg = _experiment_config(args)
    res = harness.run_experiment(cfg)
    out = _out_dir(args)
    (out / "records.csv").write_text(harness.records_csv(res.records))
    (out / "summary.csv").write_text(harness.aggregate_csv(res.table))
    for method, metric, mean, se in res.table:
        print(f"{method:10s} {metric:12s} {mean:12.4f} ({se:.4f})")


def cmd_sweep(args):
    cfg = _experiment_config(args)
    if not args.q:
        raise InputError("sweep needs --q with a comma-separated list of budgets")
    rows = harness.budget_sweep(cfg, [int(v) for v in args.q.split(",")])
    out = _out_dir(args)
    (out / "sweep.csv").write_text(harness.sweep_csv(rows))
    for q, method, m, se in rows:
        print(f"{q:8d} {method:10s} {m:10.3f} ({se:.3f})")


def cmd_report(args):
    records = harness.read_records(Path(args.records).read_text())
    methods = [m for m in harness.METHODS if any(r.method == m for r in records)]
    table = harness.aggregate(records, methods)
    text = harness.aggregate_csv(table)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


# -- parser -------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="activeggm", description="Active learning of Gaussian graphical models.")
    parser.add_argument("--log-level", default="WARNING", help="logging level (default WARNING)")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker processes for experiment trials (default 1)")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def add(name, func, help_text):
        sp = sub.add_parser(name, help=help_text, description=help_text)
        sp.set_defaults(func=func)
        sp.add_argument("--config", help="JSON file with option values (overrides flags)")
        if name in STOCHASTIC:
            sp.add_argument("--seed", type=int, help="random seed (required)")
        return sp

    sp = add("generate", cmd_generate, "write a synthetic model (graph.txt, theta.csv)")
    _add_model_source(sp)
    sp.add_argument("--out", default="model", help="output directory (default model)")

    sp = add("sample", cmd_sample, "draw i.i.d. rows from a model")
    _add_model_source(sp)
    sp.add_argument("--n", type=int, required=True, help="number of rows")
    sp.add_argument("--out", default="data.csv", help="output CSV (default data.csv)")

    sp = add("cit", cmd_cit, "estimate a graph by conditional-independence tests")
    sp.add_argument("data", help="measurement CSV (empty cells are missing)")
    sp.add_argument("--kappa", type=int, default=1, help="conditioning-set cap (default 1)")
    sp.add_argument("--tau", type=float, default=0.1, help="threshold (default 0.1)")
    sp.add_argument("--pruned", action="store_true", help="search sets among current neighbours")
    sp.add_argument("--center", action="store_true", help="subtract column means first")
    sp.add_argument("--out", default="graph.txt", help="output graph (default graph.txt)")

    sp = add("triangulate", cmd_triangulate, "min-fill chordal completion and its cliques")
    sp.add_argument("graph", help="graph file")
    sp.add_argument("--out", help="write the filled graph here")
    sp.add_argument("--cliques", help="write ordering and cliques here (default stdout)")

    sp = add("active-run", cmd_active_run, "run the budgeted active learning loop")
    _add_model_source(sp)
    sp.add_argument("--budget", type=int, required=True, help="scalar measurements q")
    sp.add_argument("--rounds", type=int, default=5, help="rounds K (default 5)")
    sp.add_argument("--delta", type=float, default=0.5, help="budget fraction per round (default 0.5)")
    _estimator_args(sp)
    sp.add_argument("--out", default="active-out", help="output directory (default active-out)")

    sp = add("twostage", cmd_twostage, "two-stage algorithm with plans and assumption report")
    _add_model_source(sp)
    sp.add_argument("--alg", type=int, choices=(4, 5), default=4, help="variant (default 4)")
    sp.add_argument("--c2", type=float, default=1.0, help="sample-size constant (default 1.0)")
    sp.add_argument("--c1", type=float, default=1.0, help="constant in the reports (default 1.0)")
    sp.add_argument("--eta", type=int, help="separator bound (default: from the model graph)")
    sp.add_argument("--out", default="twostage-out", help="output directory (default twostage-out)")

    sp = add("select", cmd_select, "EBIC threshold path for CIT")
    sp.add_argument("data", help="measurement CSV")
    sp.add_argument("--kappa", type=int, default=2, help="conditioning-set cap (default 2)")
    sp.add_argument("--gamma", type=float, default=0.5, help="EBIC sparsity parameter (default 0.5)")
    sp.add_argument("--grid", help="comma-separated thresholds (default: log-spaced in [0.01, 0.9])")
    sp.add_argument("--grid-points", type=int, default=20, help="default grid size (default 20)")
    sp.add_argument("--truth", help="true graph, adds TPR/FDR/ED columns")
    sp.add_argument("--out", help="path CSV (default stdout)")
    sp.add_argument("--graph-out", help="write the selected graph here")

    for name, func, text in (("experiment", cmd_experiment, "run a benchmark experiment"),
                             ("sweep", cmd_sweep, "edit distance over a list of budgets")):
        sp = add(name, func, text)
        _add_model_source(sp)
        sp.add_argument("--trials", type=int, help="trials (default 1)")
        sp.add_argument("--n", type=int, help="rows per trial (default p)")
        sp.add_argument("--selection", choices=("oracle", "ebic"), help="default oracle")
        sp.add_argument("--tau-selection", choices=("replicate", "shared"),
                        help="default replicate")
        if name == "sweep":
            sp.add_argument("--q", help="comma-separated ascending budgets")
        sp.add_argument("--out", default=f"{name}-out", help=f"output directory (default {name}-out)")

    sp = add("report", cmd_report, "aggregate a records CSV into means and standard errors")
    sp.add_argument("records", help="records.csv from an experiment")
    sp.add_argument("--out", help="summary CSV (default stdout)")
    return parser


def _apply_config(parser, args, argv):
    """Merge ``--config`` values; they take precedence over flags."""
    if not getattr(args, "config", None):
        return
    try:
        cfg = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read config {args.config}: {exc}") from None
    if not isinstance(cfg, dict):
        raise InputError("config must be a JSON object")
    if args.command in ("experiment", "sweep"):
        fields = {f for f in harness.ExperimentConfig.__dataclass_fields__}
        exp = {k: v for k, v in cfg.items() if k in fields}
        rest = {k: v for k, v in cfg.items() if k not in fields}
        args.experiment = exp
        cfg = rest
    for key, val in cfg.items():
        dest = key.replace("-", "_")
        if dest in ("command", "func", "config") or not hasattr(args, dest):
            raise InputError(f"unknown config key {key!r}")
        setattr(args, dest, val)


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise InputError("a subcommand is required (see --help)")
        args.experiment = None
        _apply_config(parser, args, argv)
        logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                            format="%(levelname)s %(name)s: %(message)s")
        if args.command in STOCHASTIC and args.seed is None:
            raise InputError(f"{args.command}: --seed is required")
        if args.threads is not None:
            if args.threads < 1:
                raise InputError("--threads must be at least 1")
        args.func(args)
        return 0
    except (InputError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ArithmeticError, np.linalg.LinAlgError, RuntimeError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
