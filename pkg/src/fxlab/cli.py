"""``fxlab`` command line.

Exit codes: 0 success, 1 usage error, 2 runtime error.  Results go to stdout
as JSON (or to ``--out``); diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict
from pathlib import Path

from . import exact, moran, optimizers, weak
from .errors import ConfigError, FxlabError
from .experiment import ExperimentConfig, run_experiment, write_report
from .graph import Graph, from_spec, read_edge_list


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _dump(obj) -> str:
    def fix(v):
        if isinstance(v, float):
            return float(f"{v:.12g}") if math.isfinite(v) else None
        if isinstance(v, dict):
            return {k: fix(x) for k, x in v.items()}
        if isinstance(v, (list, tuple)):
            return [fix(x) for x in v]
        return v
    return json.dumps(fix(obj), separators=(",", ":"))


def _add_graph_args(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--graph", help="edge-list file")
    src.add_argument("--gen", help="generator, e.g. cycle(50) or random-connected(10,15,3)")
    p.add_argument("--directed", action="store_true", help="read the edge list as directed")
    p.add_argument("--weighted", action="store_true", help="edge list carries weights (directed only)")
    p.add_argument("--out", help="write output here instead of stdout")


def _load_graph(args) -> Graph:
    if args.gen:
        return from_spec(args.gen)
    return read_edge_list(args.graph, directed=args.directed, weighted=args.weighted)


def _active(g: Graph, text: str | None) -> frozenset:
    if not text:
        return frozenset()
    try:
        return frozenset(g.index_of(tok.strip()) for tok in text.split(",") if tok.strip())
    except KeyError as exc:
        raise UsageError(str(exc.args[0])) from None


def _budget(g: Graph, text: str) -> int:
    try:
        if any(c in text for c in ".eE"):
            frac = float(text)
            if not 0 <= frac <= 1:
                raise ValueError
            return int(math.floor(frac * g.n + 1e-9))
        k = int(text)
        if k < 0:
            raise ValueError
        return k
    except ValueError:
        raise UsageError(f"bad budget {text!r}: use a non-negative integer or a fraction in [0, 1]") from None


def _labels(g: Graph, nodes) -> list[str]:
    return [g.labels[u] for u in nodes]


def _estimate_dict(est: moran.FpEstimate) -> dict:
    d = asdict(est)
    d["ci95"] = list(est.ci95)
    return d


def cmd_simulate(args) -> dict:
    g = _load_graph(args)
    params = moran.ProcessParams(_active(g, args.active), args.delta)
    cap = args.cap
    if cap is None and not g.undirected:
        cap = moran.default_cap(g.n, args.delta)
    est = moran.estimate_fp(g, params, args.trials, args.seed, cap=cap)
    return _estimate_dict(est)


def cmd_exact(args) -> dict:
    g = _load_graph(args)
    res = exact.exact_fp(g, _active(g, args.active), args.delta, cap_n=args.cap_n)
    return {"average": res.average,
            "per_start": dict(zip(g.labels, res.per_start))}


def cmd_strong(args) -> dict:
    g = _load_graph(args)
    active = _active(g, args.active)
    if args.exact:
        res = exact.exact_fp_strong(g, active, cap_n=args.cap_n)
        return {"average": res.average, "per_start": dict(zip(g.labels, res.per_start))}
    return _estimate_dict(moran.estimate_fp_strong(g, active, args.trials, args.seed))


def cmd_weak_select(args) -> dict:
    g = _load_graph(args)
    res = weak.weak_select(g, _budget(g, args.k))
    return {"chosen": _labels(g, res.chosen), "objective": res.objective}


def cmd_select(args) -> dict:
    g = _load_graph(args)
    k = _budget(g, args.k)
    oracle = None
    if args.heuristic == "lazy-greedy":
        if args.regime == "weak":
            oracle = optimizers.weak_oracle(g)
        elif args.regime == "strong":
            oracle = (optimizers.strong_exact_oracle(g) if g.n <= args.exact_cap
                      else optimizers.strong_mc_oracle(g, args.trials, args.seed))
        else:
            if args.delta is None:
                raise UsageError("--regime finite needs --delta")
            cap = None if g.undirected else moran.default_cap(g.n, args.delta)
            oracle = optimizers.finite_mc_oracle(g, args.delta, args.trials, args.seed, cap)
    sel = optimizers.select(g, args.heuristic, k, seed=args.seed, oracle=oracle)
    out = {"heuristic": sel.heuristic.value, "k": k, "chosen": _labels(g, sel.chosen)}
    if sel.heuristic is optimizers.Heuristic.LAZY_GREEDY:
        out["oracle_evals"] = sel.oracle_evals
    if sel.objective is not None:
        out["objective"] = sel.objective
    return out


def cmd_experiment(args) -> None:
    cfg = ExperimentConfig.load(args.config)
    report = run_experiment(cfg)
    if args.out:
        write_report(report, args.out, args.format, timings=args.timings)
    else:
        text = report.to_csv(args.timings) if args.format == "csv" else report.to_json(args.timings)
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fxlab", description="Fixation maximisation for the positional Moran process.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="Monte-Carlo fixation probability at finite delta")
    _add_graph_args(p)
    p.add_argument("--active", default="", help="comma-separated active node labels")
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cap", type=int, default=None, help="step cap per trial")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("exact", help="exact fixation probability (small graphs)")
    _add_graph_args(p)
    p.add_argument("--active", default="")
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--cap-n", type=int, default=exact.DEFAULT_CAP_N)
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("strong", help="strong-selection fixation probability")
    _add_graph_args(p)
    p.add_argument("--active", default="")
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--exact", action="store_true", help="solve exactly instead of simulating")
    p.add_argument("--cap-n", type=int, default=exact.DEFAULT_CAP_N)
    p.set_defaults(func=cmd_strong)

    p = sub.add_parser("weak-select", help="optimal weak-selection active set")
    _add_graph_args(p)
    p.add_argument("-k", "--k", required=True, help="budget: integer or fraction of n")
    p.set_defaults(func=cmd_weak_select)

    p = sub.add_parser("select", help="run one activation heuristic")
    _add_graph_args(p)
    p.add_argument("--heuristic", required=True, choices=[h.value for h in optimizers.Heuristic])
    p.add_argument("-k", "--k", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--regime", choices=["strong", "weak", "finite"], default="strong",
                   help="objective for lazy-greedy")
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--trials", type=int, default=2_000, help="oracle trials for lazy-greedy")
    p.add_argument("--exact-cap", type=int, default=10)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("experiment", help="compare heuristics per a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--timings", action="store_true", help="add a wall_time column")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        result = args.func(args)
        if result is not None:
            text = _dump(result) + "\n"
            if getattr(args, "out", None):
                Path(args.out).write_text(text, encoding="utf-8")
            else:
                sys.stdout.write(text)
        return 0
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"fxlab: config error: {exc}", file=sys.stderr)
        return 2
    except (FxlabError, OSError, ValueError, KeyError) as exc:
        print(f"fxlab: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
