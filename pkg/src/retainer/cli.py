"""Command-line front end: ``retainer {analyze,optimize,route,simulate,sweep}``.

Exit codes: 0 success, 2 usage or parse error, 3 infeasible instance,
4 numeric domain error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from .erlang import DomainError, RetainerParams, pool_metrics
from .routing import InfeasibleError, RoutingInstance, min_max_intensity, random_assignment
from .sizing import min_pool_for_miss_prob, min_pool_for_wait, optimize_total_cost, shared_pool_size
from .sweep import SweepError, SweepSpec, format_value, run_sweep, to_csv

EXIT_USAGE, EXIT_INFEASIBLE, EXIT_DOMAIN = 2, 3, 4
FORMATS = ("table", "csv", "structured")


class UsageError(Exception):
    pass


# -- argument handling --------------------------------------------------------

def _common(p: argparse.ArgumentParser, default_format: str = "table") -> None:
    p.add_argument("--seed", type=int, default=None, help="random seed (simulation only)")
    p.add_argument("--output", type=Path, default=None, help="write output to this file instead of stdout")
    p.add_argument("--format", choices=FORMATS, default=default_format)


def _rates(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("rates and prices")
    g.add_argument("--lambda", dest="lam", type=float, help="task arrival rate (per second)")
    g.add_argument("--mu", type=float, help="worker recruitment rate (per second)")
    g.add_argument("--rho", type=float, help="traffic intensity lambda/mu (lambda defaults to 1)")
    g.add_argument("--c-task", dest="c_task", type=float, default=0.0, help="cost of a missed task")
    g.add_argument("--a", type=float, default=0.0, help="abandonment fraction")
    g.add_argument("--per-time", action="store_true", help="weight the miss cost by the task rate")
    w = g.add_mutually_exclusive_group()
    w.add_argument("--wage", type=float, help="retainer wage per worker-second")
    w.add_argument("--wage-per-min", type=float, help="retainer wage per worker-minute")
    w.add_argument("--wage-per-hour", type=float, help="retainer wage per worker-hour")


def _wage(args) -> float:
    if args.wage is not None:
        return args.wage
    if args.wage_per_min is not None:
        return args.wage_per_min / 60.0
    if args.wage_per_hour is not None:
        return args.wage_per_hour / 3600.0
    return 0.0


def _params(args, c: int = 0) -> RetainerParams:
    lam, mu, rho = args.lam, args.mu, args.rho
    given = sum(x is not None for x in (lam, mu, rho))
    if given == 3:
        if not math.isclose(lam / mu, rho, rel_tol=1e-9):
            raise UsageError("--lambda, --mu and --rho disagree; give two of them")
    elif rho is not None:
        if lam is None and mu is None:
            lam = 1.0
        if lam is None:
            lam = rho * mu
        if mu is None:
            if rho <= 0:
                raise DomainError(f"rho must be > 0 to derive mu, got {rho}")
            mu = lam / rho
    elif lam is None or mu is None:
        raise UsageError("give --lambda and --mu, or --rho")
    return RetainerParams(lam=lam, mu=mu, c=c, s=_wage(args), c_task=args.c_task, a=args.a)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="retainer", description="Retainer-pool sizing, routing and simulation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="steady-state metrics of one pool")
    _rates(p)
    p.add_argument("--c", type=int, required=True, help="pool size")
    _common(p)

    p = sub.add_parser("optimize", help="smallest pool meeting a target, or the cheapest pool")
    _rates(p)
    goal = p.add_mutually_exclusive_group(required=True)
    goal.add_argument("--max-miss", type=float, help="largest acceptable empty-pool probability")
    goal.add_argument("--max-wait", type=float, help="largest acceptable expected wait (seconds)")
    goal.add_argument("--min-cost", action="store_true", help="minimise miss cost plus retainer wages")
    p.add_argument("--pools", type=int, default=None, help="size one shared pool for this many requesters")
    _common(p)

    p = sub.add_parser("route", help="route worker groups to task types")
    p.add_argument("instance", type=Path, help="routing instance (JSON)")
    p.add_argument("--baseline", choices=("random",), default=None, help="also show the uniform split")
    _common(p)

    p = sub.add_parser("simulate", help="discrete-event simulation of a retainer pool")
    p.add_argument("config", type=Path, help="simulation config (JSON)")
    p.add_argument("--replications", type=int, default=1)
    p.add_argument("--workers", type=int, default=1, help="processes used for replications")
    p.add_argument("--compare-analytic", action="store_true", help="add steady-state values and z-scores")
    _common(p)

    p = sub.add_parser("sweep", help="tabulate metrics over a parameter grid")
    p.add_argument("spec", type=Path, help="sweep spec (JSON)")
    _common(p, default_format="csv")
    return parser


def _load_json(path: Path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc})") from None


# -- rendering ----------------------------------------------------------------

def _table(pairs: list[tuple[str, object]]) -> str:
    width = max(len(k) for k, _ in pairs)
    return "".join(f"{k:<{width}}  {_cell(v)}\n" for k, v in pairs)


def _cell(v) -> str:
    return "-" if v is None else format_value(v) if isinstance(v, (int, float)) else str(v)


def _grid(header: list[str], rows: list[list]) -> str:
    cells = [header] + [[_cell(v) for v in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    return "".join("  ".join(c.rjust(w) for c, w in zip(r, widths)).rstrip() + "\n" for r in cells)


def _structured(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def _render(fmt: str, pairs: list[tuple[str, object]], structured) -> str:
    if fmt == "structured":
        return _structured(structured)
    if fmt == "csv":
        return to_csv([k for k, _ in pairs], [[v for _, v in pairs]])
    return _table(pairs)


# -- commands -----------------------------------------------------------------

def cmd_analyze(args) -> str:
    if args.c < 0:
        raise DomainError(f"pool size must be >= 0, got {args.c}")
    params = _params(args, args.c)
    m = pool_metrics(params, per_time=args.per_time)
    pairs = [
        ("lambda", params.lam), ("mu", params.mu), ("rho", m.rho), ("c", m.c),
        ("loss_prob", m.loss_prob), ("expected_wait", m.expected_wait),
        ("expected_busy", m.expected_busy), ("expected_idle", m.expected_idle),
        ("wage_per_second", params.s), ("retainer_cost_rate", m.retainer_cost_rate),
        ("c_task", params.c_task), ("total_cost", m.total_cost),
    ]
    return _render(args.format, pairs, {"command": "analyze", "params": params.to_dict(), "metrics": m.to_dict()})


def cmd_optimize(args) -> str:
    params = _params(args)
    if args.pools is not None:
        if args.max_miss is None:
            raise UsageError("--pools only applies with --max-miss")
        res = shared_pool_size(params.rho, args.pools, args.max_miss)
    elif args.max_miss is not None:
        res = min_pool_for_miss_prob(params.rho, args.max_miss, params.mu)
    elif args.max_wait is not None:
        res = min_pool_for_wait(params.lam, params.mu, args.max_wait)
    else:
        res = optimize_total_cost(params, per_time=args.per_time)
    pairs = [
        ("rho", params.rho), ("c_star", res.c_star), ("achieved_loss", res.achieved_loss),
        ("achieved_wait", res.achieved_wait), ("objective", res.objective),
        ("binding_constraint", res.binding_constraint),
    ]
    return _render(args.format, pairs, {"command": "optimize", "params": params.to_dict(), "result": res.to_dict()})


def _plan_rows(instance: RoutingInstance, plan) -> list[list]:
    rows = []
    for g in instance.groups:
        rows.append([g.id] + [plan.assignments.get((g.id, t.id), 0.0) for t in instance.tasks])
    rows.append(["received"] + [plan.received().get(t.id, 0.0) for t in instance.tasks])
    rows.append(["rho"] + [plan.per_task_rho[t.id] for t in instance.tasks])
    return rows


def cmd_route(args) -> str:
    raw = _load_json(args.instance)
    try:
        instance = RoutingInstance.from_dict(raw)
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"{args.instance}: bad routing instance ({exc})") from None
    plan = min_max_intensity(instance)
    blocks = [("optimal", plan)]
    if args.baseline == "random":
        blocks.append(("random", random_assignment(instance)))
    if args.format == "structured":
        out = {"command": "route", "instance": instance.to_dict(), "plan": plan.to_dict()}
        if len(blocks) > 1:
            out["baseline"] = blocks[1][1].to_dict()
        return _structured(out)
    header = ["plan", "group"] + [t.id for t in instance.tasks]
    rows = [[name, *r] for name, p in blocks for r in _plan_rows(instance, p)]
    if args.format == "csv":
        return to_csv(header, rows)
    text = "".join(f"{name} worst rho: {format_value(p.worst_rho)}\n" for name, p in blocks)
    return text + "\n" + _grid(header, rows)


def _report_pairs(report, comparison) -> list[tuple[str, object]]:
    pairs = []
    for k, v in report.to_dict().items():
        if k == "per_tier":
            for t in v or []:
                i = t["tier"]
                for name in ("size", "arrivals", "alerted", "responded", "diverted"):
                    pairs.append((f"tier{i}_{name}", t[name]))
                pairs.append((f"tier{i}_mean_idle_workers", t["mean_idle_workers"]["mean"]))
                pairs.append((f"tier{i}_cost_rate", t["cost_rate"]["mean"]))
        elif isinstance(v, dict):
            pairs += [(k, v["mean"]), (f"{k}_se", v["se"])]
        elif v is not None:
            pairs.append((k, v))
    for name, row in (comparison or {}).items():
        pairs += [(f"{name}_analytic", row["analytic"]), (f"{name}_z", row["z"])]
    return pairs


def cmd_simulate(args) -> str:
    from .sim import ConfigError, SimConfig, replicate, simulate
    from .sim.report import compare_analytic

    raw = _load_json(args.config)
    try:
        cfg = SimConfig.from_dict(raw)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
    except ConfigError as exc:
        raise UsageError(f"{args.config}: {exc}") from None
    if args.replications < 1:
        raise UsageError("--replications must be >= 1")
    if args.compare_analytic and cfg.mode != "baseline":
        raise UsageError("--compare-analytic applies to baseline configs only")
    if args.replications == 1:
        report = simulate(cfg)
    else:
        report = replicate(cfg, args.replications, workers=args.workers)
    comparison = compare_analytic(report, cfg.params) if args.compare_analytic else None
    structured = {"command": "simulate", "config": cfg.to_dict(), "report": report.to_dict()}
    if comparison is not None:
        structured["comparison"] = comparison
    return _render(args.format, _report_pairs(report, comparison), structured)


def cmd_sweep(args) -> str:
    spec = SweepSpec.from_dict(_load_json(args.spec))
    rows = run_sweep(spec)
    header = spec.columns()
    if args.format == "structured":
        return _structured({"command": "sweep", "spec": spec.to_dict(), "columns": header, "rows": rows})
    if args.format == "table":
        return _grid(header, rows)
    return to_csv(header, rows)


COMMANDS = {
    "analyze": cmd_analyze,
    "optimize": cmd_optimize,
    "route": cmd_route,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        text = COMMANDS[args.command](args)
    except (UsageError, SweepError) as exc:
        print(f"retainer {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InfeasibleError as exc:
        print(f"retainer {args.command}: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except DomainError as exc:
        print(f"retainer {args.command}: domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    if args.output is not None:
        with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
