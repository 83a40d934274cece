"""Command line: ``run``, ``sweep-k`` and ``validate``.

Exit codes: 0 success, 1 input error, 2 some step infeasible, 3 internal error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ..planner import SelectionPolicy
from ..scenario import ScenarioError, load_scenario
from .output import emit_charts, emit_csv, emit_summary
from .runner import METHODS, RunSpec, compare_methods, run_trace, sweep_k

OK, INPUT_ERROR, INFEASIBLE, INTERNAL = 0, 1, 2, 3

log = logging.getLogger("rsucrm")


class _InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(INPUT_ERROR, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _seeds(text: str) -> tuple[int, ...]:
    """``30`` means seeds 0..29; ``3,7`` or ``7,`` is an explicit list."""
    if "," in text:
        return _int_list(text)
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seeds {text!r}")
    if n < 1:
        raise argparse.ArgumentTypeError("seed count must be >= 1")
    return tuple(range(n))


def _common(p: argparse.ArgumentParser):
    p.add_argument("--scenario", type=Path, default=None, help="scenario JSON (default: bundled ring scenario)")
    p.add_argument("--k", type=int, default=100, help="replications per host-count level")
    p.add_argument("--seeds", type=_seeds, default=(0,), help="seed count or comma list")
    p.add_argument("--omega", type=float, default=0.5, help="host weight of the first-step objective")
    p.add_argument("--policy", choices=("lex", "weighted"), default="lex")
    p.add_argument("--rho", type=float, default=0.5, help="migration weight in weighted mode")
    p.add_argument("--out", type=Path, default=Path("out"))
    p.add_argument("--no-charts", action="store_true")
    p.add_argument("--timing", action="store_true", help="write wall times into the CSV")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rsucrm", description="Service placement reconfiguration experiments.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run the demand trace under each method")
    _common(run)
    run.add_argument("--methods", default=",".join(METHODS), help="comma list of heuristic, exact, purist")

    sw = sub.add_parser("sweep-k", help="heuristic only, for several K")
    _common(sw)
    sw.add_argument("--values", type=_int_list, default=(1, 10, 100))

    val = sub.add_parser("validate", help="check a scenario file")
    val.add_argument("--scenario", type=Path, required=True)
    return parser


def _spec(args, methods) -> RunSpec:
    try:
        policy = SelectionPolicy(args.policy, args.rho, args.omega)
        return RunSpec(args.scenario, methods, args.k, args.seeds, policy, args.out)
    except ValueError as exc:
        raise _InputError(str(exc))


def _report(rows, args) -> int:
    out = Path(args.out)
    emit_csv(rows, out / "metrics.csv", timing=args.timing)
    comparison = compare_methods(rows) if rows else None
    if comparison is not None:
        emit_summary(comparison, out / "summary.csv")
        for line in comparison.verdict_lines():
            print(line)
    if not args.no_charts and rows:
        emit_charts(rows, out)
    print(f"wrote {len(rows)} rows to {out / 'metrics.csv'}")
    return INFEASIBLE if any(not r.feasible for r in rows) else OK


def _dispatch(args) -> int:
    if args.command == "validate":
        sc = load_scenario(args.scenario)
        print(json.dumps({"nodes": sc.graph.n_nodes, "edges": len(sc.graph.edges),
                          "services": len(sc.services), "steps": len(sc.trace.steps)}))
        return OK
    if args.command == "run":
        methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
        spec = _spec(args, methods)
        rows = run_trace(spec)
    else:
        spec = _spec(args, ("heuristic",))
        try:
            rows = sweep_k(spec, args.values)
        except ValueError as exc:
            raise _InputError(str(exc))
    return _report(rows, args)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        return _dispatch(args)
    except ScenarioError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return INPUT_ERROR
    except (_InputError, FileNotFoundError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return INPUT_ERROR
    except Exception as exc:  # pragma: no cover - reported, not hidden
        log.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return INTERNAL


if __name__ == "__main__":
    sys.exit(main())
