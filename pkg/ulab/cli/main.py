"""
ulab command line.
Every subcommand builds an ExperimentConfig and hands it to the
ExperimentOrchestrator; `run` reads the config from an INI file and `suite`
runs one of the fixed acceptance ladders.

Exit codes: 0 success, 1 failed step / check or library error, 2 config error.
"""

import argparse
import logging
import os
import sys
from typing import List, Optional

import pandas as pd

from ulab import __version__
from ulab.core.config import ExperimentConfig, ExperimentParams, load_config, load_env
from ulab.core.errors import ConfigError, UlabError
from ulab.core.orchestrator import SUITES, ExperimentOrchestrator, ExperimentResult

logger = logging.getLogger("ulab")


# ── Terminal colours ──────────────────────────────────────────────────────────
def _c(code, text): return f"\033[{code}m{text}\033[0m" if sys.stderr.isatty() else text
def ok(msg):   print(_c("92", f"  ✓  {msg}"), file=sys.stderr)
def info(msg): print(_c("96", f"  →  {msg}"), file=sys.stderr)
def warn(msg): print(_c("93", f"  ⚠  {msg}"), file=sys.stderr)
def fail(msg): print(_c("91", f"  ✗  {msg}"), file=sys.stderr)


def _k_range(text: str) -> List[int]:
    """'4' -> [4]; '1..4' -> [1, 2, 3, 4]."""
    if ".." in text:
        lo, hi = text.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(text)]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ulab", description="Uniformity statistics of multiplicative functions.")
    parser.add_argument("--version", action="version", version=f"ulab {__version__}")
    parser.add_argument("--cache-dir", default=None, help="function-table cache (default: $ULAB_CACHE)")
    parser.add_argument("--workers", type=int, default=None, help="threads for chunked sums (default: $ULAB_WORKERS)")
    parser.add_argument("--timing", action="store_true", help="add a wall_time column to result rows")
    parser.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parser.add_argument("--force", action="store_true", help="overwrite an existing output CSV")
    parser.add_argument("--output", "-o", default=None, help="CSV output path")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sieve", help="tabulate λ, μ, Λ on [start, end]")
    p.add_argument("--kind", default="liouville", choices=["liouville", "moebius", "von_mangoldt"])
    p.add_argument("--start", default="1")
    p.add_argument("--end", default="100")
    p.add_argument("--print", dest="print_values", action="store_true", help="print one value per line")

    p = sub.add_parser("gowers-avg", help="stratified average of U^{k+1} norms on [X, 2X]")
    p.add_argument("--spec", default="liouville")
    p.add_argument("--X", default="10000", help="comma-separated X ladder, 10^4 notation accepted")
    p.add_argument("--H", default="X^0.4")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--method", default="recursive", choices=["direct", "recursive"])
    p.add_argument("--logarithmic", action="store_true")

    p = sub.add_parser("weak-gowers", help="stratified average of weak u^{k+1} norms")
    p.add_argument("--spec", default="liouville")
    p.add_argument("--X", default="10000")
    p.add_argument("--H", default="48")
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--samples", type=int, default=50)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--sigma", type=float, default=0.05)
    p.add_argument("--mode", default="exhaustive", choices=["exhaustive", "heuristic"])

    p = sub.add_parser("pretentious", help="M(f; X, Q) over twisted characters")
    p.add_argument("--spec", default="liouville")
    p.add_argument("--X", default="1000")
    p.add_argument("--Q", type=int, default=10)
    p.add_argument("--t-resolution", type=float, default=0.05)
    p.add_argument("--t-max", type=float, default=None, help="bound on |t| (default: X)")

    p = sub.add_parser("patterns", help="sign patterns of λ")
    p.add_argument("--k", default="4", help="length or range such as 1..4")
    p.add_argument("--N", default="1000000")

    p = sub.add_parser("chowla", help="Chowla correlation averaged over h <= X^ε")
    p.add_argument("--shifts", default="0,1")
    p.add_argument("--X", default="10000")
    p.add_argument("--epsilon", type=float, default=0.3)
    p.add_argument("--logarithmic", action="store_true")

    p = sub.add_parser("polyavg", help="polynomial correlation averages")
    p.add_argument("--polys", default="m; 2*m", help="semicolon-separated integer polynomials in m or m1, m2, ...")
    p.add_argument("--weights", default="lambda,lambda")
    p.add_argument("--X", default="10000")
    p.add_argument("--epsilon", type=float, default=0.25)
    p.add_argument("--logarithmic", action="store_true")

    p = sub.add_parser("nilseq", help="Heisenberg nilsequence discorrelation and equidistribution")
    p.add_argument("--spec", default="liouville")
    p.add_argument("--F", default="horizontal(1,0)")
    p.add_argument("--coeffs", default="1:sqrt(2):sqrt(3):0", help="j:x:y:z Taylor coefficients")
    p.add_argument("--X", default="100000", help="interval starts x")
    p.add_argument("--H", default="1000")
    p.add_argument("--N", default="1000", help="equidistribution bounds")

    p = sub.add_parser("algebra", help="randomised exact algebra checks")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=1)

    p = sub.add_parser("suite", help="run a named acceptance ladder")
    p.add_argument("name", choices=SUITES)

    p = sub.add_parser("run", help="run the experiment described by an INI config")
    p.add_argument("config")
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    """Map a subcommand's flags onto an ExperimentConfig."""
    cmd = args.command
    seed = getattr(args, "seed", 1)
    if cmd == "sieve":
        params = dict(spec=args.kind, start=args.start, end=args.end)
    elif cmd == "gowers-avg":
        params = dict(spec=args.spec, X=args.X, H=args.H, k=args.k, samples=args.samples,
                      method=args.method, logarithmic=args.logarithmic)
    elif cmd == "weak-gowers":
        params = dict(spec=args.spec, X=args.X, H=args.H, k=args.k, samples=args.samples,
                      sigma=args.sigma, mode=args.mode)
    elif cmd == "pretentious":
        params = dict(spec=args.spec, X=args.X, Q=args.Q, t_resolution=args.t_resolution, t_max=args.t_max)
    elif cmd == "patterns":
        ks = _k_range(args.k)
        params = dict(k=ks[-1], ks=ks, N=args.N)
    elif cmd == "chowla":
        params = dict(shifts=args.shifts, X=args.X, epsilon=args.epsilon, logarithmic=args.logarithmic)
    elif cmd == "polyavg":
        params = dict(polys=args.polys, weights=args.weights, X=args.X, epsilon=args.epsilon,
                      logarithmic=args.logarithmic)
    elif cmd == "nilseq":
        params = dict(spec=args.spec, F=args.F, coeffs=args.coeffs, X=args.X, H=args.H, N=args.N)
    elif cmd == "algebra":
        params = dict(samples=args.trials)
    else:
        raise ConfigError(f"subcommand '{cmd}' has no config form")
    try:
        return ExperimentConfig(kind=cmd, seed=seed, output=args.output, cache_dir=args.cache_dir,
                                workers=args.workers, params=ExperimentParams(**params))
    except ValueError as exc:
        raise ConfigError(f"invalid arguments for {cmd}: {exc}") from exc


def _report(result: ExperimentResult, print_values: bool = False) -> int:
    if result.skipped:
        warn(result.narrative)
        return 0
    if print_values:
        for o in result.outputs:
            if o.data is not None and "value" in o.data:
                for v in o.data["value"]:
                    print(f"{v:g}" if isinstance(v, float) else v)
    elif result.rows and not result.output_path:
        df = pd.DataFrame([r.flat() for r in result.rows])
        print(df.to_string(index=False))

    for line in result.narrative.splitlines():
        info(line)
    for check in result.checks:
        (ok if check["passed"] else fail)(f"{check['check']}: {check['detail']}")
    failed_steps = [s for s in result.steps_executed if not s["success"]]
    for s in failed_steps:
        fail(f"{s['agent']}.{s['operation']} failed")
    if result.output_path:
        ok(f"{len(result.rows)} rows written to {result.output_path}")
    return 0 if result.passed else 1


def main(argv: Optional[List[str]] = None) -> int:
    load_env()
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s", stream=sys.stderr)

    try:
        if args.command == "suite":
            orch = ExperimentOrchestrator(args.cache_dir, args.workers, args.timing)
            return _report(orch.run_suite(args.name, args.output, args.force))
        if args.command == "run":
            cfg = load_config(args.config)
            if args.output:
                cfg = cfg.model_copy(update={"output": args.output})
        else:
            cfg = config_from_args(args)
        if cfg.budget is not None:
            os.environ["ULAB_BUDGET"] = str(cfg.budget)
        orch = ExperimentOrchestrator(cfg.resolved_cache_dir(), cfg.workers or args.workers, args.timing)
        return _report(orch.run_config(cfg, force=args.force), getattr(args, "print_values", False))
    except ConfigError as exc:
        fail(f"config error: {exc}")
        return 2
    except UlabError as exc:
        fail(str(exc))
        return 1


if __name__ == "__main__":
    sys.exit(main())
