"""Command line entry point: ``simulate``, ``sweep`` and ``thresholds``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from . import harness
from .errors import ConfigError, IoError

logger = logging.getLogger("chemolab")


def _cmd_simulate(args) -> int:
    cfg = harness.ScenarioConfig.from_dict(harness.load_json(args.config))
    outcome, summary = harness.run_scenario(cfg, args.out)
    print(json.dumps({"outcome": summary["outcome"], "tail": summary["tail"], "rates": summary["rates"]},
                     default=float))
    return 0


def _cmd_sweep(args) -> int:
    cfg = harness.SweepConfig.from_dict(harness.load_json(args.config))
    rows = harness.run_sweep(cfg, args.out, parallelism=args.parallel)
    counts: dict[str, int] = {}
    for r in rows:
        counts[r.get("status", "Error")] = counts.get(r.get("status", "Error"), 0) + 1
    print(json.dumps({"runs": len(rows), "status_counts": counts}))
    return 0


def _cmd_thresholds(args) -> int:
    report = harness.report_thresholds(
        n_dim=args.ndim, p=args.p, q=args.q, lam=args.lam, chi=args.chi, alpha=args.alpha,
        beta=args.beta, r=args.r, mu=args.mu, eta=args.eta, lx=args.lx, ly=args.ly)
    print(json.dumps(report.to_json(), indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chemolab", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one scenario")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("sweep", help="run a parameter sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--parallel", type=int, default=None, metavar="K")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("thresholds", help="print the threshold report as JSON")
    p.add_argument("--ndim", type=int, required=True)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--q", type=float, default=0.5)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--chi", type=float, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--eta", type=float, default=1.0)
    p.add_argument("--lx", type=float, default=1.0)
    p.add_argument("--ly", type=float, default=1.0)
    p.set_defaults(func=_cmd_thresholds)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except IoError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
