"""Command-line front end.

    hapto-sim constants --m 6.2832 --chi 1 --xi 0.5 --eta 0.01 --lx 1 --ly 1
    hapto-sim gen-init <config> [--out DIR]
    hapto-sim run <config> [--out DIR] [--quiet]
    hapto-sim compare <config> [--out DIR] [--quiet]
    hapto-sim sweep <config> [--out DIR] [--quiet]

Exit codes: 0 success / expected outcome, 1 usage error, 2 config error,
3 solver failure, 4 unexpected blow-up or boundedness verdict.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

from . import constants as consts
from . import harness, model
from .domain import DomainSpec, write_snapshot
from .linsolve import LinearSolverError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_VERDICT = 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _build_parser():
    p = _Parser(prog="hapto-sim", description=__doc__,
                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    pc = sub.add_parser("constants", help="print the closed-form threshold table")
    pc.add_argument("--m", type=float, required=True)
    pc.add_argument("--chi", type=float, required=True)
    pc.add_argument("--xi", type=float, required=True)
    pc.add_argument("--eta", type=float, required=True)
    pc.add_argument("--lx", type=float, required=True)
    pc.add_argument("--ly", type=float, required=True)
    pc.add_argument("--eps", type=float, default=None,
                    help="also evaluate the free-energy upper bound at this eps")
    pc.add_argument("--k-cap", type=float, default=1.0,
                    help="K = max(1, sup w0) entering the blow-up bound")
    pc.add_argument("--csv", action="store_true", help="emit CSV instead of text")

    for name in ("run", "compare", "sweep", "gen-init"):
        ps = sub.add_parser(name)
        ps.add_argument("config")
        ps.add_argument("--out", default=None)
        ps.add_argument("--quiet", action="store_true")
    return p


def _constants_rows(args):
    domain = DomainSpec(args.lx, args.ly)
    rows = [("m", args.m), ("chi", args.chi), ("xi", args.xi), ("eta", args.eta),
            ("diam", domain.diam), ("area", domain.area),
            ("lambda1", consts.lambda1(domain)),
            ("critical_mass", 4.0 * math.pi / args.chi if args.chi > 0 else math.inf)]
    v_inf = consts.v_lower_bound(args.m, domain.diam)
    rows.append(("v_inf_m", v_inf))
    rows.append(("eta_below_v_inf_m", float(args.eta < v_inf)))
    delta = consts.delta_time(args.m, args.eta, domain.diam) if args.eta < v_inf else math.inf
    rows.append(("delta", delta))
    try:
        rows.append(("blowup_lower_bound",
                     consts.blowup_lower_bound(args.m, args.chi, args.xi, args.eta,
                                               args.k_cap, domain.diam)))
        rows.append(("blowup_lower_bound_per_mass",
                     consts.blowup_lower_bound(args.m, args.chi, args.xi, args.eta,
                                               args.k_cap, domain.diam, per_mass=True)))
    except consts.BlowupForced:
        rows.append(("blowup_lower_bound", math.inf))
        rows.append(("blowup_lower_bound_per_mass", math.inf))
    except ValueError:
        pass  # subcritical or eta >= v_inf_m: bound not defined
    if args.eps is not None:
        fb = consts.free_energy_upper_bound(args.eps, args.m, args.chi, domain, (0.0, 0.0))
        rows += [("fks_upper_bound", fb.value), ("fks_bound_slope", fb.slope),
                 ("fks_bound_r_eps", fb.r_eps)]
    return rows


def _cmd_constants(args):
    rows = _constants_rows(args)
    if args.csv:
        print("name,value")
        for name, value in rows:
            print(f"{name},{value:.17g}")
    else:
        width = max(len(n) for n, _ in rows)
        for name, value in rows:
            print(f"{name:<{width}}  {value:.17g}")
    return EXIT_OK


def _cmd_gen_init(args):
    scenario = harness.load_scenario(args.config)
    out = args.out or scenario.output_dir
    os.makedirs(out, exist_ok=True)
    state, _ = harness.build_initial(scenario)
    for name, field in (("u", state.u), ("v", state.v), ("w", state.w)):
        write_snapshot(os.path.join(out, f"{name}_init.hsim"), field, 0.0)
    if not args.quiet:
        print(f"wrote u/v/w initial snapshots to {out}")
    return EXIT_OK


def _cmd_run(args):
    scenario = harness.load_scenario(args.config)
    result = harness.run_scenario(scenario, out_dir=args.out, quiet=args.quiet)
    return EXIT_OK if result.expect_ok else EXIT_VERDICT


def _cmd_compare(args):
    scenario = harness.load_scenario(args.config)
    report = harness.compare_runner(scenario, out_dir=args.out, quiet=args.quiet)
    return EXIT_OK if report.status == "completed" else EXIT_SOLVER


def _cmd_sweep(args):
    scenario = harness.load_scenario(args.config)
    harness.sweep(scenario, out_dir=args.out, quiet=args.quiet)
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    handlers = {
        "constants": _cmd_constants,
        "gen-init": _cmd_gen_init,
        "run": _cmd_run,
        "compare": _cmd_compare,
        "sweep": _cmd_sweep,
    }
    try:
        return handlers[args.command](args)
    except harness.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (LinearSolverError, model.CFLError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
