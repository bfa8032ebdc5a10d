"""Command-line interface.

Subcommands: run, stationary, verify {energy,eps-rate,limits,complementarity},
convergence. Exit codes: 0 success, 1 runtime failure, 2 usage error,
3 verification FAIL.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from ..assembly import assemble_load
from ..solver import NewtonError, SaddleSolveError, h1_gram, solve_stationary_vi
from ..timestepper import Simulation, StepFailure, build_spaces
from .config import ConfigError, load_config
from .outputs import check_writable, write_outputs
from . import verify as verify_mod

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2
EXIT_VERIFY_FAIL = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fricflow",
        description="Two-domain incompressible flow with a friction-type slip interface.",
    )
    parser.add_argument("--quiet", action="store_true", help="suppress informational output")
    sub = parser.add_subparsers(dest="command")

    def add_common(p):
        p.add_argument("config", help="path to the run configuration file")
        p.add_argument("--out", help="override the output directory")
        p.add_argument("--seed", type=int, default=0, help="seed for randomized checks")
        p.add_argument("--quiet", action="store_true", help="suppress informational output")

    add_common(sub.add_parser("run", help="time-dependent run with outputs"))
    add_common(sub.add_parser("stationary", help="stationary solve with continuation report"))
    pv = sub.add_parser("verify", help="verification studies (PASS/FAIL)")
    pv.add_argument(
        "study", choices=["energy", "eps-rate", "limits", "complementarity"],
        help="which study to run",
    )
    add_common(pv)
    add_common(sub.add_parser("convergence", help="manufactured-solution mesh study"))
    return parser


def _emit(lines, quiet: bool) -> None:
    for line in lines:
        if quiet and line.startswith("INFO"):
            continue
        print(line)


def cli(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE

    try:
        loaded = load_config(args.config)
    except FileNotFoundError:
        print(f"error: config file not found: {args.config}", file=sys.stderr)
        return EXIT_RUNTIME
    except ConfigError as exc:
        print("error: invalid configuration:", file=sys.stderr)
        for issue in exc.issues:
            print(f"  {issue}", file=sys.stderr)
        return EXIT_RUNTIME

    cfg, thresholds = loaded.run, loaded.verify
    if getattr(args, "out", None):
        cfg.output_dir = args.out
    quiet = args.quiet

    try:
        if args.command == "run":
            out_dir = cfg.output_dir or "out"
            check_writable(out_dir)
            sim = Simulation(cfg)
            try:
                traj = sim.run()
            except StepFailure as exc:
                write_outputs(exc.trajectory, out_dir)
                print(f"error: run aborted: {exc} (partial outputs in {out_dir})",
                      file=sys.stderr)
                return EXIT_RUNTIME
            paths = write_outputs(traj, out_dir)
            if not quiet:
                final = traj.rows[-1]
                print(f"run finished: {len(traj.states) - 1} steps to t={final['t']:g}, "
                      f"energy {final['energy']:.6e}")
                print(f"outputs: {', '.join(str(p) for p in paths[:2])} "
                      f"and {len(paths) - 2} snapshots")
            return EXIT_OK

        if args.command == "stationary":
            spaces = build_spaces(cfg.mesh, cfg.quad_order)
            load = assemble_load(spaces.mesh, spaces.vmap, cfg.initial_load, 0.0)
            schedule = [e for e in (1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 3e-4, 1e-4) if e > cfg.eps]
            schedule.append(cfg.eps)
            state, increments = solve_stationary_vi(
                spaces, cfg.friction, load, cfg.nu, schedule, cfg.newton
            )
            gram = h1_gram(spaces.mesh, spaces.vmap)
            h1 = float(np.sqrt(state.u @ (gram @ state.u)))
            if not quiet:
                print("continuation schedule:", " ".join(f"{e:g}" for e in schedule))
                for eps, inc in zip(schedule[1:], increments):
                    print(f"  eps={eps:g}: H1 increment {inc:.6e}")
            print(f"stationary solve finished: H1 norm {h1:.6e}, "
                  f"final eps {cfg.eps:g}, Newton iters {state.newton_iters}")
            if cfg.output_dir or getattr(args, "out", None):
                out_dir = Path(cfg.output_dir or "out")
                check_writable(out_dir)
                report = ["eps,h1_increment"]
                report += [f"{e!r},{i!r}" for e, i in zip(schedule[1:], increments)]
                (out_dir / "stationary_report.csv").write_text("\n".join(report) + "\n")
            return EXIT_OK

        if args.command == "verify":
            study = {
                "energy": verify_mod.verify_energy,
                "eps-rate": verify_mod.verify_eps_rate,
                "complementarity": verify_mod.verify_complementarity,
            }.get(args.study)
            if args.study == "limits":
                result = verify_mod.verify_limits(cfg, thresholds, seed=args.seed)
            else:
                result = study(cfg, thresholds)
            _emit(result.lines, quiet)
            return EXIT_OK if result.passed else EXIT_VERIFY_FAIL

        if args.command == "convergence":
            result = verify_mod.verify_convergence(cfg, thresholds)
            _emit(result.lines, quiet)
            return EXIT_OK if result.passed else EXIT_VERIFY_FAIL

    except (NewtonError, SaddleSolveError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    parser.print_usage(sys.stderr)
    return EXIT_USAGE


def main() -> None:
    sys.exit(cli())


if __name__ == "__main__":
    main()
