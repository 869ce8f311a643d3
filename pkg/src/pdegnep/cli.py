"""Command-line entry point: ``pdegnep solve | poa | check``."""

import argparse
import sys
from pathlib import Path

from .exceptions import SolverError
from .io import ArtifactError, read_run, write_run
from .path import PathConfig, run_path
from .problem import COOP, GNEP, DEFAULT_YD, DiscreteGame, GameConfig
from .state import BOUNDARY, DISTRIBUTED

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_SOLVER = 2
EXIT_IO = 3


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; 2 is reserved for solver failures here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser():
    p = _Parser(prog="pdegnep", description="PDE-constrained Nash games by penalty path-following.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="run the path-following solver")
    s.add_argument("--problem", choices=(DISTRIBUTED, BOUNDARY), default=DISTRIBUTED)
    s.add_argument("--mode", choices=(GNEP, COOP), default=GNEP)
    s.add_argument("--mesh-n", type=int, default=128)
    s.add_argument("--alpha", type=float, default=1e-5)
    s.add_argument("--a", type=float, default=-32.0, help="lower control bound")
    s.add_argument("--b", type=float, default=32.0, help="upper control bound")
    s.add_argument("--psi-lower", type=float, default=0.0)
    s.add_argument("--psi-upper", type=float, default=0.3)
    s.add_argument("--yd", type=float, nargs="+", default=list(DEFAULT_YD),
                   help="desired state per quadrant (4 values)")
    s.add_argument("--gamma0", type=float, default=1.0)
    s.add_argument("--c-path", type=float, default=1e-5)
    s.add_argument("--eps", type=float, default=10.0)
    s.add_argument("--gamma-max", type=float, default=1e8)
    s.add_argument("--beta-tol", type=float, default=1e-15)
    s.add_argument("--wall-time", action="store_true",
                   help="record measured wall times in history.csv (breaks byte-identical reruns)")
    s.add_argument("--quiet", action="store_true")
    s.add_argument("--out", required=True, help="output directory")

    q = sub.add_parser("poa", help="price of anarchy of a Nash run over a cooperative run")
    q.add_argument("nash_dir")
    q.add_argument("coop_dir")

    c = sub.add_parser("check", help="run the invariant test suites")
    c.add_argument("pytest_args", nargs="*")
    return p


def resolve(args):
    """Turn parsed ``solve`` arguments into ``(GameConfig, PathConfig, n)``."""
    if len(args.yd) != 4:
        raise ValueError(f"--yd needs 4 values, got {len(args.yd)}")
    if args.mesh_n < 2 or args.mesh_n % 2:
        raise ValueError("--mesh-n must be an even integer >= 2")
    game = GameConfig(kind=args.problem, mode=args.mode, alpha=args.alpha, lower=args.a,
                      upper=args.b, yd=tuple(args.yd), psi_lower=args.psi_lower,
                      psi_upper=args.psi_upper)
    path = PathConfig(gamma0=args.gamma0, c_path=args.c_path, eps=args.eps,
                      gamma_max=args.gamma_max, beta_tol=args.beta_tol)
    return game, path, args.mesh_n


def cmd_solve(args, parser):
    try:
        gcfg, pcfg, n = resolve(args)
    except ValueError as exc:
        parser.error(str(exc))
    game = DiscreteGame.build(gcfg, n)
    echo = {"game": gcfg.to_dict(), "mesh_n": n, "out": str(args.out)}
    if not args.quiet:
        print(f"config: {echo}")

    def report(rec):
        if not args.quiet:
            print(f"k={rec.k} gamma={rec.gamma:.6g} beta={rec.beta:.3e} "
                  f"J={rec.sum_objectives:.10g} newton={rec.newton.iterations}")

    try:
        state, history = run_path(game, pcfg, on_step=report)
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    try:
        manifest = write_run(args.out, game, pcfg, state, history, real_time=args.wall_time)
    except ArtifactError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_IO
    print(f"stop: {manifest['stop_reason']} after {manifest['steps']} steps, "
          f"sum of objectives {manifest['sum_objectives']:.10g}")
    return EXIT_OK


def cmd_poa(args, parser):
    try:
        nash, _ = read_run(args.nash_dir)
        coop, _ = read_run(args.coop_dir)
    except (ArtifactError, KeyError) as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_IO
    for key in ("problem", "mesh_n"):
        if nash[key] != coop[key]:
            parser.error(f"runs differ in {key}: {nash[key]!r} vs {coop[key]!r}")
    den = coop["sum_objectives"]
    if not den > 0:
        print(f"cooperative objective must be positive, got {den!r}", file=sys.stderr)
        return EXIT_SOLVER
    poa = nash["sum_objectives"] / den
    print(repr(float(poa)))
    return EXIT_OK


def cmd_check(args, parser):
    import pytest

    tests = Path(__file__).resolve().parents[2] / "tests"
    target = [str(tests)] if tests.is_dir() else ["--pyargs", "pdegnep"]
    code = pytest.main(target + ["-q", "-m", "not slow"] + list(args.pytest_args))
    return EXIT_OK if code == 0 else EXIT_SOLVER


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = {"solve": cmd_solve, "poa": cmd_poa, "check": cmd_check}[args.command]
    return handler(args, parser)


if __name__ == "__main__":
    sys.exit(main())
