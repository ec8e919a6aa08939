"""
Command-line entry point.

Exit codes: 0 when every requested check passes (violations that only involve
estimated constants count as warnings), 1 when an inequality or selftest
fixture fails, 2 on any named error. Errors print one stderr line
`error=<ClassName> message=<text>`.
"""
from __future__ import annotations
import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from neumannlab.config import settings
from neumannlab.errors import NeumannLabError, ReportIoError
from neumannlab.fem.mesh import mesh_unit_disc
from neumannlab.fem.neumann_fem import NeumannProblem
from neumannlab.functionals.disc_functionals import pair_functionals
from neumannlab.functionals.quadrature import build_rule
from neumannlab.geometry import quasidisc as qd
from neumannlab.harness.experiment_config import parse_config, parse_map_token
from neumannlab.harness.report import emit_report
from neumannlab.harness.selftest import run_selftest
from neumannlab.maps.conformal_maps import check_univalent
from neumannlab.stability.experiment import run_experiment

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_ERROR = 2

FIXTURES = {
    "circle": lambda: qd.circle_curve(256),
    "ellipse": lambda: qd.ellipse_curve(256, 2.0, 1.0),
    "koch": lambda: qd.koch_snowflake(3),
}


def _setup_logging() -> None:
    logging.basicConfig(
        level=getattr(logging, settings.log_level, logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def _error_line(kind: str, message: str) -> None:
    print(f"error={kind} message={' '.join(message.split())}", file=sys.stderr)


def cmd_run(args: argparse.Namespace) -> int:
    worst = EXIT_OK
    for path in args.config:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise ReportIoError(f"cannot read config {path}: {e}") from e
        config = parse_config(text)
        out_dir = args.output_dir or settings.output_dir or config.output_dir
        report = run_experiment(config)
        emit_report(report, out_dir)
        for pair in report.pairs:
            for err in pair.errors:
                _error_line(err["type"], f"{pair.pair}: {err['message']}")
        print(f"config={path} pairs={len(report.pairs)} warnings={report.warning_count} "
              f"failed={int(report.failed)} errors={int(report.errored)} output={out_dir}")
        if report.errored:
            worst = max(worst, EXIT_ERROR)
        elif report.failed:
            worst = max(worst, EXIT_FAILED)
    return worst


def cmd_eigs(args: argparse.Namespace) -> int:
    cmap = parse_map_token(args.map, "--map")
    check_univalent(cmap)
    sol = NeumannProblem(mesh_unit_disc(args.refinement), cmap).solve(args.k)
    print(f"map={cmap.label} refinement={args.refinement} method={sol.method}")
    for n, lam in enumerate(sol.eigenvalues, start=1):
        print(f"lambda_{n}={float(lam)!r}")
    return EXIT_OK


def cmd_functionals(args: argparse.Namespace) -> int:
    map1 = parse_map_token(args.pair[0], "--pair[0]")
    map2 = parse_map_token(args.pair[1], "--pair[1]")
    for m in (map1, map2):
        check_univalent(m)
    pf = pair_functionals(map1, map2, args.alpha, build_rule(args.level))
    print(f"pair={map1.label}|{map2.label} level={args.level}")
    for key, value in pf.to_dict().items():
        print(f"{key}={value!r}")
    return EXIT_OK


def cmd_quasidisc(args: argparse.Namespace) -> int:
    exp = qd.admissible_exponent(args.K)
    print(f"K={args.K!r} sup_p={exp.sup_p!r} chosen_p={exp.chosen_p!r} "
          f"smirnov_dim_bound={qd.smirnov_dim_bound(args.K)!r}")
    if args.K > 1:
        print(f"M_exponent_q={4.0 * (2.0 * args.K ** 2 - 1.0)!r}")
    curve = None
    if args.curve:
        curve = qd.read_curve(args.curve)
    elif args.fixture:
        curve = FIXTURES[args.fixture]()
    if curve is not None:
        est = qd.ahlfors_check(curve, args.samples)
        print(f"ahlfors_constant={est.value!r} samples={est.samples} skipped_pairs={est.skipped_pairs}")
    return EXIT_OK


def cmd_selftest(_args: argparse.Namespace) -> int:
    checks = run_selftest()
    for c in checks:
        print(c.line())
    failed = [c for c in checks if not c.passed]
    print(f"selftest passed={len(checks) - len(failed)} failed={len(failed)}")
    return EXIT_FAILED if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="neumannlab", description="Neumann eigenvalue stability lab.")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run experiment configs and write report files.")
    run.add_argument("config", nargs="+", help="YAML experiment config(s).")
    run.add_argument("--output-dir", type=str, default="", help="Overrides NEUMANNLAB_OUTPUT_DIR and the config.")
    run.set_defaults(func=cmd_run)

    eigs = sub.add_parser("eigs", help="Solve one weight and print its spectrum.")
    eigs.add_argument("--map", type=str, default="identity", help="Map token, e.g. moebius:0.4.")
    eigs.add_argument("--refinement", type=int, default=64, help="Number of mesh rings.")
    eigs.add_argument("--k", type=int, default=6, help="Number of eigenvalues.")
    eigs.set_defaults(func=cmd_eigs)

    fun = sub.add_parser("functionals", help="Print every pair functional.")
    fun.add_argument("--pair", nargs=2, metavar="MAP", required=True, help="Two map tokens.")
    fun.add_argument("--alpha", type=float, default=4.0, help="Exponent alpha = p > 2.")
    fun.add_argument("--level", type=int, default=16, help="Quadrature level.")
    fun.set_defaults(func=cmd_functionals)

    quasi = sub.add_parser("quasidisc", help="Exponents for K-quasidiscs and the Ahlfors check.")
    quasi.add_argument("--K", type=float, required=True, help="Quasiconformality constant K >= 1.")
    src = quasi.add_mutually_exclusive_group()
    src.add_argument("--curve", type=str, default="", help="Plain-text 'x y' point list.")
    src.add_argument("--fixture", choices=sorted(FIXTURES), help="Built-in curve.")
    quasi.add_argument("--samples", type=int, default=256, help="Arc-length samples (>= 32).")
    quasi.set_defaults(func=cmd_quasidisc)

    st = sub.add_parser("selftest", help="Run the closed-form fixture suite.")
    st.set_defaults(func=cmd_selftest)
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging()
    try:
        return args.func(args)
    except NeumannLabError as e:
        logger.error("%s failed: %r", args.command, e)
        _error_line(type(e).__name__, str(e))
        return EXIT_ERROR
    except ValueError as e:
        logger.error("%s rejected its arguments: %r", args.command, e)
        _error_line("ValueError", str(e))
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
