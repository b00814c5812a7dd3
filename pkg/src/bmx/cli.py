"""Command-line entry points: `bmx bvp` and `bmx abcdx`.

Exit codes: 0 on success, 2 on configuration errors, 3 on oracle
protocol failures.
"""

from __future__ import annotations

import argparse
import shlex
import sys

from .cross import MatrixAccessor
from .errors import BadGramFile, OracleError, ProtocolError, SpawnFailure
from .experiments import BvpConfig, build_bvp_matrix, emit_report, run_abcdx, run_comparison

EXIT_CONFIG = 2
EXIT_ORACLE = 3


def _parse_ranks(text: str) -> list[int]:
    if ".." in text:
        lo, hi = text.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(tok) for tok in text.split(",") if tok]


def _add_bvp_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--space", choices=("l2", "h10"), default="l2")
    p.add_argument("--m", type=int, default=100)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--k", type=int, default=75, help="series truncation length")
    p.add_argument("--alpha-max", type=float, default=2.0)
    p.add_argument("--beta-max", type=float, default=2.0)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bmx", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    bvp = sub.add_parser("bvp", help="four-algorithm comparison on the model problem")
    _add_bvp_options(bvp)
    bvp.add_argument("--ranks", type=_parse_ranks, default=list(range(1, 41)),
                     help="target ranks, e.g. 1..40 or 1,5,10")
    bvp.add_argument("--seeds", type=int, default=50)
    bvp.add_argument("--seed-base", type=int, default=0)
    bvp.add_argument("--n-rook", type=int, default=1)
    bvp.add_argument("--out", required=True)
    bvp.add_argument("--plot", default=None, help="also render a PNG figure to this path")

    ax = sub.add_parser("abcdx", help="alternating selection/cross rounds on any accessor")
    ax.add_argument("--oracle", default=None,
                    help="command line of an external entry oracle, e.g. 'python3 pde_oracle.py --n 31'")
    _add_bvp_options(ax)
    ax.add_argument("--n-abcd", type=int, required=True)
    ax.add_argument("-r", type=int, required=True, dest="r")
    ax.add_argument("--n-rook", type=int, default=1)
    ax.add_argument("--seeds", type=int, default=50)
    ax.add_argument("--seed-base", type=int, default=0)
    ax.add_argument("--stop-rtol", type=float, default=None)
    ax.add_argument("--reference-full", action="store_true",
                    help="fetch the whole matrix once for error evaluation")
    ax.add_argument("--out", required=True)
    ax.add_argument("--plot", default=None)
    return parser


def _cmd_bvp(args) -> int:
    cfg = BvpConfig(alpha_max=args.alpha_max, beta_max=args.beta_max,
                    m=args.m, n=args.n, K=args.k, space=args.space)
    try:
        cfg.validate()
        if not args.ranks or args.seeds < 1 or args.n_rook < 0:
            raise ValueError("ranks, seeds and n_rook must be positive")
    except ValueError as exc:
        print(f"bmx: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report = run_comparison(cfg, args.ranks, args.seeds, args.n_rook, seed_base=args.seed_base)
    emit_report(report, args.out)
    if args.plot:
        from .plotting import render_report

        render_report(report, args.plot)
    return 0


def _cmd_abcdx(args) -> int:
    try:
        if args.n_abcd < 1 or args.r < 1 or args.seeds < 1 or args.n_rook < 0:
            raise ValueError("n_abcd, r and seeds must be >= 1, n_rook >= 0")
    except ValueError as exc:
        print(f"bmx: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    acc = None
    try:
        if args.oracle:
            from .oracle import oracle_handshake

            acc, _hello = oracle_handshake(shlex.split(args.oracle))
        else:
            cfg = BvpConfig(alpha_max=args.alpha_max, beta_max=args.beta_max,
                            m=args.m, n=args.n, K=args.k, space=args.space)
            cfg.validate()
            acc = MatrixAccessor.from_matrix(build_bvp_matrix(cfg))
        reference = None
        if args.reference_full:
            reference = acc.full()
        elif not acc.is_oracle:
            reference = acc.full()  # dense mode: the matrix itself, no extra cost
        report = run_abcdx(acc, args.n_abcd, args.r, args.n_rook, args.seeds,
                           seed_base=args.seed_base, reference=reference,
                           stop_rtol=args.stop_rtol)
        emit_report(report, args.out)
        if args.plot:
            from .plotting import render_report

            render_report(report, args.plot)
        return 0
    except ValueError as exc:
        print(f"bmx: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SpawnFailure, ProtocolError, OracleError, BadGramFile) as exc:
        print(f"bmx: oracle error: {exc}", file=sys.stderr)
        return EXIT_ORACLE
    finally:
        if acc is not None:
            acc.close()


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "bvp":
        return _cmd_bvp(args)
    return _cmd_abcdx(args)


if __name__ == "__main__":
    sys.exit(main())
