"""Command-line front end: ``sigma``, ``count``, ``simulate`` and ``accept``.

Exit status: 0 success, 1 a verdict failed, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .combinatorics import (
    BudgetExceeded,
    ConstraintSetSpec,
    count_distinct_prefix,
    count_exact,
    h_closed,
    sigma_pq,
    sigma_Q,
)
from .config import SEED_ENV, ConfigError, load_config, parse_seed
from .experiment import run_experiment
from .laws import LAWS, get_law
from .output import RunManifest, fmt_float, write_simulation

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
SIGMA_POWERS = range(2, 21)


class UsageError(Exception):
    pass


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _seed(text: str) -> int:
    try:
        return parse_seed(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _emit_table(header: Sequence[str], rows: Sequence[Sequence], fmt: str, out=None) -> None:
    out = out or sys.stdout
    if fmt == "json":
        json.dump([dict(zip(header, r)) for r in rows], out, indent=2)
        out.write("\n")
        return
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt_float(v) if isinstance(v, float) else v for v in r])


def cmd_sigma(args) -> int:
    bad = [p for p in args.powers if p not in SIGMA_POWERS]
    if bad:
        raise UsageError(f"power {bad[0]} out of range: powers must lie in 2..20")
    if args.law is not None:
        m4 = get_law(args.law).fourth_moment
    elif args.fourth_moment is not None:
        m4 = args.fourth_moment
    else:
        raise UsageError("give --fourth-moment or --law")
    if m4 < 1:
        raise UsageError(f"fourth moment {m4:g} is below 1, impossible for a unit-variance law")
    powers = sorted(set(args.powers))
    matrix = [[sigma_pq(p, q, m4) for q in powers] for p in powers]
    sq = None
    if args.poly is not None:
        try:
            sq = sigma_Q(args.poly, m4)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    if args.format == "json":
        doc = {"fourth_moment": m4, "powers": powers, "sigma": matrix}
        if sq is not None:
            doc["polynomial"] = args.poly
            doc["sigma_Q"] = sq
        print(json.dumps(doc, indent=2))
        return EXIT_OK
    rows = [[p] + row for p, row in zip(powers, matrix)]
    _emit_table(["p"] + [str(q) for q in powers], rows, "csv")
    if sq is not None:
        print(f"sigma_Q^2,{fmt_float(sq)}")
    return EXIT_OK


def cmd_count(args) -> int:
    p = args.p if args.p is not None else args.k
    if p is None:
        raise UsageError("give --p (tuple length) or --k (sign split)")
    try:
        spec = ConstraintSetSpec(
            n=args.n, p=p, variant=args.variant, sign_split=args.k,
            exact_sum=args.s, index_bound=args.index_bound,
        )
        count = count_distinct_prefix(spec) if args.distinct else count_exact(spec)
    except BudgetExceeded as exc:
        raise UsageError(str(exc)) from None
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    ratio = h = None
    if args.k is not None and args.variant == "A" and args.s is None and p >= 1:
        ratio = count / args.n ** (p - 1)
        h = h_closed(p, args.k)
    if args.format == "json":
        doc = {"variant": args.variant, "n": args.n, "p": p, "k": args.k, "s": args.s, "count": count}
        if ratio is not None:
            doc.update(ratio=ratio, h=h)
        print(json.dumps(doc))
    elif ratio is not None:
        print(f"{count}, ratio {ratio:.6f}, h={h:g}")
    else:
        print(count)
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None and SEED_ENV not in os.environ:
        cfg = replace(cfg, seed=args.seed)
    if args.threads is not None:
        cfg = replace(cfg, parallel_width=args.threads)
    cfg.validate()
    manifest = RunManifest(
        command="simulate", config=cfg.echo(include_width=False), seed=cfg.seed, threads=cfg.parallel_width
    )
    result = run_experiment(cfg)
    out = Path(args.out) if args.out else Path(f"{cfg.name}_out")
    paths = write_simulation(result, out, manifest)
    failures = [r for r in result.rows if r.failed]
    if not args.quiet:
        if args.format == "json":
            print(json.dumps({"passed": result.passed, "failures": len(failures),
                              "outputs": [str(p) for p in paths]}, indent=2))
        else:
            for r in failures:
                print(f"FAIL n={r.n} {r.statistic}: estimate {fmt_float(r.estimate)} theory {fmt_float(r.theory)}")
            print(f"{'PASS' if result.passed else 'FAIL'}: {len(failures)} failing verdicts; "
                  f"wrote {len(paths)} files to {out}")
    return EXIT_OK if result.passed else EXIT_FAIL


def cmd_accept(args) -> int:
    from .acceptance import Context, DEFAULT_SEED, run_suite, select

    try:
        chosen = select(args.only)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.list:
        for c in chosen:
            budget = f" (budget {c.budget_s:g}s)" if c.budget_s is not None else ""
            print(f"{c.number:2d}  {c.title}{budget}")
        return EXIT_OK
    seed = args.seed
    if SEED_ENV in os.environ:
        seed = parse_seed(os.environ[SEED_ENV])
    ctx = Context(seed=DEFAULT_SEED if seed is None else seed, sigma_offset=args.inject_sigma_offset)
    results = run_suite(ctx, [c.number for c in chosen])
    failed = [r.criterion.number for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria pass" + (f"; failing: {failed}" if failed else ""))
    return EXIT_OK if not failed else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", metavar="DIR", help="output directory (simulate)")
    common.add_argument("--seed", type=_seed, metavar="U64", help=f"seed override (env {SEED_ENV} wins)")
    common.add_argument("--threads", type=int, metavar="N", help="worker threads for replicate chunks")
    common.add_argument("--format", choices=("csv", "json"), default="csv", help="stdout table format")

    parser = argparse.ArgumentParser(
        prog="circulant-clt",
        description="Fluctuations of trace powers of random symmetric circulant matrices.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sigma", parents=[common], help="print the limiting covariance matrix")
    p.add_argument("--powers", type=_int_list, required=True, help="e.g. 2,3,4")
    p.add_argument("--fourth-moment", "--m4", type=float, dest="fourth_moment", help="E X^4 of the input law")
    p.add_argument("--law", choices=sorted(LAWS), help="take E X^4 from a registered law")
    p.add_argument("--poly", type=_float_list, help="coefficients of x^1, x^2, ... for sigma_Q^2")
    p.set_defaults(func=cmd_sigma)

    p = sub.add_parser("count", parents=[common], help="exact size of a signed index set")
    p.add_argument("--variant", choices=("A", "A_tilde"), default="A")
    p.add_argument("--n", type=int, required=True, help="modulus")
    p.add_argument("--p", type=int, help="tuple length (defaults to k)")
    p.add_argument("--k", type=int, help="number of plus signs; omit to count every sign pattern")
    p.add_argument("--s", type=int, help="require the signed sum to equal s*n exactly")
    p.add_argument("--distinct", action="store_true", help="first k entries pairwise distinct")
    p.add_argument("--index-bound", choices=("floor", "trace"), default="floor",
                   help="indices up to floor(n/2) (default) or up to the trace-expansion bound")
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("simulate", parents=[common], help="run a Monte Carlo experiment from a config")
    p.add_argument("config", help="config file, or the name of a bundled config (e.g. quickcheck)")
    p.add_argument("--quiet", action="store_true", help="no stdout summary")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("accept", parents=[common], help="run the acceptance suite")
    p.add_argument("--list", action="store_true", help="list criteria without running them")
    p.add_argument("--only", type=_int_list, help="comma-separated criterion numbers")
    p.add_argument("--inject-sigma-offset", type=float, default=0.0, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_accept)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
