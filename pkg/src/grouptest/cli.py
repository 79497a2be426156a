"""Command-line interface: ``grouptest {bounds,simulate,evaluate,check,replay}``.

Exit codes: 0 success, 1 computational refusal (enumeration cap, degenerate
prior), 2 usage or parse error.  Every command writes a JSON run manifest.
Element indices in ``check`` witnesses are printed 1-based.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from pathlib import Path

from . import __version__
from .bounds import DEFAULT_GRID, DEFAULT_TOL, table1, table1_csv
from .codes import disjunctive_violation, read_code, threshold_violation
from .ensemble import GENERATOR_ID, RULES, save_report, table2_csv, table2_experiment
from .evaluation import (
    binomial_prior,
    disjunctive_errors,
    monte_carlo_errors,
    read_prior,
    threshold_errors,
    uniform_prior,
)
from .exceptions import (
    CodeFormatError,
    DegeneratePriorError,
    EnumerationCapError,
    GroupTestingError,
)

EXIT_OK, EXIT_REFUSED, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def parse_int_list(text: str) -> list[int]:
    """Parse ``"2..8"``, ``"5,8,10"`` or mixtures like ``"1..3,7"`` (ranges inclusive)."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if ".." in part:
                a, b = part.split("..", 1)
                a, b = int(a), int(b)
                if b < a:
                    raise ValueError
                out.extend(range(a, b + 1))
            else:
                out.append(int(part))
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid integer list {text!r}") from None
    return out


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _default_threads() -> int:
    env = os.environ.get("GT_THREADS")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        return 1


# -- output helpers --------------------------------------------------------------


def _csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _as_text_table(csv_text: str) -> str:
    """Render CSV as an aligned plain-text table with the same cell strings."""
    rows = list(csv.reader(io.StringIO(csv_text)))
    if not rows:
        return ""
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = ["  ".join(cell.rjust(w) for cell, w in zip(r, widths)) for r in rows]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def _emit(args, csv_text: str) -> None:
    text = csv_text if args.format == "csv" else _as_text_table(csv_text)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _write_manifest(args, argv: list[str], started: float, extra: dict | None = None) -> None:
    params = {k: v for k, v in vars(args).items() if k != "func"}
    manifest = {
        "command": args.command,
        "argv": argv,
        "params": params,
        "seed": params.get("seed"),
        "generator": GENERATOR_ID,
        "version": __version__,
        "runtime_seconds": round(time.perf_counter() - started, 6),
    }
    if extra:
        manifest.update(extra)
    text = json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n"
    target = args.manifest
    if target is None and getattr(args, "out_dir", None):
        target = os.path.join(args.out_dir, "manifest.json")
    if target is None and args.output:
        target = args.output + ".manifest.json"
    if target is None:
        sys.stderr.write(text)
    else:
        Path(target).parent.mkdir(parents=True, exist_ok=True)
        Path(target).write_text(text, encoding="utf-8")


# -- commands ----------------------------------------------------------------------


def cmd_bounds(args) -> dict:
    if any(s < 1 for s in args.s_list):
        raise UsageError("s values must be >= 1")
    rows = table1(args.s_list, grid=args.grid, tol=args.tol)
    _emit(args, table1_csv(rows))
    return {}


def _load_prior(args, t: int, s: int):
    if args.prior == "binomial":
        return binomial_prior(t, s)
    if args.prior == "uniform":
        return uniform_prior(t)
    if not args.prior_file:
        raise UsageError("--prior file requires --prior-file PATH")
    return read_prior(args.prior_file, t)


def cmd_simulate(args) -> dict:
    rules = RULES if args.rule == "both" else (args.rule,)
    prior = None
    if args.prior == "uniform":
        prior = uniform_prior(args.t)
    weights = None
    if args.weights is not None:
        chosen = args.weights
        weights = lambda N: [w for w in chosen if 1 <= w < N]
    rows, reports = table2_experiment(
        args.s, args.t, args.N_list, trials=args.trials, seed=args.seed, rules=rules,
        weights=weights, prior=prior, threads=args.threads, mc_samples=args.mc_samples,
    )
    text = table2_csv(rows)
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for (N, rule), rep in reports.items():
            save_report(rep, out, f"best_N{N}_{rule}", args.s)
        (out / "results.csv").write_text(text, encoding="utf-8")
    _emit(args, text)
    return {}


def cmd_evaluate(args) -> dict:
    code = read_code(args.code)
    prior = _load_prior(args, code.size, args.s)
    if args.rule == "threshold" and args.T is None:
        raise UsageError("--rule threshold requires --T")
    if args.mc_samples:
        e = monte_carlo_errors(code, args.s, prior, args.mc_samples, args.seed,
                               rule=args.rule, T=args.T)
    elif args.rule == "threshold":
        e = threshold_errors(code, args.s, args.T, prior)
    else:
        e = disjunctive_errors(code, args.s, prior)
    header = ["rule", "N", "t", "s", "T", "prior", "alpha", "beta", "max_error", "alpha_se", "beta_se"]
    row = [
        args.rule, code.length, code.size, args.s, "" if args.T is None else args.T, args.prior,
        repr(e.alpha), repr(e.beta), repr(e.max_error),
        "" if e.alpha_se is None else repr(e.alpha_se),
        "" if e.beta_se is None else repr(e.beta_se),
    ]
    _emit(args, _csv_text(header, [row]))
    return {}


def _fmt_set(subset) -> str:
    return "{" + ",".join(str(j + 1) for j in subset) + "}"


def cmd_check(args) -> dict:
    code = read_code(args.code)
    rows = []
    v = disjunctive_violation(code, args.s)
    witness = "" if v is None else f"S={_fmt_set(v[0])} covers j={v[1] + 1}"
    rows.append(["disjunctive", args.s, "", str(v is None).lower(), witness])
    if args.T is not None:
        v = threshold_violation(code, args.s, args.T)
        witness = "" if v is None else f"S={_fmt_set(v[0])} weight={v[1]}"
        rows.append(["threshold", args.s, args.T, str(v is None).lower(), witness])
    _emit(args, _csv_text(["predicate", "s", "T", "holds", "witness"], rows))
    return {}


def cmd_replay(args) -> dict:
    with open(args.manifest_file, encoding="utf-8") as fh:
        manifest = json.load(fh)
    argv = list(manifest["argv"])
    for flag in ("--output", "--manifest", "--out-dir"):
        while flag in argv:
            i = argv.index(flag)
            del argv[i : i + 2]
    if args.output:
        argv += ["--output", args.output]
    if args.manifest:
        argv += ["--manifest", args.manifest]
    code = main(argv)
    if code != EXIT_OK:
        raise SystemExit(code)
    return {"replayed_from": str(args.manifest_file)}


# -- parser ----------------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=("csv", "text"), default="csv")
    p.add_argument("--output", help="write the result table here instead of stdout")
    p.add_argument("--manifest", help="run-manifest path (default: next to the output, else stderr)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="grouptest", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bounds", help="threshold/disjunctive exponent bounds table")
    p.add_argument("--s-list", type=parse_int_list, default=parse_int_list("2..8"))
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--grid", type=_positive_int, default=DEFAULT_GRID)
    _add_common(p)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("simulate", help="best-of-R constant-weight code search")
    p.add_argument("--s", type=_positive_int, required=True)
    p.add_argument("--t", type=_positive_int, required=True)
    p.add_argument("--N-list", dest="N_list", type=parse_int_list, required=True)
    p.add_argument("--trials", type=_positive_int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--weights", type=parse_int_list, default=None,
                   help="candidate weights (default 1..N-1 for each N)")
    p.add_argument("--rule", choices=RULES + ("both",), default="both")
    p.add_argument("--prior", choices=("binomial", "uniform"), default="binomial")
    p.add_argument("--mc-samples", type=_positive_int, default=None)
    p.add_argument("--threads", type=_positive_int, default=_default_threads())
    p.add_argument("--out-dir", help="persist best codes, sidecars, results.csv and manifest")
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evaluate", help="error probabilities of a code")
    p.add_argument("--code", required=True)
    p.add_argument("--s", type=_positive_int, required=True)
    p.add_argument("--T", type=_positive_int, default=None)
    p.add_argument("--rule", choices=RULES, default="threshold")
    p.add_argument("--prior", choices=("binomial", "uniform", "file"), default="binomial")
    p.add_argument("--prior-file")
    p.add_argument("--mc-samples", type=_positive_int, default=None,
                   help="estimate by sampling instead of exact enumeration")
    p.add_argument("--seed", type=int, default=0)
    _add_common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("check", help="disjunctive / threshold code predicates")
    p.add_argument("--code", required=True)
    p.add_argument("--s", type=_positive_int, required=True)
    p.add_argument("--T", type=_positive_int, default=None)
    _add_common(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    p.add_argument("manifest_file")
    p.add_argument("--output")
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_replay, format="csv")
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    started = time.perf_counter()
    try:
        extra = args.func(args)
    except UsageError as exc:
        print(f"grouptest: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (EnumerationCapError, DegeneratePriorError) as exc:
        print(f"grouptest: refused: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    except (CodeFormatError, OSError) as exc:
        print(f"grouptest: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except GroupTestingError as exc:
        print(f"grouptest: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.command != "replay":
        _write_manifest(args, argv, started, extra)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
