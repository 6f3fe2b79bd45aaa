"""Command-line interface.

Exit codes: 0 ok, 2 bad input, 3 design violation, 4 not a group,
5 enumeration infeasible. Results go to stdout, diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from importlib import resources
from pathlib import Path

from . import engine, groups, ltt, powersim, schemes
from .exceptions import DesignViolationError, EnumerationError, GroupStructureError
from .statistics import STATISTIC_NAMES, StatisticSpec

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_DESIGN = 3
EXIT_GROUP = 4
EXIT_INFEASIBLE = 5

SCHEME_NAMES = ["forced-balance", "bernoulli", "bernoulli-nc", "ltt", "covariate-uniform", "covariate-sequential"]


class InputError(ValueError):
    pass


def read_data(path) -> tuple[list[str], list[int], list[float]]:
    """Parse an ``id,w,y`` CSV file."""
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["id", "w", "y"]:
                raise InputError(f"{path}: header must be 'id,w,y'")
            ids, w, y = [], [], []
            for lineno, row in enumerate(reader, start=2):
                try:
                    wi = int(row["w"])
                    yi = float(row["y"])
                except (TypeError, ValueError):
                    raise InputError(f"{path}:{lineno}: cannot parse row {row}") from None
                if wi not in (0, 1):
                    raise InputError(f"{path}:{lineno}: w must be 0 or 1")
                if not math.isfinite(yi):
                    raise InputError(f"{path}:{lineno}: y must be finite")
                ids.append(row["id"].strip())
                w.append(wi)
                y.append(yi)
    except OSError as exc:
        raise InputError(str(exc)) from None
    if not ids:
        raise InputError(f"{path}: no data rows")
    if len(set(ids)) != len(ids):
        raise InputError(f"{path}: ids must be unique")
    return ids, w, y


def _load_scheme(args, n: int) -> schemes.RandomizationScheme:
    if args.scheme_file:
        return schemes.RandomizationScheme.from_json(Path(args.scheme_file).read_text())
    return schemes.scheme_from_name(args.scheme, n, args.stratum)


def cmd_test(args) -> int:
    _, w, y = read_data(args.data)
    scheme = _load_scheme(args, len(w))
    stat = StatisticSpec(args.stat, args.sided)
    report = engine.randomization_test(scheme, w, y, stat, args.alpha)
    print(report.to_json(indent=2))
    return EXIT_OK


def cmd_group_check(args) -> int:
    if args.file:
        group = groups.TransformationGroup.from_dict(json.loads(Path(args.file).read_text()))
    elif args.spec:
        group = groups.group_from_name(args.spec)
    else:
        raise InputError("give a group spec (e.g. sign-flips:3) or --file")
    report = groups.check_group(group)
    out = report.to_dict()
    out["label"] = group.label
    out["size"] = len(group)
    print(json.dumps(out, indent=2))
    return EXIT_OK if report.is_group else EXIT_GROUP


def cmd_scheme_info(args) -> int:
    scheme = schemes.scheme_from_name(args.name, args.n, args.stratum)
    info = {"label": scheme.label, "n": scheme.n, "uniform": scheme.is_uniform}
    info.update(powersim.resolution_report(scheme).to_dict())
    print(json.dumps(info, indent=2))
    if args.dump:
        Path(args.dump).write_text(scheme.to_json(indent=2) + "\n")
    return EXIT_OK


def cmd_ltt(args) -> int:
    truth = schemes.as_pattern(args.truth)
    if truth.size != 2 * args.m:
        raise InputError(f"--truth has {truth.size} cups, expected 2m = {2 * args.m}")
    run = ltt.ltt_run_free_guess if args.free_guess else ltt.ltt_run
    report = run(args.truth, args.guess, args.alpha)
    outcome = ltt.ltt_outcome(args.truth, args.guess)
    out = {
        "level_table": {
            f">={j}": {"num": f.numerator, "den": f.denominator, "value": float(f)}
            for j, f in outcome.level_table.items()
        },
        "correct_milk_first": outcome.correct_milk_first,
        "report": report.to_dict(),
    }
    print(json.dumps(out, indent=2))
    return EXIT_OK


def _config_path(name: str):
    path = Path(name)
    if path.exists() or name != "paper.toml":
        return path
    return resources.files("randtest") / "data" / "paper.toml"


def cmd_power(args) -> int:
    overrides = {
        "seed": args.seed,
        "replications": args.reps,
        "n": args.n,
        "effect": args.effect,
        "scheme_a": args.scheme_a,
        "scheme_b": args.scheme_b,
    }
    if args.config:
        config = powersim.SimConfig.from_file(_config_path(args.config), **overrides)
    else:
        config = powersim.SimConfig.from_dict({}, **overrides)
    table = powersim.simulate(config, workers=args.workers)
    text = table.to_csv() if args.format == "csv" else table.to_json(indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="randtest", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("test", help="exact randomization test on an id,w,y CSV file")
    p.add_argument("--data", required=True)
    p.add_argument("--scheme", choices=SCHEME_NAMES, default="forced-balance")
    p.add_argument("--scheme-file", help="JSON scheme (overrides --scheme)")
    p.add_argument("--stratum", help="0/1 string marking stratum A for covariate schemes")
    p.add_argument("--stat", choices=sorted(STATISTIC_NAMES), default="centered-diff")
    p.add_argument("--sided", choices=["upper", "two-sided"], default="upper")
    p.add_argument("--alpha", default="0.05")
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("group-check", help="check the group axioms on a transformation set")
    p.add_argument("spec", nargs="?", help="perms:N, sign-flips:N or balanced-perms:A,B")
    p.add_argument("--file", help="JSON file with an 'elements' list")
    p.set_defaults(func=cmd_group_check)

    p = sub.add_parser("scheme-info", help="size and p-value resolution of a scheme")
    p.add_argument("--name", choices=SCHEME_NAMES, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--stratum")
    p.add_argument("--dump", help="write the scheme as JSON to this path")
    p.set_defaults(func=cmd_scheme_info)

    p = sub.add_parser("ltt", help="tea-tasting test")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--guess", required=True)
    p.add_argument("--alpha", default="0.05")
    p.add_argument("--free-guess", action="store_true", help="guess may mark any number of cups")
    p.set_defaults(func=cmd_ltt)

    p = sub.add_parser("power", help="Monte Carlo size/power study")
    p.add_argument("--config", help="TOML or JSON config; 'paper.toml' falls back to the bundled copy")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--reps", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--effect", type=float)
    p.add_argument("--scheme-a", choices=SCHEME_NAMES)
    p.add_argument("--scheme-b", choices=SCHEME_NAMES)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_power)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DesignViolationError as exc:
        print(f"design violation: {exc}", file=sys.stderr)
        return EXIT_DESIGN
    except GroupStructureError as exc:
        print(f"group violation: {exc}", file=sys.stderr)
        return EXIT_GROUP
    except EnumerationError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
