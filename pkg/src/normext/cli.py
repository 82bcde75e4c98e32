"""``normext`` command-line interface.

Exit codes: 0 pass, 2 validation failure, 3 assertion failure, 4 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import acceptance, workflows
from .config import load_config
from .errors import ConfigError, InvalidExtensionError, NormExtError
from .weights import WeightFunction
from .workflows import EXIT_ASSERTION, EXIT_IO, EXIT_OK, EXIT_VALIDATION


def _plain(obj):
    """Recursively convert numpy scalars and non-finite floats for JSON."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def dumps(obj) -> str:
    return json.dumps(_plain(obj), sort_keys=True, indent=2) + "\n"


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(x)) if isinstance(x, float) else x for x in row])
    return buf.getvalue()


def emit(outcome: workflows.Outcome, out_dir: Path | None, name: str) -> int:
    text = dumps(outcome.report)
    if out_dir is not None:
        write_atomic(out_dir / f"{name}.json", text)
        for fname, (header, rows) in outcome.tables.items():
            write_atomic(out_dir / fname, _csv_text(header, rows))
    sys.stdout.write(text)
    return outcome.status


# -- subcommands -----------------------------------------------------------------


def _apply_numerics(cfg, args):
    num = cfg.numerics
    if getattr(args, "oracle_n", None) is not None:
        num["oracle_n"] = args.oracle_n
    if getattr(args, "evolution_step", None) is not None:
        num["evolution_step"] = args.evolution_step
    if getattr(args, "k_min", None) is not None:
        num["k_window"] = [args.k_min, num["k_window"][1]]
    if getattr(args, "k_max", None) is not None:
        num["k_window"] = [num["k_window"][0], args.k_max]
    if getattr(args, "scheme", None) is not None:
        num["scheme"] = args.scheme
    return cfg


def cmd_validate(args):
    return workflows.run_validate(_apply_numerics(load_config(args.config), args)), "validation"


def cmd_check_normality(args):
    return workflows.run_check_normality(_apply_numerics(load_config(args.config), args)), "normality"


def cmd_spectrum(args):
    return workflows.run_spectrum(_apply_numerics(load_config(args.config), args), args.space), "spectrum"


def cmd_snumbers(args):
    cfg = _apply_numerics(load_config(args.config), args)
    fit_range = None
    if args.fit_from is not None or args.fit_to is not None:
        count = args.count or cfg.numerics["count"]
        fit_range = (args.fit_from or 1, args.fit_to or count)
    return workflows.run_snumbers(cfg, args.count, args.beta, fit_range, args.p), "snumbers"


def _weight_arg(text: str) -> WeightFunction:
    """``sine:2``, ``power:2``, ``reflected-power:2``, ``constant`` or a JSON object."""
    text = text.strip()
    if text.startswith("{"):
        try:
            return WeightFunction.from_config(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ConfigError(exc.msg, where="weight") from None
    kind, _, value = text.partition(":")
    key = {"power": "gamma", "sine": "gamma", "reflected-power": "delta", "constant": "value"}.get(kind)
    if key is None:
        raise ConfigError(f"unknown weight {text!r}", where="weight")
    spec = {"kind": kind}
    if value:
        try:
            spec[key] = float(value)
        except ValueError:
            raise ConfigError(f"bad parameter {value!r}", where="weight") from None
    return WeightFunction.from_config(spec)


def cmd_transform(args):
    cfg = load_config(args.config) if args.config else None
    return workflows.run_transform(_weight_arg(args.from_weight), _weight_arg(args.to_weight), cfg), "transform"


def cmd_examples(args):
    return workflows.run_examples(args.configs), "examples"


def _one_criterion(n):
    return acceptance.run_all([n])[0]


def cmd_verify(args):
    selected = args.criteria or sorted(acceptance.CRITERIA)
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_one_criterion, selected))
    else:
        results = acceptance.run_all(selected)
    for r in results:
        print(acceptance.summary_line(r), file=sys.stderr)
    ok = all(r["passed"] for r in results)
    return workflows.Outcome({"criteria": results, "passed": ok}, EXIT_OK if ok else EXIT_ASSERTION), "verify"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="normext", description=__doc__.splitlines()[0])
    parser.add_argument("--out", type=Path, default=None, help="directory for JSON/CSV outputs")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", help="problem config (JSON)")
        p.add_argument("--evolution-step", type=float)
        p.set_defaults(func=func)
        return p

    with_config("validate", cmd_validate, "check W, C and the weight")
    with_config("check-normality", cmd_check_normality, "formal normality residual, C and accretivity")
    p = with_config("spectrum", cmd_spectrum, "closed-form lattice versus discretized oracle")
    p.add_argument("--k-min", type=int)
    p.add_argument("--k-max", type=int)
    p.add_argument("--oracle-n", type=int)
    p.add_argument("--scheme", choices=["box", "upwind"])
    p.add_argument("--space", choices=["alpha", "beta"], default="alpha")
    p = with_config("snumbers", cmd_snumbers, "s-numbers of the inverse, decay fit, Schatten verdicts")
    p.add_argument("--count", type=int)
    p.add_argument("--beta", type=float, help="replace C by diag(n^beta), n = 1..dim")
    p.add_argument("--fit-from", type=int)
    p.add_argument("--fit-to", type=int)
    p.add_argument("--p", type=float, action="append")

    p = sub.add_parser("transform", help="conjugated coefficients between two weighted spaces")
    p.add_argument("--from-weight", required=True)
    p.add_argument("--to-weight", required=True)
    p.add_argument("--config", help="optional config supplying C and a_i")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("examples", help="run the bundled worked examples (or the given configs)")
    p.add_argument("configs", nargs="*")
    p.set_defaults(func=cmd_examples)

    p = sub.add_parser("verify", help="run the acceptance criteria")
    p.add_argument("--criteria", type=int, nargs="*", choices=sorted(acceptance.CRITERIA))
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        outcome, name = args.func(args)
        return emit(outcome, args.out, name)
    except (ConfigError, InvalidExtensionError) as exc:
        detail = {"error": type(exc).__name__, "message": str(exc)}
        if isinstance(exc, InvalidExtensionError):
            detail["report"] = exc.report.to_dict()
        sys.stdout.write(dumps(detail))
        return EXIT_VALIDATION
    except OSError as exc:
        sys.stderr.write(f"I/O error: {exc}\n")
        return EXIT_IO
    except NormExtError as exc:
        # ValueError subclasses signal bad parameters rather than failed claims
        sys.stdout.write(dumps({"error": type(exc).__name__, "message": str(exc)}))
        return EXIT_VALIDATION if isinstance(exc, ValueError) else EXIT_ASSERTION


if __name__ == "__main__":
    sys.exit(main())
