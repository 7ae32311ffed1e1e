"""Command-line front end.

Every subcommand writes a JSON document carrying ``"schema": 1`` (or CSV with
``--format csv`` where a table makes sense) to ``--out`` or standard output.
Exit codes: 0 success, 2 invalid input, 3 search found nothing, 4 a
reconstruction was ambiguous or failed.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import certificates as cert
from . import report as rep
from .geometry import ShapeError
from .measures import DomainError, density_from_json, domain_from_json
from .search import (
    config_from_json,
    config_to_json,
    find_indiscernible_tuple,
    problem_from_json,
    problem_to_json,
    result_to_json,
    verify_witness,
)

SCHEMA = 1
EXIT_OK, EXIT_INVALID, EXIT_NOT_FOUND, EXIT_AMBIGUOUS = 0, 2, 3, 4


class InputError(Exception):
    """Bad user input; the message names the offending field."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(message)


def _clean(obj):
    """Make floats JSON-safe: non-finite values become null."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    return obj


def dumps(doc: dict) -> str:
    return json.dumps(_clean({"schema": SCHEMA, **doc}), indent=2, allow_nan=False) + "\n"


def _json_arg(text: str, field: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise InputError(f"{field}: not valid JSON ({e.msg})") from None


def _read_json(path: str, field: str):
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise InputError(f"{field}: cannot read {path} ({e.strerror})") from None
    return _json_arg(text, field)


def _write(args, text: str):
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _kind(args) -> cert.CertificateKind:
    if args.kind is None:
        raise InputError("kind: required")
    if args.d is None:
        raise InputError("d: required")
    dom = None
    if args.domain is not None:
        dom = domain_from_json(_json_arg(args.domain, "domain") if args.domain.startswith("{") else args.domain)
    try:
        return cert.CertificateKind(args.kind, args.d, args.body or "cube", dom)
    except ValueError as e:
        raise InputError(str(e)) from None


# -- subcommands ---------------------------------------------------------------------


def cmd_certify(args) -> int:
    kind = _kind(args)
    if args.pairs < 1:
        raise InputError("pairs: must be at least 1")
    report = cert.verify_injectivity_sampling(kind, args.pairs, args.seed)
    if args.format == "csv":
        _write(args, rep.emit_plot_data(report))
    else:
        _write(args, dumps(cert.report_to_json(report)))
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    kind = _kind(args)
    if args.moments is None:
        raise InputError("moments: required")
    m = _json_arg(args.moments, "moments")
    if not isinstance(m, list) or not all(isinstance(v, (int, float)) for v in m):
        raise InputError("moments: expected a JSON list of numbers")
    if len(m) != kind.size:
        raise InputError(f"moments: {kind.kind} in d={kind.d} needs {kind.size} values, got {len(m)}")
    cfg = cert.ReconstructConfig(seed=args.seed, tol=args.tol if args.tol is not None else 1e-10)
    try:
        res = cert.reconstruct(kind, m, cfg)
    except cert.ReconstructionError as e:
        _write(args, dumps({"kind": kind.kind, "d": kind.d, "status": "failed", "error": str(e)}))
        return EXIT_AMBIGUOUS
    _write(args, dumps(cert.reconstruction_to_json(res, kind)))
    return EXIT_AMBIGUOUS if res.status == "ambiguous" else EXIT_OK


def _search_inputs(args):
    if args.input is None:
        raise InputError("input: a JSON search problem file is required")
    doc = _read_json(args.input, "input")
    if not isinstance(doc, dict):
        raise InputError("input: expected a JSON object")
    problem_doc = doc.get("problem", doc)
    try:
        problem = problem_from_json(problem_doc)
        config = config_from_json(doc.get("config"))
    except (ValueError, KeyError, TypeError) as e:
        raise InputError(str(e)) from None
    overrides = {"seed": args.seed}
    if args.restarts is not None:
        overrides["max_restarts"] = args.restarts
    if args.tol is not None:
        overrides["tol_residual"] = args.tol
    return problem, config.with_overrides(**overrides)


def cmd_search(args) -> int:
    problem, config = _search_inputs(args)
    result = find_indiscernible_tuple(problem, config)
    check = verify_witness(result, problem, config) if result.found else None
    doc = {
        "problem": problem_to_json(problem),
        "config": config_to_json(config),
        "result": result_to_json(result, check),
    }
    _write(args, dumps(doc))
    return EXIT_OK if check is not None and check.verified else EXIT_NOT_FOUND


def cmd_lemma(args) -> int:
    for name in ("alpha", "support", "m1", "m2"):
        if getattr(args, name) is None:
            raise InputError(f"{name}: required")
    try:
        alpha = density_from_json(_json_arg(args.alpha, "alpha"))
    except (ValueError, KeyError, TypeError) as e:
        raise InputError(f"alpha: {e}") from None
    support = _json_arg(args.support, "support")
    if not (isinstance(support, list) and len(support) == 2 and all(isinstance(v, (int, float)) for v in support)):
        raise InputError("support: expected [lo, hi]")
    try:
        a, b = cert.solve_lemma_moment(alpha, support, args.m1, args.m2)
    except cert.LemmaPreconditionError as e:
        raise InputError(f"alpha: {e}") from None
    except cert.NoIncreasingSolution as e:
        _write(args, dumps({"status": "no-increasing-solution", "error": str(e)}))
        return EXIT_AMBIGUOUS
    _write(args, dumps({"status": "ok", "a": a, "b": b}))
    return EXIT_OK


def _figure_path(args) -> Path | None:
    if not args.out:
        return None
    return Path(args.out).with_suffix(".png")


def cmd_report(args) -> int:
    """Tables and figures: from a saved certify report, or the phase-change batch.

    A certify report is regenerated from its kind, dimension, pair count and
    seed, which reproduces every sampled pair exactly.
    """
    if args.input is not None:
        doc = _read_json(args.input, "input")
        try:
            kind = cert.CertificateKind(doc["kind"], doc["d"], doc.get("body", "cube"))
            report = cert.verify_injectivity_sampling(kind, int(doc["pairs"]), int(doc["seed"]))
        except KeyError as e:
            raise InputError(f"input: missing field {e.args[0]!r}") from None
        except ValueError as e:
            raise InputError(f"input: {e}") from None
        text = rep.emit_plot_data(report) if args.format == "csv" else dumps(cert.report_to_json(report))
        _write(args, text)
        fig = _figure_path(args)
        if fig is not None:
            rep.plot_certify(report, fig)
        return EXIT_OK
    d = args.d if args.d is not None else 2
    if d < 1:
        raise InputError("d: must be positive")
    overrides = {"seed": args.seed}
    if args.restarts is not None:
        overrides["max_restarts"] = args.restarts
    if args.tol is not None:
        overrides["tol_residual"] = args.tol
    config = config_from_json(None).with_overrides(**overrides)
    rows = rep.phase_change_batch(d, config)
    if args.format == "csv":
        _write(args, rep.emit_plot_data(rows))
    else:
        _write(args, dumps({"batch": "phase-change", "d": d, "rows": [r.__dict__ for r in rows]}))
    fig = _figure_path(args)
    if fig is not None:
        rep.plot_batch(rows, fig)
    return EXIT_OK


# -- entry point -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--tol", type=float)
    common.add_argument("--restarts", type=int)
    common.add_argument("--out", help="output file (default: standard output)")
    common.add_argument("--format", choices=("json", "csv"), default="json")

    kinds = _Parser(add_help=False)
    kinds.add_argument("--kind", choices=cert.KINDS)
    kinds.add_argument("--d", type=int)
    kinds.add_argument("--body", choices=("ball", "cube", "cross"))
    kinds.add_argument("--domain", help="full, unit-cube or a pulled-back JSON object")

    p = _Parser(prog="indiscernible", description="Moment certificates and indiscernible-shape searches.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("certify", parents=[common, kinds], help="sample moment gaps between random shapes")
    s.add_argument("--pairs", type=int, default=1000)
    s.set_defaults(run=cmd_certify)

    s = sub.add_parser("reconstruct", parents=[common, kinds], help="recover a shape from its moments")
    s.add_argument("--moments", help="JSON list of moments")
    s.set_defaults(run=cmd_reconstruct)

    s = sub.add_parser("search", parents=[common], help="look for shapes no measure tells apart")
    s.add_argument("input", nargs="?", help="JSON problem (optionally {'problem':..., 'config':...})")
    s.set_defaults(run=cmd_search)

    s = sub.add_parser("lemma", parents=[common], help="solve for the increasing linear u")
    s.add_argument("--alpha", help="1-d density as JSON")
    s.add_argument("--support", help="JSON [lo, hi]")
    s.add_argument("--m1", type=float)
    s.add_argument("--m2", type=float)
    s.set_defaults(run=cmd_lemma)

    s = sub.add_parser("report", parents=[common], help="CSV and figures for certify reports or the phase-change batch")
    s.add_argument("--input", help="certify JSON report to tabulate")
    s.add_argument("--d", type=int)
    s.set_defaults(run=cmd_report)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.run(args)
    except (InputError, ShapeError, DomainError) as e:
        print(f"indiscernible: error: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
