"""Command-line front end.

Commands: ``cluster``, ``spectrum``, ``generate``, ``bench`` and ``fixtures``.
Reports are JSON with sorted keys; wall-clock times only ever appear under a
``timing`` key. Failures print ``{"error": {"code": ..., "message": ...}}`` to
stderr and exit with status 1 (2 for command-line usage errors).
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .bench import BenchPlan, run_bench
from .errors import CpccaError, InvalidSelection
from .io import FORMATS, load_matrix, save_matrix
from .matrix import (FIXTURE_NAMES, CircularSpec, fixture, generate_circular,
                     generate_nearly_uncoupled)
from .pcca import METHODS, cluster, select_n_clusters
from .spectral import (EigenSelection, circular_check, dominant_eigenpairs,
                       realify, orthonormalize, resolve_weight)

SEED_ENV = "CPCCA_SEED"
MODES = ("magnitude", "real")


class CliError(Exception):
    def __init__(self, code, message, status=1):
        super().__init__(message)
        self.code = code
        self.status = status


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError("USAGE_ERROR", message, status=2)


def _default_seed():
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise CliError("INVALID_ARGUMENT", f"{SEED_ENV}={raw!r} is not an integer") from None


def _dump(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _write(path, text):
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _csv(matrix):
    return "".join(",".join(repr(float(v)) for v in row) + "\n" for row in np.asarray(matrix))


def _complex_list(values):
    return [[float(z.real), float(z.imag)] for z in values]


# -- input selection -------------------------------------------------------

def _parse_generate(spec, seed):
    """``circular:B:n:eps[:seed]`` or ``uncoupled:B:n:coupling[:seed]``."""
    parts = spec.split(":")
    try:
        kind = parts[0]
        blocks, size, param = int(parts[1]), int(parts[2]), float(parts[3])
        if len(parts) == 5:
            seed = int(parts[4])
        elif len(parts) != 4:
            raise ValueError
    except (IndexError, ValueError):
        raise CliError("INVALID_ARGUMENT", f"cannot parse generator spec {spec!r}") from None
    if kind == "circular":
        return generate_circular(CircularSpec(blocks, size, param, seed)), blocks
    if kind == "uncoupled":
        return generate_nearly_uncoupled(blocks, size, param, seed), blocks
    raise CliError("INVALID_ARGUMENT", f"unknown generator {kind!r}")


def _add_input(p):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--in", dest="path", help="matrix file (.mtx or .csv)")
    src.add_argument("--fixture", help=f"one of {', '.join(FIXTURE_NAMES)}")
    src.add_argument("--generate", metavar="SPEC",
                     help="circular:BLOCKS:SIZE:EPS[:SEED] or uncoupled:BLOCKS:SIZE:COUPLING[:SEED]")
    p.add_argument("--format", choices=FORMATS, help="input format (default: file extension)")
    p.add_argument("--raw", action="store_true", help="normalize rows after loading")
    p.add_argument("--tol", type=float, default=1e-12, help="row-sum tolerance")
    p.add_argument("--seed", type=int, default=None)


def _load_input(args):
    """Returns (matrix, block count if known)."""
    if args.fixture:
        return fixture(args.fixture), None
    if args.generate:
        seed = args.seed if args.seed is not None else _default_seed()
        return _parse_generate(args.generate, seed)
    try:
        return load_matrix(args.path, args.format, raw=args.raw, tol=args.tol), None
    except FileNotFoundError:
        raise CliError("FILE_NOT_FOUND", f"no such file: {args.path}") from None


# -- commands --------------------------------------------------------------

def cmd_cluster(args):
    P, _ = _load_input(args)
    report = {"input": {"dim": P.dim, "source": args.path or args.fixture or args.generate}}
    if args.scan:
        try:
            lo, hi = (int(v) for v in args.scan.split(":"))
        except ValueError:
            raise CliError("INVALID_ARGUMENT", f"--scan expects LO:HI, got {args.scan!r}") from None
        scan = select_n_clusters(P, args.mode, range(lo, hi + 1), args.weight,
                                 method=args.scan_method)
        report["scan"] = scan.to_dict()
        n_clusters = scan.selected
    else:
        n_clusters = args.n_clusters
    res = cluster(P, n_clusters, args.mode, args.weight, args.method)
    report.update(res.to_dict(membership=False))
    report["weight"] = args.weight

    os.makedirs(args.out_dir, exist_ok=True)
    _write(os.path.join(args.out_dir, "membership.csv"), _csv(res.chi))
    _write(os.path.join(args.out_dir, "coarse.csv"), _csv(res.coarse_matrix))
    _write(os.path.join(args.out_dir, "report.json"), _dump(report))
    sys.stdout.write(_dump(report))
    return 0


def cmd_spectrum(args):
    P, blocks = _load_input(args)
    if args.count >= P.dim:
        raise InvalidSelection(f"count {args.count} must be smaller than the "
                               f"matrix dimension {P.dim}")
    w = resolve_weight(P, args.weight)
    report = {"dim": P.dim, "count": args.count, "modes": {}}
    failures = 0
    for mode in ([args.mode] if args.mode else MODES):
        try:
            spec, V = dominant_eigenpairs(P, EigenSelection(mode, args.count))
            X, L, _ = realify(V, spec)
            basis = orthonormalize(X, w, L, spectrum=spec, P=P)
            report["modes"][mode] = {
                "eigenvalues": _complex_list(spec.eigenvalues),
                "pairs": [list(p) for p in spec.pairs],
                "residual": basis.residual,
            }
        except CpccaError as exc:
            failures += 1
            report["modes"][mode] = {"error": exc.to_dict()}
    status = 0 if failures < len(report["modes"]) else 1
    if args.check_circular:
        nb = args.blocks or blocks
        if nb is None:
            raise CliError("INVALID_ARGUMENT", "--check-circular needs --blocks for this input")
        check = circular_check(P, nb, args.circular_tol)
        report["circular_check"] = check
        if not check["passed"]:
            status = 3
    text = _dump(report)
    if args.out:
        _write(args.out, text)
    sys.stdout.write(text)
    return status


def cmd_generate(args):
    seed = args.seed if args.seed is not None else _default_seed()
    if args.kind == "circular":
        P = generate_circular(CircularSpec(args.blocks, args.block_size, args.eps, seed))
    else:
        P = generate_nearly_uncoupled(args.blocks, args.block_size, args.coupling, seed)
    save_matrix(P, args.out, args.format)
    sys.stdout.write(_dump({"dim": P.dim, "kind": args.kind, "seed": seed, "out": args.out}))
    return 0


def cmd_bench(args):
    if args.plan:
        try:
            with open(args.plan) as fh:
                plan = BenchPlan.from_dict(json.load(fh))
        except FileNotFoundError:
            raise CliError("FILE_NOT_FOUND", f"no such file: {args.plan}") from None
        except json.JSONDecodeError as exc:
            raise CliError("PARSE_ERROR", f"plan file: {exc}") from None
    else:
        try:
            sizes = tuple(int(s) for s in args.sizes.split(","))
        except ValueError:
            raise CliError("INVALID_ARGUMENT", f"bad --sizes {args.sizes!r}") from None
        plan = BenchPlan(
            sizes=sizes, trials=args.trials, generator=args.gen, blocks=args.blocks,
            eps=args.eps, coupling=args.coupling, mode=args.mode,
            n_clusters=args.n_clusters, method=args.method, weight=args.weight,
            seed=args.seed if args.seed is not None else _default_seed(),
            warmup=not args.no_warmup, jobs=1 if args.serial else args.jobs)
    report = run_bench(plan)
    if args.out_csv:
        _write(args.out_csv, report.to_csv())
    text = report.to_json()
    if args.out_json:
        _write(args.out_json, text)
    sys.stdout.write(text + "\n")
    return 0


def cmd_fixtures(args):
    if args.export:
        if not args.out:
            raise CliError("INVALID_ARGUMENT", "--export needs --out")
        save_matrix(fixture(args.export), args.out, args.format)
        sys.stdout.write(_dump({"fixture": args.export, "out": args.out}))
        return 0
    sys.stdout.write("".join(name + "\n" for name in FIXTURE_NAMES))
    return 0


# -- parser ----------------------------------------------------------------

def build_parser():
    parser = _Parser(prog="cpcca", description="PCCA+ coarse-graining of "
                     "non-reversible Markov chains with complex eigenvalues")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("cluster", help="cluster a transition matrix")
    _add_input(p)
    n = p.add_mutually_exclusive_group(required=True)
    n.add_argument("--n-clusters", type=int)
    n.add_argument("--scan", metavar="LO:HI", help="choose the cluster number by crispness")
    p.add_argument("--mode", choices=MODES, default="real")
    p.add_argument("--weight", choices=("uniform", "stationary"), default="uniform")
    p.add_argument("--method", choices=METHODS, default="nelder-mead")
    p.add_argument("--scan-method", choices=METHODS, default="nelder-mead")
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("spectrum", help="dominant eigenvalues and subspace residual")
    _add_input(p)
    p.add_argument("--count", type=int, default=3)
    p.add_argument("--mode", choices=MODES, default=None,
                   help="restrict to one selection mode (default: both)")
    p.add_argument("--weight", choices=("uniform", "stationary"), default="uniform")
    p.add_argument("--check-circular", action="store_true",
                   help="check that the roots of unity are eigenvalues")
    p.add_argument("--blocks", type=int, help="block count for --check-circular")
    p.add_argument("--circular-tol", type=float, default=1e-8)
    p.add_argument("--out")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("generate", help="write a random test matrix")
    p.add_argument("kind", choices=("circular", "uncoupled"))
    p.add_argument("--blocks", type=int, default=3)
    p.add_argument("--block-size", type=int, default=10)
    p.add_argument("--eps", type=float, default=0.0)
    p.add_argument("--coupling", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=FORMATS)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("bench", help="time the pipeline on generated matrices")
    p.add_argument("--plan", help="JSON file with BenchPlan fields")
    p.add_argument("--sizes", default="30,60,90,120")
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--gen", choices=("circular", "uncoupled"), default="circular")
    p.add_argument("--blocks", type=int, default=3)
    p.add_argument("--eps", type=float, default=0.0)
    p.add_argument("--coupling", type=float, default=0.01)
    p.add_argument("--n-clusters", type=int, default=3)
    p.add_argument("--mode", choices=MODES, default="magnitude")
    p.add_argument("--method", choices=METHODS, default="nelder-mead")
    p.add_argument("--weight", choices=("uniform", "stationary"), default="uniform")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--serial", action="store_true", help="force jobs=1")
    p.add_argument("--no-warmup", action="store_true")
    p.add_argument("--out-csv")
    p.add_argument("--out-json")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("fixtures", help="list or export the reference matrices")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--list", action="store_true", default=True)
    g.add_argument("--export", metavar="NAME")
    p.add_argument("--out")
    p.add_argument("--format", choices=FORMATS)
    p.set_defaults(func=cmd_fixtures)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except CliError as exc:
        code, message, status = exc.code, str(exc), exc.status
    except CpccaError as exc:
        code, message, status = exc.code, str(exc), 1
    except FileNotFoundError as exc:
        code, message, status = "FILE_NOT_FOUND", str(exc), 1
    except OSError as exc:
        code, message, status = "IO_ERROR", str(exc), 1
    except ValueError as exc:
        code, message, status = "INVALID_ARGUMENT", str(exc), 1
    sys.stderr.write(json.dumps({"error": {"code": code, "message": message}},
                                sort_keys=True) + "\n")
    return status
