"""Command-line entry points.

Exit codes: 0 success, 2 schema violation (with a field-path diagnostic),
3 numeric/size guard violation, 4 property failure from ``verify``.
"""

from __future__ import annotations

import argparse
import json
import sys as _sys

import numpy as np

from . import generators, io, runner, verify
from .embedding import (
    CarlesonData,
    carleson_condition_constant,
    disjointness_inequality,
    embedding_ratio_search,
    stopping_embedding_report,
)
from .errors import GuardError, SchemaError
from .forms import lambda_form
from .lattice import path_of
from .normest import alternating_maximization, attach_oracle
from .stopping import build_average_family, build_ratio_family
from .testing_constants import testing_report

EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_GUARD = 3
EXIT_PROPERTY = 4


def _add_common(sub: argparse.ArgumentParser):
    sub.add_argument("--seed", type=int, default=1)
    sub.add_argument("--p", type=float, default=2.0)
    sub.add_argument("--dim", type=int, default=1)
    sub.add_argument("--depth", type=int, default=3)
    sub.add_argument("--instances", type=int, default=1)
    sub.add_argument("--restarts", type=int, default=4)
    sub.add_argument("--tol", type=float, default=1e-10)
    sub.add_argument("--in", dest="infile", type=str, default=None)
    sub.add_argument("--out", type=str, default=None)
    sub.add_argument("--format", choices=("json", "csv"), default="json")


def _emit(args, text: str):
    if args.out:
        with open(args.out, "w") as fp:
            fp.write(text)
    else:
        _sys.stdout.write(text)


def _load_or_generate(args):
    if args.infile:
        with open(args.infile) as fp:
            return io.read_instance(fp)
    return generators.generate(
        generators.GenSpec(seed=args.seed, dimension=args.dim, depth=args.depth, p=args.p)
    )


def _cmd_gen(args) -> int:
    inst = generators.generate(
        generators.GenSpec(seed=args.seed, dimension=args.dim, depth=args.depth, p=args.p)
    )
    if args.out:
        with open(args.out, "w") as fp:
            io.write_instance(inst, fp)
    else:
        io.write_instance(inst, _sys.stdout)
    return EXIT_OK


def _cmd_eval(args) -> int:
    if args.infile:
        inst = _load_or_generate(args)
        f = np.ones((inst.sys.num_levels, inst.sys.num_atoms))
        g = np.ones(inst.sys.num_atoms)
        print(f"{lambda_form(inst, f, g):.17g}")
        return EXIT_OK
    rows = runner.sweep_rows(
        args.seed, args.instances, args.p, args.dim, args.depth,
        restarts=args.restarts, tol=args.tol,
    )
    import io as _io

    buf = _io.StringIO()
    io.write_rows(rows, buf, args.format)
    _emit(args, buf.getvalue())
    return EXIT_OK


def _cmd_testing(args) -> int:
    inst = _load_or_generate(args)
    rep = testing_report(inst)
    payload = {
        "T": rep.forward,
        "Tstar": rep.dual,
        "argmax_T": path_of(inst.sys, rep.forward_cube) if rep.forward_cube else None,
        "argmax_Tstar": path_of(inst.sys, rep.dual_cube) if rep.dual_cube else None,
        "witness_g": rep.witness_g.tolist(),
        "witness_f": rep.witness_f.tolist(),
    }
    _emit(args, json.dumps(payload, indent=1) + "\n")
    return EXIT_OK


def _cmd_normest(args) -> int:
    inst = _load_or_generate(args)
    est = alternating_maximization(
        inst, restarts=args.restarts, tol=args.tol, seed=args.seed
    )
    est = attach_oracle(inst, est)
    payload = {
        "value": est.value,
        "iterations": est.iterations,
        "restarts": est.restarts,
        "converged": est.converged,
        "degenerate": est.degenerate,
        "oracle_value": est.oracle_value,
        "oracle_kind": est.oracle_kind,
    }
    _emit(args, json.dumps(payload, indent=1) + "\n")
    return EXIT_OK


def _cmd_stopping(args) -> int:
    inst = _load_or_generate(args)
    sys_ = inst.sys
    f = generators.random_scale_function(sys_, args.seed, base=inst.mu)
    g = generators.random_atom_function(sys_, args.seed)
    payload = {
        "average_family": io.family_to_dict(sys_, build_average_family(inst, sys_.root, g)),
        "ratio_family": io.family_to_dict(sys_, build_ratio_family(inst, sys_.root, f)),
    }
    _emit(args, json.dumps(payload, indent=1) + "\n")
    return EXIT_OK


def _cmd_embed_check(args) -> int:
    inst = _load_or_generate(args)
    sys_ = inst.sys
    rng = np.random.Generator(np.random.Philox(key=[args.seed, generators.STREAM_A]))
    nu = np.exp(rng.random(sys_.num_atoms) * 2.0 - 1.0)
    a = np.exp(rng.random(sys_.num_cubes)) * (rng.random(sys_.num_cubes) >= 0.4)
    data = CarlesonData(a, nu)
    cprime = carleson_condition_constant(sys_, data)
    search = embedding_ratio_search(sys_, data, inst.p, restarts=args.restarts, seed=args.seed)
    f = generators.random_scale_function(sys_, args.seed, base=inst.mu)
    prop2 = None
    if inst.p >= 2:
        fam = build_ratio_family(inst, sys_.root, f)
        prop2 = stopping_embedding_report(inst, f, fam).ratio
    violations = 0
    for k in range(max(args.instances, 1) * 10):
        h = generators.random_scale_function(sys_, args.seed + k, stream=generators.STREAM_H)
        labels = np.random.Generator(
            np.random.Philox(key=[args.seed + k, 77])
        ).integers(0, 3, size=h.shape)
        parts = [
            {(int(a_), int(j)) for j, a_ in np.argwhere(labels == i)} for i in range(2)
        ]
        if not disjointness_inequality(h, inst.sigma, inst.p, parts).holds:
            violations += 1
    payload = {
        "Cprime": cprime,
        "C_emp": search.value,
        "ratio": (search.value / cprime) if 0 < cprime < float("inf") else None,
        "prop2_ratio": prop2,
        "lemma1_violations": violations,
    }
    _emit(args, json.dumps(payload, indent=1) + "\n")
    return EXIT_OK


def _cmd_verify(args) -> int:
    results, ok = verify.run_suite(
        seed=args.seed,
        instances=args.instances,
        p=args.p,
        dimension=args.dim,
        depth=args.depth,
        restarts=args.restarts,
        tol=args.tol,
    )
    header = (
        f"dyadlab verify seed={args.seed} instances={args.instances} "
        f"p={args.p:g} dim={args.dim} depth={args.depth} "
        f"restarts={args.restarts} tol={args.tol:g}"
    )
    _emit(args, verify.format_report(results, header))
    return EXIT_OK if ok else EXIT_PROPERTY


def _cmd_report(args) -> int:
    if not args.infile:
        raise GuardError("report requires --in with a CSV of rows")
    with open(args.infile) as fp:
        rows = io.read_rows(fp)
    summary = io.summarize_rows(rows)
    if args.format == "csv":
        _emit(args, io.summary_to_csv(summary))
    else:
        _emit(args, json.dumps(summary, indent=1) + "\n")
    return EXIT_OK


_COMMANDS = {
    "gen": _cmd_gen,
    "eval": _cmd_eval,
    "testing": _cmd_testing,
    "normest": _cmd_normest,
    "stopping": _cmd_stopping,
    "embed-check": _cmd_embed_check,
    "verify": _cmd_verify,
    "report": _cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dyadlab",
        description="two-weight testing laboratory for a positive dyadic box operator",
    )
    subs = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        _add_common(subs.add_parser(name))
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=_sys.stderr)
        return EXIT_SCHEMA
    except GuardError as exc:
        print(f"guard violation: {exc}", file=_sys.stderr)
        return EXIT_GUARD


if __name__ == "__main__":
    raise SystemExit(main())
