"""Command-line front end.

Exit codes: 0 on success, 1 when a validation fails (report on stderr), 2 on
malformed input or I/O errors.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path as FsPath
from typing import Optional, Sequence

import numpy as np

from . import benchmarks, convergence, kernels
from .chain_core import dirichlet_form, load_chain, save_chain, validate_chain
from .grid import DensityKernel, build_partition, discretize_kernel, reversibilize
from .paths import (congestion_constant_general, congestion_ratio_finite, lift_path_family,
                    load_family, save_family, validate_assumptions)
from .spectral import comparison_bound, spectral_gap, stationary_ratio, write_spectral_csv

EXIT_OK, EXIT_INVALID, EXIT_ERROR = 0, 1, 2

FIELDS = {
    "x": lambda c, x: x[:, 0],
    "x2": lambda c, x: x[:, 0] ** 2,
    "const": lambda c, x: np.ones(len(x)),
}


class CliError(Exception):
    pass


def parse_kernel(spec: str) -> DensityKernel:
    """Built-in kernels: ``uniform``, ``affine-xy``, ``step``, ``barbell:<n>:<flavor>``."""
    if spec == "uniform":
        return kernels.uniform_kernel()
    if spec == "affine-xy":
        return kernels.affine_xy_kernel()
    if spec == "step":
        return kernels.step_density_kernel()
    parts = spec.split(":")
    if parts[0] == "barbell" and len(parts) == 3:
        if parts[2] not in ("continuous", "split"):
            raise CliError("kernel specs need a continuous barbell flavor (continuous or split)")
        return benchmarks.make_barbell(int(parts[1]), parts[2]).kernel
    raise CliError(f"unknown kernel spec {spec!r}")


def _emit(text: str, output: Optional[str]) -> None:
    if output is None:
        sys.stdout.write(text)
    else:
        FsPath(output).write_text(text)


def _csv(rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerows(rows)
    return buf.getvalue()


def _read_field(path: str, n: int) -> np.ndarray:
    data = json.loads(FsPath(path).read_text())
    values = data["values"] if isinstance(data, dict) else data
    f = np.asarray(values, dtype=float)
    if f.shape != (n,):
        raise CliError(f"field has {f.size} values, chain has {n} states")
    return f


# -- subcommands ------------------------------------------------------------------

def cmd_validate(args) -> int:
    chain = load_chain(args.input)
    report = validate_chain(chain, args.tol)
    if not report.ok:
        print(report, file=sys.stderr)
        return EXIT_INVALID
    _emit("ok\n", args.output)
    return EXIT_OK


def cmd_dirichlet(args) -> int:
    chain = load_chain(args.input)
    value = dirichlet_form(chain, _read_field(args.field, chain.n_states))
    _emit(f"{value!r}\n", args.output)
    return EXIT_OK


def cmd_spectrum(args) -> int:
    chain = load_chain(args.input)
    res = spectral_gap(chain, args.method)
    buf = io.StringIO()
    write_spectral_csv([(FsPath(args.input).stem, chain.n_states, res)], buf)
    _emit(buf.getvalue(), args.output)
    return EXIT_OK


def cmd_discretize(args) -> int:
    kernel = parse_kernel(args.kernel)
    if len(args.per_axis) != 1:
        raise CliError("discretize takes exactly one --per-axis value")
    part = build_partition(kernel.space, args.per_axis[0])
    G = discretize_kernel(kernel, part, args.quad_order)
    out = FsPath(args.output or ".")
    out.mkdir(parents=True, exist_ok=True)
    save_chain(G.base, out / "G.json")
    written = ["G.json"]
    if kernel.reversible:
        H = reversibilize(kernel, part, G)
        save_chain(H.base, out / "H.json")
        written.append("H.json")
    print(" ".join(str(out / w) for w in written))
    return EXIT_OK


def cmd_compare(args) -> int:
    P, P_tilde = load_chain(args.input[0]), load_chain(args.input[1])
    family = load_family(args.family)
    res = congestion_ratio_finite(P, P_tilde, family)
    bound = comparison_bound(res.value, P_tilde, P)
    t_rel = spectral_gap(P).relaxation_time
    rows = [("B", "c_pi", "t_rel_bound", "t_rel", "max_paths_per_edge"),
            (repr(res.value), repr(stationary_ratio(P_tilde, P)), repr(bound), repr(t_rel),
             res.max_paths_per_edge)]
    _emit(_csv(rows), args.output)
    if t_rel > bound * (1 + 1e-8):
        print(f"comparison bound violated: t_rel={t_rel!r} > {bound!r}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


def _barbell_discrete(inst, args, out):
    ref = inst.reference()
    res = congestion_ratio_finite(inst.chain, ref, inst.family)
    bound = comparison_bound(res.value, ref, inst.chain)
    eig = spectral_gap(inst.chain)
    if out is not None:
        save_chain(inst.chain, out / "chain.json")
        save_family(inst.family, out / "family.json")
    header = ("n", "flavor", "B", "c_pi", "t_rel_bound", "t_rel", "gap", "max_paths_per_edge")
    row = (inst.n, inst.flavor, repr(res.value), repr(stationary_ratio(ref, inst.chain)), repr(bound),
           repr(eig.relaxation_time), repr(eig.gap), res.max_paths_per_edge)
    return [header, row], eig.relaxation_time <= bound * (1 + 1e-8)


def _barbell_continuous(inst, args, out):
    m = args.per_axis[0] if args.per_axis else 1
    part = build_partition(inst.kernel.space, m)
    H = reversibilize(inst.kernel, part, discretize_kernel(inst.kernel, part, args.quad_order))
    ref = benchmarks.iid_chain(H.stationary)
    n_cells = part.n_cells
    fam = lift_path_family(inst.family, part, ((i, j) for i in range(n_cells) for j in range(n_cells)))
    res = congestion_ratio_finite(H.base, ref, fam)
    bound = comparison_bound(res.value, ref, H.base)
    eig = spectral_gap(H.base)
    if out is not None:
        save_chain(H.base, out / "chain.json")
        save_family(fam, out / "family.json")
    header = ("n", "flavor", "per_axis", "B", "t_rel_bound", "t_rel", "gap", "max_paths_per_edge")
    row = (inst.n, inst.flavor, m, repr(res.value), repr(bound), repr(eig.relaxation_time),
           repr(eig.gap), res.max_paths_per_edge)
    return [header, row], eig.relaxation_time <= bound * (1 + 1e-8)


def _barbell_split(inst, args, out):
    m = args.per_axis[0] if args.per_axis else 16
    fam = benchmarks.split_probe_family(inst, m, seed=args.seed)
    ref = inst.reference()
    res = congestion_constant_general(inst.kernel, ref, fam, inst.config)
    report = validate_assumptions(fam, inst.config, inst.kernel, ref, seed=args.seed)
    if not report.passed:
        print(report, file=sys.stderr)
    if out is not None:
        save_family(fam, out / "family.json")
        (out / "config.json").write_text(json.dumps(inst.config.to_dict(), indent=1))
    header = ("n", "flavor", "per_axis", "B_general", "max_paths_per_edge", "assumptions")
    row = (inst.n, inst.flavor, m, repr(res.value), res.max_paths_per_edge,
           "pass" if report.passed else "fail:" + "+".join(report.failed()))
    return [header, row], report.passed


def cmd_barbell(args) -> int:
    inst = benchmarks.make_barbell(args.n, args.flavor)
    out = None
    if args.output is not None:
        out = FsPath(args.output)
        out.mkdir(parents=True, exist_ok=True)
    runner = {"discrete": _barbell_discrete, "continuous": _barbell_continuous,
              "split": _barbell_split}[args.flavor]
    rows, ok = runner(inst, args, out)
    text = _csv(rows)
    if out is not None:
        (out / "results.csv").write_text(text)
    sys.stdout.write(text)
    return EXIT_OK if ok else EXIT_INVALID


def cmd_converge(args) -> int:
    kernel = parse_kernel(args.kernel)
    per_axis = args.per_axis or [8, 16, 32, 64]
    q = args.quad_order
    if args.study == "dirichlet":
        table = convergence.dirichlet_convergence_study(kernel, FIELDS[args.field], per_axis,
                                                        quadrature_order=q, field_id=args.field)
    elif args.study == "drift":
        table = convergence.reversibilization_drift_study(kernel, per_axis, quadrature_order=q)
    elif args.study == "density":
        probes = kernel.space.sample(np.random.default_rng(args.seed), 64)
        table = convergence.density_convergence_study(kernel, per_axis, probes, quadrature_order=q)
    elif args.study == "transition":
        table = convergence.transition_density_study(kernel, per_axis, quadrature_order=q)
    else:
        table = convergence.strong_feller_study(kernel, per_axis, seed=args.seed, quadrature_order=q)
    buf = io.StringIO()
    table.to_csv(buf)
    _emit(buf.getvalue(), args.output)
    return EXIT_OK


# -- parser -----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hyperform", description="Comparison bounds for mesh-discretized Markov chains.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, input_required=True, nargs=None):
        sp.add_argument("--input", required=input_required, nargs=nargs)
        sp.add_argument("--output")
        sp.add_argument("--tol", type=float)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--quad-order", type=int, default=3)
        sp.add_argument("--per-axis", type=int, action="append")

    sp = sub.add_parser("validate", help="check chain invariants")
    common(sp)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("dirichlet", help="Dirichlet form of a field")
    common(sp)
    sp.add_argument("--field", required=True, help="JSON list (or {\"values\": [...]}) of field values")
    sp.set_defaults(func=cmd_dirichlet)

    sp = sub.add_parser("spectrum", help="spectral gap and relaxation time")
    common(sp)
    sp.add_argument("--method", choices=("auto", "dense", "iterative"), default="auto")
    sp.set_defaults(func=cmd_spectrum)

    sp = sub.add_parser("discretize", help="mesh kernels G and H of a built-in kernel")
    common(sp, input_required=False)
    sp.add_argument("--kernel", required=True)
    sp.set_defaults(func=cmd_discretize)

    sp = sub.add_parser("compare", help="congestion ratio and relaxation-time bound")
    common(sp, nargs=2)
    sp.add_argument("--family", required=True)
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("barbell", help="barbell instance and its full pipeline")
    common(sp, input_required=False)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--flavor", choices=benchmarks.FLAVORS, default="discrete")
    sp.set_defaults(func=cmd_barbell)

    sp = sub.add_parser("converge", help="mesh-refinement study as CSV")
    common(sp, input_required=False)
    sp.add_argument("--kernel", required=True)
    sp.add_argument("--study", choices=("dirichlet", "drift", "density", "transition", "feller"),
                    default="dirichlet")
    sp.add_argument("--field", choices=sorted(FIELDS), default="x")
    sp.set_defaults(func=cmd_converge)
    return p


def run(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CliError, ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def main() -> None:
    sys.exit(run())
