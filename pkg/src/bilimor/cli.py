"""Command-line front end.

Exit codes: 0 success, 2 invalid input, 3 non-convergence or numerical
failure, 4 divergent norm. ``BILIMOR_THREADS`` caps the number of sweep
rows run concurrently.
"""

import argparse
import csv
import io as _io
import json
import os
import platform
import sys
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .algorithms import ReductionConfig, birka, tbirka
from .benchmarks import (
    burgers_carleman,
    convection_diffusion_lpv,
    fokker_planck,
    heat2d,
    simulate,
)
from .exceptions import BilimorError, Divergent, DivergentSeries, InputError, MaxIterExceeded
from .h2 import h2_error, h2_norm_gramian, h2_norm_pole_residue, truncated_h2_norm
from .interpolation import (
    KRONECKER_LIMIT,
    check_h2_interpolation_conditions,
    check_truncated_conditions,
    check_wilson_kronecker_conditions,
)
from .io import atomic_write_text, load_model, model_digest, save_model, write_matrix

EXIT_OK, EXIT_INPUT, EXIT_NOCONV, EXIT_DIVERGENT = 0, 2, 3, 4

BENCHMARKS = {
    "heat2d": (heat2d, {"k": int, "gamma": float, "shared_robin": lambda v: v.lower() in ("1", "true", "yes")}),
    "fokker_planck": (fokker_planck, {"nodes": int}),
    "burgers": (burgers_carleman, {"n0": int, "nu": float}),
    "convection_diffusion": (convection_diffusion_lpv, {"grid": int, "p0": float}),
}


def fmt(value):
    """17 significant digits; infinities and NaN become tokens."""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    value = float(value)
    if np.isnan(value):
        return "FAILED"
    if np.isinf(value):
        return "DIVERGED"
    return format(value, ".17g")


def csv_text(header, rows):
    buffer = _io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buffer.getvalue()


def write_manifest(out_dir, command, args, inputs, outputs, seed, started):
    record = {
        "command": command,
        "config": {k: (v if isinstance(v, (int, float, str, bool, type(None), list)) else str(v))
                   for k, v in vars(args).items() if k != "func"},
        "inputs": inputs,
        "outputs": sorted(str(p) for p in outputs),
        "versions": {
            "bilimor": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "seed": seed,
        "wall_seconds": time.perf_counter() - started,
    }
    atomic_write_text(Path(out_dir) / "manifest.json", json.dumps(record, indent=2) + "\n")


def _parse_params(pairs):
    params = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise InputError(f"benchmark parameter {pair!r} is not key=value")
        key, value = pair.split("=", 1)
        params[key.strip()] = value.strip()
    return params


def build_benchmark(name, pairs):
    if name not in BENCHMARKS:
        raise InputError(f"unknown benchmark {name!r}; choose from {sorted(BENCHMARKS)}")
    factory, types = BENCHMARKS[name]
    params = _parse_params(pairs)
    kwargs = {}
    for key, value in params.items():
        if key not in types:
            raise InputError(f"{name} has no parameter {key!r}; known: {sorted(types)}")
        try:
            kwargs[key] = types[key](value)
        except ValueError as exc:
            raise InputError(f"bad value for {key}: {value!r}") from exc
    try:
        system = factory(**kwargs)
    except TypeError as exc:
        raise InputError(f"{name}: {exc}") from exc
    gamma = kwargs.get("gamma", 0.4) if name == "heat2d" else None
    return system, gamma


def _config_from_args(args, order):
    return ReductionConfig(
        order=order,
        method=args.method,
        terms=args.terms,
        tol=args.tol,
        max_iter=args.max_iter,
        init=args.init,
        seed=args.seed,
        sylvester_mode=getattr(args, "sylvester", "auto"),
    )


def _run_reduction(system, config):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MaxIterExceeded)
        return (birka if config.method == "birka" else tbirka)(system, config)


def cmd_reduce(args):
    started = time.perf_counter()
    system, gamma = load_model(args.model)
    config = _config_from_args(args, args.order)
    config.validate(system.n)
    reduced, proj, report = _run_reduction(system, config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    outputs = [save_model(reduced, out / "reduced", gamma=gamma)]
    write_matrix(out / "V.mtx", proj.V)
    write_matrix(out / "W.mtx", proj.W)
    outputs += [out / "V.mtx", out / "W.mtx"]
    atomic_write_text(out / "convergence.csv",
                      csv_text(["iter", "eig_change", "wall_ms", "contraction"], report.rows()))
    summary = [(name, value) for name, value in sorted(report.residuals.items())]
    summary += [("converged", report.converged), ("iterations", report.iterations),
                ("restarts", report.restarts), ("stable", report.stable)]
    atomic_write_text(out / "residuals.csv", csv_text(["quantity", "value"], summary))
    outputs += [out / "convergence.csv", out / "residuals.csv"]
    write_manifest(out, "reduce", args, {"model": model_digest(args.model)}, outputs, args.seed, started)
    print(f"order={reduced.n} converged={report.converged} iterations={report.iterations}")
    for name, value in sorted(report.residuals.items()):
        print(f"residual_{name}={fmt(value)}")
    return EXIT_OK if report.converged else EXIT_NOCONV


def cmd_h2(args):
    system, _ = load_model(args.model)
    if args.reduced:
        reduced, _ = load_model(args.reduced)
        terms = args.terms if args.route == "truncated" else None
        if args.route == "pole-residue":
            raise InputError("errors are evaluated with the gramian or truncated route")
        result = h2_error(system, reduced, terms=terms, max_terms=args.max_terms)
    elif args.route == "gramian":
        result = h2_norm_gramian(system, max_terms=args.max_terms)
    elif args.route == "pole-residue":
        result = h2_norm_pole_residue(system, max_order=args.max_terms)
    else:
        result = truncated_h2_norm(system, args.terms)
    print(f"route={result.route}")
    print(f"value={fmt(result.value)}")
    print(f"terms_used={result.terms_used}")
    print(f"tail_estimate={fmt(result.tail_estimate)}")
    print(f"converged={result.converged}")
    return EXIT_OK if result.converged else EXIT_NOCONV


def cmd_check(args):
    system, _ = load_model(args.model)
    reduced, _ = load_model(args.reduced)
    rows = []
    if system.n * reduced.n <= KRONECKER_LIMIT:
        report = check_wilson_kronecker_conditions(system, reduced, tol=args.tol)
        rows += [(f"kronecker_{k}", v) for k, v in sorted(report.residuals.items())]
    if args.terms:
        report = check_truncated_conditions(system, reduced, args.terms, tol=args.tol)
        rows += [(f"truncated_{k}", v) for k, v in sorted(report.residuals.items())]
    if system.is_siso:
        report = check_h2_interpolation_conditions(system, reduced, args.interp_terms, tol=args.tol)
        rows += [(f"interpolation_{k}", v) for k, v in sorted(report.residuals.items())]
    text = csv_text(["condition", "residual"], rows)
    if args.out:
        atomic_write_text(args.out, text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_bench(args):
    started = time.perf_counter()
    system, gamma = build_benchmark(args.name, args.param)
    out = Path(args.out)
    manifest = save_model(system, out, gamma=gamma)
    write_manifest(out, "bench", args, {}, [manifest], None, started)
    n, m, p = system.dims
    print(f"{args.name}: n={n} m={m} p={p}")
    return EXIT_OK


_SAFE_NAMES = {name: getattr(np, name) for name in
               ("exp", "sin", "cos", "tan", "sqrt", "log", "abs", "tanh", "pi", "heaviside")}


def _input_function(expressions, gamma):
    codes = [compile(expr, "<input>", "eval") for expr in expressions]
    scale = 1.0 if gamma is None else 1.0 / gamma

    def u(t):
        env = dict(_SAFE_NAMES, t=t)
        return np.array([float(eval(code, {"__builtins__": {}}, env)) for code in codes]) * scale

    return u


def cmd_simulate(args):
    system, gamma = load_model(args.model)
    expressions = args.input or ["0"]
    if len(expressions) != system.m:
        raise InputError(f"model has {system.m} inputs but {len(expressions)} --input given")
    try:
        u = _input_function(expressions, gamma)
        u(0.0)
    except (SyntaxError, NameError, TypeError, ValueError) as exc:
        raise InputError(f"cannot evaluate input expression: {exc}") from exc
    result = simulate(system, u, args.t_max, args.dt, label=";".join(expressions))
    header = ["t"] + [f"y_{i + 1}" for i in range(system.p)]
    rows = [(t, *y) for t, y in zip(result.times, result.outputs.T)]
    atomic_write_text(args.out, csv_text(header, rows))
    return EXIT_OK


def _sweep_row(system, method, order, args, full_norm):
    config = ReductionConfig(order=order, method=method, terms=args.terms, tol=args.tol,
                             max_iter=args.max_iter, seed=args.seed, check_conditions=False)
    try:
        reduced, _, report = _run_reduction(system, config)
    except DivergentSeries:
        return [method, order, args.terms, "DIVERGED", "none", 0, 0, "FAILED", 0]
    except (BilimorError, np.linalg.LinAlgError):
        return [method, order, args.terms, "FAILED", "none", 0, 0, "FAILED", 0]
    try:
        if full_norm is not None:
            err = h2_error(system, reduced)
            route, used = "gramian", err.terms_used
            value = err.value / full_norm.value
        else:
            err = h2_error(system, reduced, terms=args.terms)
            route, used = "truncated", args.terms
            value = err.value / truncated_h2_norm(system, args.terms).value
    except Divergent:
        value, route, used = "DIVERGED", "gramian", 0
    except BilimorError:
        value, route, used = "FAILED", "none", 0
    return [method, order, args.terms, value, route, used, report.iterations,
            report.mean_wall_ms(), report.converged]


def _parse_orders(text):
    try:
        orders = [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise InputError(f"bad order list {text!r}") from exc
    if not orders:
        raise InputError("empty order list")
    return orders


def cmd_sweep(args):
    started = time.perf_counter()
    orders = _parse_orders(args.orders)
    system, _ = build_benchmark(args.name, args.param)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    if not methods or any(m not in ("birka", "tbirka") for m in methods):
        raise InputError(f"methods must be birka and/or tbirka, got {args.methods!r}")
    for r in orders:
        if not 1 <= r <= system.n:
            raise InputError(f"order {r} out of range for n={system.n}")
    try:
        full_norm = h2_norm_gramian(system)
        if not full_norm.converged:
            full_norm = None
    except Divergent:
        full_norm = None
    jobs = [(method, r) for method in methods for r in orders]
    threads = max(1, int(os.environ.get("BILIMOR_THREADS", "1") or 1))
    with ThreadPoolExecutor(max_workers=threads) as pool:
        rows = list(pool.map(lambda job: _sweep_row(system, job[0], job[1], args, full_norm), jobs))
    header = ["method", "order", "terms", "rel_h2_error", "error_route", "error_terms",
              "iterations", "mean_wall_ms", "converged"]
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    atomic_write_text(out, csv_text(header, rows))
    write_manifest(out.parent, "sweep", args, {}, [out], args.seed, started)
    ok = any(not isinstance(row[3], str) for row in rows)
    return EXIT_OK if ok else EXIT_NOCONV


def _add_reduction_options(parser):
    parser.add_argument("--method", choices=("birka", "tbirka"), default="birka")
    parser.add_argument("--terms", type=int, default=2, help="truncation index N for tbirka")
    parser.add_argument("--tol", type=float, default=1e-6)
    parser.add_argument("--max-iter", type=int, default=100)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--init", choices=("log_spaced_shifts", "random_stable"), default="log_spaced_shifts")


def build_parser():
    parser = argparse.ArgumentParser(prog="bilimor", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("reduce", help="reduce a model with B-IRKA or TB-IRKA")
    p.add_argument("model")
    p.add_argument("--order", type=int, required=True)
    _add_reduction_options(p)
    p.add_argument("--sylvester", choices=("auto", "direct", "iterative"), default="auto")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("h2", help="H2 norm of a model or error to a reduced model")
    p.add_argument("model")
    p.add_argument("--reduced")
    p.add_argument("--route", choices=("gramian", "pole-residue", "truncated"), default="gramian")
    p.add_argument("--terms", type=int, default=2)
    p.add_argument("--max-terms", type=int, default=200)
    p.set_defaults(func=cmd_h2)

    p = sub.add_parser("check", help="optimality-condition residuals of a reduced model")
    p.add_argument("model")
    p.add_argument("reduced")
    p.add_argument("--terms", type=int, help="also check the N-term truncated conditions")
    p.add_argument("--interp-terms", type=int, default=10)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--out")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("bench", help="write a benchmark model directory")
    p.add_argument("name", choices=sorted(BENCHMARKS))
    p.add_argument("--param", action="append", metavar="KEY=VALUE")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("simulate", help="simulate a model and write t, y_1..y_p")
    p.add_argument("model")
    p.add_argument("--input", action="append", metavar="EXPR",
                   help="input channel as an expression in t, e.g. 'exp(-t)'; repeat per channel")
    p.add_argument("--t-max", type=float, default=10.0)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="error and timing versus reduced order")
    p.add_argument("name", choices=sorted(BENCHMARKS))
    p.add_argument("--param", action="append", metavar="KEY=VALUE")
    p.add_argument("--orders", required=True, help="comma-separated reduced orders")
    p.add_argument("--methods", default="birka,tbirka")
    p.add_argument("--terms", type=int, default=2)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Divergent as exc:
        print(f"error: divergent: {exc}", file=sys.stderr)
        return EXIT_DIVERGENT
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except DivergentSeries as exc:
        print(f"error: divergent series: {exc}", file=sys.stderr)
        return EXIT_DIVERGENT
    except BilimorError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NOCONV


if __name__ == "__main__":
    sys.exit(main())
