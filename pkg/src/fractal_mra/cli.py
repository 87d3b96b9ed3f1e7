"""Command-line front end.

Exit codes: 0 success, 1 mathematical-property failure, 2 numeric-tolerance
failure, 3 input error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
from fractions import Fraction
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .config import BudgetExceeded, budget
from .ifs import IFSystem, scaling_eval, system_from_dict, system_to_dict, validate

EXIT_OK, EXIT_MATH, EXIT_NUMERIC, EXIT_INPUT = 0, 1, 2, 3

BUILTINS = ("cantor-third", "cantor-quarter-gap", "nonlinear-example")


class InputError(Exception):
    pass


# plumbing ----------------------------------------------------------------------

def _read_spec(path: str):
    """Return (system, raw bytes). ``builtin:NAME`` reads a bundled spec file."""
    if path.startswith("builtin:"):
        name = path.split(":", 1)[1]
        if name not in BUILTINS:
            raise InputError(f"unknown builtin {name!r}; choose from {', '.join(BUILTINS)}")
        raw = resources.files("fractal_mra").joinpath("data", f"{name}.json").read_bytes()
    else:
        try:
            raw = Path(path).read_bytes()
        except OSError as exc:
            raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: malformed JSON ({exc.msg} at line {exc.lineno})") from exc
    if not isinstance(data, dict):
        raise InputError(f"{path}: top level must be an object")
    try:
        system = system_from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{path}: invalid system description: {exc}") from exc
    return system, raw


def _digest(*parts: bytes) -> str:
    h = hashlib.sha256()
    for part in parts:
        h.update(part)
    return h.hexdigest()


def _meta(args, spec_bytes: bytes, tolerances: dict) -> dict:
    return {
        "command": args.command_name,
        "spec_hash": _digest(spec_bytes),
        "seed": getattr(args, "seed", 0),
        "tolerances": tolerances,
        "budget": budget(),
        "version": __version__,
    }


def _emit_json(args, payload: dict):
    text = json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _json_default(obj):
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def _emit_csv(args, header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(v)) for v in row])
    if args.out:
        Path(args.out).write_text(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())


def _number(text: str) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise InputError(f"not a number: {text!r}") from exc


def _number_list(text: str) -> list:
    parts = [t for t in text.replace(" ", "").strip("{}[]").split(",") if t]
    if not parts:
        raise InputError("empty list")
    return [_number(t) for t in parts]


def _positive(name: str, value: float):
    if not value > 0:
        raise InputError(f"{name} must be positive")


# commands ----------------------------------------------------------------------

def cmd_validate(args) -> int:
    system, raw = _read_spec(args.spec)
    report = validate(system)
    payload = {
        "meta": _meta(args, raw, {}),
        "ok": report.ok,
        "violations": report.violations,
        "N": system.N,
        "A": list(system.core),
        "gaps": list(system.gaps),
        "system": system_to_dict(system),
    }
    _emit_json(args, payload)
    return EXIT_OK if report.ok else EXIT_MATH


def cmd_scaling_plot(args) -> int:
    system, _ = _read_spec(args.spec)
    report = validate(system)
    if not report.ok:
        raise InputError("invalid system: " + "; ".join(report.violations))
    lo, hi = _parse_range(args.range)
    if args.samples < 2:
        raise InputError("--samples must be >= 2")
    xs = np.linspace(lo, hi, args.samples)
    ys = np.asarray(scaling_eval(system, xs), dtype=float)
    if not np.all(np.isfinite(ys)):
        print("error: non-finite scaling values", file=sys.stderr)
        return EXIT_NUMERIC
    _emit_csv(args, ["x", "sigma"], zip(xs, ys))
    return EXIT_OK


def _parse_range(text: str):
    vals = _number_list(text)
    if len(vals) != 2 or not vals[0] < vals[1]:
        raise InputError("--range expects 'lo,hi' with lo < hi")
    return float(vals[0]), float(vals[1])


def cmd_wavelet_report(args) -> int:
    from .wavelet import (
        WaveletSystem,
        filter_matrix_unitary_check,
        gram_matrix,
        gram_report,
        mothers_by_composition,
        operator_identity_suite,
        scaling_equation_check,
        wavelet_window,
    )

    _positive("--tol", args.tol)
    system, raw = _read_spec(args.spec)
    report = validate(system)
    if not report.ok:
        raise InputError("invalid system: " + "; ".join(report.violations))
    ws = WaveletSystem.build(system)
    rng = np.random.default_rng(args.seed)

    idx = wavelet_window(ws, args.levels, args.shifts)
    G = gram_matrix([ws.basis_function(*t) for t in idx])
    gram = gram_report(G)
    composed = mothers_by_composition(system, ws.filters)
    mothers_ok = all(a.allclose(b, args.tol) for a, b in zip(ws.mothers, composed))
    z = np.exp(2j * np.pi * rng.random(16))
    filt_dev = filter_matrix_unitary_check(ws.filters, z)
    ops = operator_identity_suite(system, rng, args.samples)
    points = rng.uniform(-2.0, 2.0, args.samples)
    scal = scaling_equation_check(ws, points)

    payload = {
        "meta": _meta(args, raw, {"gram": args.tol}),
        "N": system.N,
        "A": list(system.core),
        "window": {"levels": args.levels, "shifts": args.shifts},
        "gram": gram,
        "gram_digest": _digest(np.ascontiguousarray(G).tobytes()),
        "filter_unitarity_dev": filt_dev,
        "mothers_match_composition": mothers_ok,
        "mothers": [m.to_json() for m in ws.mothers],
        "operator_identities": ops,
        "scaling_equation": scal,
    }
    _emit_json(args, payload)
    if not ops["ok"] or scal["violations"] or not mothers_ok:
        return EXIT_MATH
    if max(gram["max_offdiag"], gram["max_diag_dev"]) >= args.tol or filt_dev >= args.tol:
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_fourier_report(args) -> int:
    from .fourier import SpectralPair, find_dual_sets, fourier_report

    _positive("--tol", args.tol)
    if args.N is None or args.A is None:
        raise InputError("--N and --A are required")
    A = [int(a) for a in _number_list(args.A) if a.denominator == 1]
    if len(A) != len(_number_list(args.A)):
        raise InputError("--A must be integers")
    try:
        probe = SpectralPair(args.N, tuple(A), ())
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    if any(not 0 <= a < args.N for a in probe.A):
        raise InputError("A must lie in 0..N-1")
    if args.L in (None, "auto"):
        duals = find_dual_sets(probe.A, args.N)
        L = duals[0] if duals else None
    else:
        L = tuple(_number_list(args.L))
    spec_bytes = json.dumps({"N": args.N, "A": list(probe.A), "L": args.L or "auto"}, sort_keys=True).encode()
    if L is None:
        payload = {
            "meta": _meta(args, spec_bytes, {"tol": args.tol}),
            "N": args.N,
            "A": list(probe.A),
            "L": None,
            "dual_sets_mod_N": [],
            "verdict": "inconclusive",
            "reason": "no integer dual set exists mod N",
        }
        _emit_json(args, payload)
        return EXIT_MATH
    try:
        pair = SpectralPair(args.N, probe.A, L)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    report = fourier_report(
        pair,
        k_max=args.kmax,
        tol=args.tol,
        gram_size=args.gram_size,
        q_points=args.q_points,
        orth_tol=args.orth_tol,
        q_floor=args.q_floor,
        cycle_k_max=args.cycle_kmax,
    )
    report["meta"] = _meta(args, spec_bytes, {"mu_hat": args.tol, "orthogonality": args.orth_tol,
                                             "q_floor": args.q_floor})
    _emit_json(args, report)
    return {"ONB-consistent": EXIT_OK, "orthonormality-fails": EXIT_MATH}.get(report["verdict"], EXIT_NUMERIC)


def _conjugacy(args):
    from .conjugacy import Conjugacy

    src, raw_s = _read_spec(args.src)
    dst, raw_d = _read_spec(args.dst)
    if src.N != dst.N:
        raise InputError(f"branch counts differ: source N={src.N}, target N={dst.N}")
    try:
        conj = Conjugacy(src, dst)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    return conj, raw_s + b"\0" + raw_d


def cmd_conjugacy_eval(args) -> int:
    from .conjugacy import phi_error_bound, phi_eval, phi_inverse_error_bound, phi_inverse_eval

    conj, raw = _conjugacy(args)
    xs = [_number(t) for t in args.x]
    if any(not 0 <= x <= 1 for x in xs):
        raise InputError("--x values must lie in [0, 1]")
    xf = np.array([float(x) for x in xs])
    if args.inverse:
        vals, bound = phi_inverse_eval(conj, xf, args.depth), phi_inverse_error_bound(conj, args.depth)
    else:
        vals, bound = phi_eval(conj, xf, args.depth), phi_error_bound(conj, args.depth)
    payload = {
        "meta": _meta(args, raw, {"truncation": bound}),
        "map": "phi_inverse" if args.inverse else "phi",
        "depth": args.depth,
        "values": [{"x": str(x), "value": float(v), "error_bound": bound} for x, v in zip(xs, vals)],
    }
    _emit_json(args, payload)
    return EXIT_OK


def cmd_conjugacy_plot(args) -> int:
    from .conjugacy import plot_data

    conj, _ = _conjugacy(args)
    if args.samples < 2:
        raise InputError("--samples must be >= 2")
    xs, ys = plot_data(conj, args.samples, args.depth)
    if not np.all(np.diff(ys) >= 0):
        print("error: sampled phi is not monotone", file=sys.stderr)
        return EXIT_NUMERIC
    _emit_csv(args, ["x", "phi"], zip(xs, ys))
    return EXIT_OK


def cmd_conjugacy_gram(args) -> int:
    from .fourier import SpectralPair, find_dual_sets, generalized_fourier_gram, lambda_set

    _positive("--tol", args.tol)
    conj, raw = _conjugacy(args)
    pair_N, A = _linear_digits(conj.source)
    if args.L in (None, "auto"):
        duals = find_dual_sets(A, pair_N)
        if not duals:
            raise InputError("source has no integer dual set; pass --L")
        L = duals[0]
    else:
        L = tuple(_number_list(args.L))
    pair = SpectralPair(pair_N, A, L)
    k = 0
    while pair.p ** (k + 1) < args.count:
        k += 1
    lambdas = lambda_set(pair, k).smallest(args.count)
    res = generalized_fourier_gram(pair, conj, lambdas, depth=args.depth)
    payload = {
        "meta": _meta(args, raw, {"identity": args.tol}),
        "pair": {"N": pair.N, "A": list(pair.A), "L": [str(l) for l in pair.L]},
        "lambdas": [str(l) for l in lambdas],
        "depth": args.depth,
        "max_identity_deviation": res.max_identity_deviation,
        "max_path_discrepancy": res.max_discrepancy,
    }
    _emit_json(args, payload)
    return EXIT_OK if res.max_identity_deviation < args.tol else EXIT_NUMERIC


def _linear_digits(system: IFSystem):
    """(N, A) when the core maps are x -> (x + a)/N, else InputError."""
    from .ifs import Affine

    core = [system.maps[a] for a in system.core]
    if not all(isinstance(m, Affine) for m in core):
        raise InputError("conjugacy gram needs a linear source system")
    n = round(1.0 / core[0].a)
    digits = [round(m.b * n) for m in core]
    if any(abs(m.a - 1.0 / n) > 1e-12 or abs(m.b - d / n) > 1e-12 for m, d in zip(core, digits)):
        raise InputError("source core maps are not of the form (x + a)/N")
    return n, tuple(digits)


# parser --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fractal-mra", description="Wavelet and Fourier bases on fractals.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, tol=None):
        p.add_argument("--out", help="write output here instead of stdout")
        p.add_argument("--seed", type=int, default=0)
        if tol is not None:
            p.add_argument("--tol", type=float, default=tol)

    p = sub.add_parser("validate", help="check a system spec file")
    p.add_argument("--spec", required=True)
    common(p)
    p.set_defaults(func=cmd_validate, command_name="validate")

    sc = sub.add_parser("scaling").add_subparsers(dest="action", required=True)
    p = sc.add_parser("plot-data", help="CSV of the scaling function")
    p.add_argument("--spec", required=True)
    p.add_argument("--range", default="0,1")
    p.add_argument("--samples", type=int, default=1001)
    common(p)
    p.set_defaults(func=cmd_scaling_plot, command_name="scaling plot-data")

    wv = sub.add_parser("wavelet").add_subparsers(dest="action", required=True)
    p = wv.add_parser("report", help="Gram and operator checks of the wavelet system")
    p.add_argument("--spec", required=True)
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--shifts", type=int, default=8)
    p.add_argument("--samples", type=int, default=100, help="random functions/points for property checks")
    common(p, tol=1e-10)
    p.set_defaults(func=cmd_wavelet_report, command_name="wavelet report")

    fo = sub.add_parser("fourier").add_subparsers(dest="action", required=True)
    p = fo.add_parser("report", help="spectral checks for a linear Cantor measure")
    p.add_argument("--N", type=int)
    p.add_argument("--A", help="digits, e.g. 0,3")
    p.add_argument("--L", default="auto", help="dual set, e.g. 0,3/4, or 'auto'")
    p.add_argument("--kmax", type=int, default=12)
    p.add_argument("--gram-size", type=int, default=64)
    p.add_argument("--q-points", type=int, default=21)
    p.add_argument("--orth-tol", type=float, default=1e-6)
    p.add_argument("--q-floor", type=float, default=0.95)
    p.add_argument("--cycle-kmax", type=int, default=6)
    common(p, tol=1e-12)
    p.set_defaults(func=cmd_fourier_report, command_name="fourier report")

    cj = sub.add_parser("conjugacy").add_subparsers(dest="action", required=True)
    for name, func, help_ in (
        ("eval", cmd_conjugacy_eval, "evaluate phi or its inverse"),
        ("plot-data", cmd_conjugacy_plot, "CSV of phi on a uniform grid"),
        ("gram", cmd_conjugacy_gram, "Gram of transported characters"),
    ):
        p = cj.add_parser(name, help=help_)
        p.add_argument("--src", required=True)
        p.add_argument("--dst", required=True)
        if name == "eval":
            p.add_argument("--x", nargs="+", required=True)
            p.add_argument("--inverse", action="store_true")
            p.add_argument("--depth", type=int, default=40)
            common(p)
        elif name == "plot-data":
            p.add_argument("--samples", type=int, default=1024)
            p.add_argument("--depth", type=int, default=40)
            common(p)
        else:
            p.add_argument("--L", default="auto")
            p.add_argument("--count", type=int, default=8)
            p.add_argument("--depth", type=int, default=12)
            common(p, tol=2e-3)
        p.set_defaults(func=func, command_name=f"conjugacy {name}")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        budget()
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    for name in ("depth", "kmax", "levels", "shifts"):
        v = getattr(args, name, None)
        if v is not None and v < 0:
            print(f"error: --{name} must be >= 0", file=sys.stderr)
            return EXIT_INPUT
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except BudgetExceeded as exc:
        print(f"error: {exc} (raise FRACTAL_MRA_BUDGET to allow)", file=sys.stderr)
        return EXIT_INPUT
    except ArithmeticError as exc:
        print(f"error: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
