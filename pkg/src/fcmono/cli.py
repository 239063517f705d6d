"""Command-line entry point ``fc``.

Every subcommand writes one JSON document (stdout or ``--json FILE``) that
embeds a run manifest.  Exit codes: 0 success, 1 check failure, 2 usage or
validation error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .connection import connection_at, integrability_residual
from .locus import distance_to_locus, expand_R
from .loops import LoopWord, compile_word, generator_library
from .operators import annihilation_residual, build_operator
from .params import Params, ParamsError, ToleranceProfile, index_maps, validate_params
from .relations import CHECK_NAMES, PINNED_CONVENTION, PINNED_ORIENTATION, full_report
from .series import default_eps, eval_series, frobenius_solution
from .transport import GeneratorCache, transport_word


class UsageError(Exception):
    pass


# -- deterministic JSON ----------------------------------------------------------------


def _fmt_float(v: float) -> str:
    if math.isnan(v) or math.isinf(v):
        return "null"
    text = format(v, ".17g")
    return text if any(ch in text for ch in ".e") else text + ".0"


def dumps(obj, indent: int = 0, step: int = 2) -> str:
    """JSON with insertion-ordered keys, 17 significant digits and complex as [re, im]."""
    pad = " " * (indent + step)
    end = " " * indent
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, np.generic):
        obj = obj.item()
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _fmt_float(obj)
    if isinstance(obj, complex):
        return f"[{_fmt_float(obj.real)}, {_fmt_float(obj.imag)}]"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{dumps(str(k))}: {dumps(v, indent + step, step)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, complex, bool, np.generic)) or v is None for v in obj):
            return "[" + ", ".join(dumps(v) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + dumps(v, indent + step, step) for v in obj) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


# -- manifest --------------------------------------------------------------------------


def manifest(args, tol: ToleranceProfile | None = None, P: Params | None = None, **extra) -> dict:
    params_hash = None
    if getattr(args, "params", None):
        params_hash = hashlib.sha256(Path(args.params).read_bytes()).hexdigest()
    m = P.m if P is not None else getattr(args, "m", None)
    eps = default_eps(m) if m else None
    out = {
        "tool": "fcmono",
        "version": __version__,
        "command": args.command,
        "params_sha256": params_hash,
        "tolerances": (tol or ToleranceProfile()).as_dict(),
        "eps": eps,
        "delta": eps / 8 if eps else None,
        "N": getattr(args, "N", None),
        "seed": args.seed,
        "convention": {"word_matrices": "M(gh) = M(h) M(g)", "product_ordering": PINNED_CONVENTION},
        "infinity_orientation": PINNED_ORIENTATION,
    }
    out.update(extra)
    return out


# -- argument helpers -----------------------------------------------------------------


def parse_point(text: str) -> np.ndarray:
    """``"RE,IM;RE,IM;..."`` -> complex vector."""
    try:
        coords = []
        for part in text.split(";"):
            re_s, im_s = part.split(",")
            coords.append(complex(float(re_s), float(im_s)))
    except ValueError as exc:
        raise UsageError(f"--x expects RE,IM[;RE,IM...], got {text!r}") from exc
    return np.array(coords)


def load_params(args) -> Params:
    if not args.params:
        raise UsageError("--params FILE is required")
    try:
        return Params.load(args.params)
    except FileNotFoundError as exc:
        raise UsageError(f"parameter file not found: {args.params}") from exc
    except (ParamsError, ValueError) as exc:
        raise UsageError(f"invalid parameter file {args.params}: {exc}") from exc


def tolerance_from(args) -> ToleranceProfile:
    try:
        return ToleranceProfile(ode_tol=args.ode_tol) if getattr(args, "ode_tol", None) else ToleranceProfile()
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def thread_count(args) -> int:
    env = os.environ.get("FC_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise UsageError(f"FC_THREADS must be an integer, got {env!r}") from exc
    return max(1, args.threads or os.cpu_count() or 1)


def _pair(z) -> list[float]:
    return [float(np.real(z)), float(np.imag(z))]


def _matrix(M) -> list:
    return [[complex(v) for v in row] for row in np.asarray(M)]


# -- subcommands -----------------------------------------------------------------------


def cmd_series(args):
    P = load_params(args)
    x = parse_point(args.x)
    if len(x) != P.m:
        raise UsageError(f"--x has {len(x)} coordinates, expected m={P.m}")
    sv = eval_series(P, x, args.N)
    doc = {"value": complex(sv.value), "truncation_estimate": float(sv.truncation_estimate), "N_used": sv.N_used}
    return doc, 0, P, None


def cmd_operators(args):
    P = load_params(args)
    ops = [build_operator(P, k) for k in range(P.m)]
    doc: dict = {
        "operators": [
            {"k": op.k + 1, "B_coeffs": list(op.B_coeffs), "A_coeffs": list(op.A_coeffs)} for op in ops
        ]
    }
    code = 0
    if args.check_annihilation:
        N = args.N or 40
        Js, _ = index_maps(P.p, P.m)
        table = []
        for J in Js:
            sol = frobenius_solution(P, J, N, cert_tol=math.inf)
            for op in ops:
                r = annihilation_residual(op, sol.lam, sol.coeffs, N - P.p)
                table.append({"k": op.k + 1, "J": list(J), "residual": r})
        worst = max(row["residual"] for row in table)
        doc["annihilation"] = {"N": N, "max_degree": N - P.p, "table": table, "max_residual": worst}
        code = 0 if worst < 1e-12 else 1
    return doc, code, P, None


def cmd_locus(args):
    if args.p is None or args.m is None:
        raise UsageError("--p and --m are required")
    try:
        R = expand_R(args.p, args.m)
    except (ValueError, OverflowError) as exc:
        raise UsageError(str(exc)) from exc
    poly = R.as_json()
    if args.emit_poly:
        Path(args.emit_poly).write_text(dumps(poly) + "\n")
    doc = {"p": args.p, "m": args.m, "degree": R.degree, "n_terms": len(poly), "polynomial": poly}
    return doc, 0, None, None


def _geometry(args) -> tuple[int, int, Params | None]:
    if args.params:
        P = load_params(args)
        return P.p, P.m, P
    if args.p is None or args.m is None:
        raise UsageError("give --params FILE or both --p and --m")
    return args.p, args.m, None


def cmd_loops(args):
    p, m, P = _geometry(args)
    try:
        word = LoopWord.parse(args.emit, m)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    loop = compile_word(word, generator_library(p, m), n_samples=args.samples)
    t, pts = loop.sample(args.samples)
    dist = distance_to_locus(pts, p, "x")
    doc = {
        "word": str(word),
        "margin": loop.margin,
        "n_segments": len(loop.segments),
        "t": t.tolist(),
        "point": [[_pair(v) for v in row] for row in pts],
        "distance": np.atleast_1d(dist).tolist(),
    }
    return doc, 0, P, None


def cmd_pfaffian(args):
    P = load_params(args)
    x = parse_point(args.x)
    if len(x) != P.m:
        raise UsageError(f"--x has {len(x)} coordinates, expected m={P.m}")
    cs = connection_at(P, x)
    doc = {
        "x": [complex(v) for v in x],
        "d_max": cs.d_max,
        "C": [_matrix(C) for C in cs.C],
        "diagnostics": {k: v for k, v in cs.diagnostics.items() if k != "d_max"},
        "integrability_residual": integrability_residual(cs),
    }
    return doc, 0, P, None


def cmd_monodromy(args):
    P = load_params(args)
    tol = tolerance_from(args)
    cache = GeneratorCache(P, tol, threads=thread_count(args))
    mode = args.mode or ("product" if args.cache_generators else "compiled")
    try:
        cm = transport_word(P, args.word, tol, cache, mode=mode)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    doc = {"word": args.word, "mode": mode, "M": _matrix(cm.M), "diagnostics": cm.diagnostics}
    if args.cache_generators:
        doc["generators"] = {f"M{g}": _matrix(M) for g, M in cache.matrices().items()}
    return doc, 0, P, tol


def cmd_verify(args):
    P = load_params(args)
    tol = tolerance_from(args)
    checks = CHECK_NAMES
    if args.checks:
        checks = tuple(c.strip() for c in args.checks.split(",") if c.strip())
        bad = sorted(set(checks) - set(CHECK_NAMES))
        if bad:
            raise UsageError(f"unknown checks {bad}; choose from {', '.join(CHECK_NAMES)}")
        if "validation" not in checks:
            checks = ("validation",) + checks
    rep = full_report(P, tol, checks, threads=thread_count(args))
    doc = rep.as_dict()
    doc["summary"] = rep.summary().splitlines()
    if not validate_params(P, tol).ok:
        return doc, 2, P, tol
    return doc, 0 if rep.passed else 1, P, tol


# -- parser ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", metavar="OUT", help="write the JSON document here instead of stdout")
    common.add_argument("--seed", type=int, default=0, help="seed for any randomness (default 0)")
    common.add_argument("--threads", type=int, default=None, help="worker threads (FC_THREADS overrides)")
    common.add_argument("--timing", action="store_true", help="add wall-clock timing to the manifest")

    parser = argparse.ArgumentParser(prog="fc", description="Numerical monodromy of the F_C^{p,m} system.")
    parser.add_argument("--version", action="version", version=f"fc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("series", parents=[common], help="evaluate the series at a point")
    s.add_argument("--params", required=True)
    s.add_argument("--x", required=True, help="RE,IM[;RE,IM...]")
    s.add_argument("--N", type=int, default=None)
    s.set_defaults(func=cmd_series)

    s = sub.add_parser("operators", parents=[common], help="operator coefficients and annihilation table")
    s.add_argument("--params", required=True)
    s.add_argument("--check-annihilation", action="store_true")
    s.add_argument("--N", type=int, default=None)
    s.set_defaults(func=cmd_operators)

    s = sub.add_parser("locus", parents=[common], help="exact expansion of the singular-locus polynomial")
    s.add_argument("--p", type=int, required=True)
    s.add_argument("--m", type=int, required=True)
    s.add_argument("--emit-poly", metavar="FILE")
    s.set_defaults(func=cmd_locus)

    s = sub.add_parser("loops", parents=[common], help="polyline dump of a compiled word")
    s.add_argument("--params")
    s.add_argument("--p", type=int)
    s.add_argument("--m", type=int)
    s.add_argument("--emit", required=True, metavar="WORD", help='e.g. "r0 r1 r0^-1"')
    s.add_argument("--samples", type=int, default=256)
    s.set_defaults(func=cmd_loops)

    s = sub.add_parser("pfaffian", parents=[common], help="connection matrices at a point")
    s.add_argument("--params", required=True)
    s.add_argument("--x", required=True)
    s.set_defaults(func=cmd_pfaffian)

    s = sub.add_parser("monodromy", parents=[common], help="circuit matrix of a word")
    s.add_argument("--params", required=True)
    s.add_argument("--word", required=True)
    s.add_argument("--ode-tol", type=float, default=None)
    s.add_argument("--cache-generators", action="store_true")
    s.add_argument("--mode", choices=["product", "compiled", "self-test"], default=None)
    s.set_defaults(func=cmd_monodromy)

    s = sub.add_parser("verify", parents=[common], help="run the relation checks")
    s.add_argument("--params", required=True)
    s.add_argument("--checks", metavar="LIST", help=f"comma-separated subset of {','.join(CHECK_NAMES)}")
    s.add_argument("--ode-tol", type=float, default=None)
    s.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    t0 = time.perf_counter()
    try:
        doc, code, P, tol = args.func(args)
    except UsageError as exc:
        print(f"fc {args.command}: error: {exc}", file=sys.stderr)
        return 2
    extra = {"timing_seconds": time.perf_counter() - t0} if args.timing else {}
    out = {"manifest": manifest(args, tol, P, **extra)} | doc
    text = dumps(out) + "\n"
    if args.json:
        Path(args.json).write_text(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
