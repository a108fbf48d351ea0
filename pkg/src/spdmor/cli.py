"""Command-line interface: ``spdmor {reduce,compare,validate,gen}``.

Exit codes: 0 success, 1 input error, 2 iteration cap reached (``reduce``
only; the report is still written).

System files are JSON objects with keys ``A``, ``B``, ``C`` (row-major
nested lists) and an optional ``"gradient_system": true``, in which case
``C`` may be omitted and is taken as ``B^T``.  Wherever a file is expected,
``builtin:NAME`` selects a bundled fixture (see ``builtin_names()``).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import baselines
from .baselines import StiefelConfig
from .lti import GradientSystem, LtiSystem, ReducedSystem
from .manifold import ProductPoint
from .matlib import NotPositiveDefinite, sym
from .objective import stiefel_point
from .optimizer import TrustRegionConfig, trust_region_minimize
from .systems import random_system

__all__ = ["main", "load_system", "load_init", "write_report", "builtin_names", "InputError"]

EXIT_OK, EXIT_INPUT, EXIT_CAP = 0, 1, 2
METHODS = ("tr", "tr-gradient", "bt", "stiefel")
TRACE_FIELDS = ("iter", "J", "grad_norm", "delta", "rho", "accepted")


class InputError(Exception):
    """Bad user input; reported on stderr with exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# files


def builtin_names() -> list[str]:
    data = resources.files("spdmor") / "data"
    return sorted(p.name[:-5] for p in data.iterdir() if p.name.endswith(".json"))


def _read_json(spec: str) -> dict:
    if spec.startswith("builtin:"):
        name = spec[len("builtin:"):]
        if name not in builtin_names():
            raise InputError(f"unknown builtin {name!r}; available: {', '.join(builtin_names())}")
        text = (resources.files("spdmor") / "data" / f"{name}.json").read_text()
    else:
        try:
            text = Path(spec).read_text()
        except OSError as exc:
            raise InputError(f"cannot read {spec}: {exc.strerror or exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed JSON in {spec}: {exc}") from None
    if not isinstance(doc, dict):
        raise InputError(f"malformed JSON in {spec}: top level must be an object")
    return doc


def _matrix(doc: dict, key: str, spec: str) -> np.ndarray:
    if key not in doc:
        raise InputError(f"{spec}: missing key {key!r}")
    try:
        M = np.array(doc[key], dtype=float)
    except (TypeError, ValueError):
        raise InputError(f"{spec}: {key} is not a rectangular numeric array") from None
    if M.ndim != 2 or M.size == 0:
        raise InputError(f"{spec}: {key} must be a non-empty 2-D array")
    if not np.all(np.isfinite(M)):
        raise InputError(f"{spec}: {key} has non-finite entries")
    return M


def _raw_system(spec: str):
    doc = _read_json(spec)
    gradient = bool(doc.get("gradient_system", False))
    A = _matrix(doc, "A", spec)
    B = _matrix(doc, "B", spec)
    C = _matrix(doc, "C", spec) if (not gradient or "C" in doc) else B.T
    if gradient and not np.array_equal(C, B.T):
        raise InputError(f"{spec}: gradient_system is set but C differs from B^T")
    return A, B, C, gradient


def load_system(spec: str):
    """Read a system file: :class:`GradientSystem` if flagged, else :class:`LtiSystem`."""
    A, B, C, gradient = _raw_system(spec)
    try:
        return GradientSystem(A, B) if gradient else LtiSystem(A, B, C)
    except NotPositiveDefinite as exc:
        raise InputError(f"{spec}: A is not positive definite ({exc})") from None
    except ValueError as exc:
        raise InputError(f"{spec}: {exc}") from None


def load_init(spec: str) -> dict:
    """Read an initial-point file with either ``U`` or ``A_r``, ``B_r`` [, ``C_r``]."""
    doc = _read_json(spec)
    if "U" in doc:
        return {"U": _matrix(doc, "U", spec)}
    out = {"A_r": _matrix(doc, "A_r", spec), "B_r": _matrix(doc, "B_r", spec)}
    if "C_r" in doc:
        out["C_r"] = _matrix(doc, "C_r", spec)
    return out


def _dump(obj, path: str) -> None:
    # repr-based float output round-trips exactly (17 significant digits)
    Path(path).write_text(json.dumps(obj, indent=1) + "\n")


def _finite_or_none(x):
    return float(x) if x is not None and math.isfinite(x) else None


def report_dict(rep: baselines.ReductionReport) -> dict:
    red = rep.reduced
    return {
        "method": rep.method,
        "r": red.r,
        "status": rep.status,
        "h2_error": _finite_or_none(rep.h2_error),
        "relative_h2_error": _finite_or_none(rep.relative_h2_error),
        "symmetry_defect": float(rep.symmetry_defect),
        "spd_flag": bool(rep.spd_flag),
        "iterations": rep.iterations,
        "grad_norm": _finite_or_none(rep.grad_norm),
        "wall_time_ms": rep.wall_time * 1e3,
        "reduced": {"A_r": red.A_r.tolist(), "B_r": red.B_r.tolist(), "C_r": red.C_r.tolist()},
    }


def write_report(rep: baselines.ReductionReport, path: str) -> None:
    _dump(report_dict(rep), path)


# ---------------------------------------------------------------------------
# reduce


def _check_r(r: int, n: int) -> None:
    if r < 1:
        raise InputError(f"r must be positive, got {r}")
    if r >= n:
        raise InputError(f"r must be less than n (r={r}, n={n})")


def _init_basis(full: LtiSystem, r: int, init: Optional[dict], seed: Optional[int]):
    if init is not None and "U" in init:
        U = init["U"]
        if U.shape != (full.n, r):
            raise InputError(f"init U has shape {U.shape}, expected {(full.n, r)}")
        # published bases are rounded; use the nearest orthonormal matrix
        return baselines.polar_orthonormalize(U)
    if seed is not None:
        rng = np.random.default_rng(seed)
        return baselines.polar_orthonormalize(rng.standard_normal((full.n, r)))
    return None


def _init_point(full, r, init_arg, seed, stiefel_cfg, gradient: bool) -> ProductPoint:
    lti_full = full.as_lti() if isinstance(full, GradientSystem) else full
    if init_arg == "bt":
        pt = baselines.project_to_manifold(baselines.balanced_truncation(lti_full, r))
        A_r, B_r, C_r = pt.A_r, pt.B_r, pt.C_r
    elif init_arg == "stiefel":
        U0 = _init_basis(lti_full, r, None, seed)
        U, _ = baselines.stiefel_descent(lti_full, r, U0, stiefel_cfg, strict=False)
        pt = stiefel_point(lti_full, U)
        A_r, B_r, C_r = pt.A_r, pt.B_r, pt.C_r
    else:
        init = load_init(init_arg)
        if "U" in init:
            pt = stiefel_point(lti_full, _init_basis(lti_full, r, init, None))
            A_r, B_r, C_r = pt.A_r, pt.B_r, pt.C_r
        else:
            A_r, B_r, C_r = init["A_r"], init["B_r"], init.get("C_r")
            if C_r is None and not gradient:
                raise InputError(f"{init_arg}: C_r is required for method tr")
            if A_r.shape != (r, r):
                raise InputError(f"init A_r has shape {A_r.shape}, expected {(r, r)}")
    try:
        return ProductPoint(A_r, B_r, None if gradient else C_r)
    except (NotPositiveDefinite, ValueError) as exc:
        raise InputError(f"invalid initial point: {exc}") from None


def _run_reduce(args) -> int:
    full = load_system(args.input)
    lti_full = full.as_lti() if isinstance(full, GradientSystem) else full
    _check_r(args.r, lti_full.n)
    if args.method == "tr-gradient" and not isinstance(full, GradientSystem):
        raise InputError("method tr-gradient requires a gradient_system input")
    if args.max_iters is not None and args.max_iters < 0:
        raise InputError("--max-iters must be non-negative")
    if args.tol is not None and not args.tol >= 0:
        raise InputError("--tol must be non-negative")

    st_kwargs = {"grad_tol": args.tol}
    if args.max_iters is not None:
        st_kwargs["max_iters"] = args.max_iters
    stiefel_cfg = StiefelConfig(**st_kwargs)
    trace_rows = []

    if args.method == "bt":
        t0 = time.perf_counter()
        red = baselines.balanced_truncation(lti_full, args.r)
        rep = baselines.report_for("bt", lti_full, red, time.perf_counter() - t0)
    elif args.method == "stiefel":
        init = None
        if args.init not in (None, "stiefel", "bt"):
            init = load_init(args.init)
            if "U" not in init:
                raise InputError(f"{args.init}: method stiefel needs an init file with U")
        U0 = _init_basis(lti_full, args.r, init, args.seed)
        _, rep = baselines.stiefel_descent(lti_full, args.r, U0, stiefel_cfg, strict=False)
    else:
        gradient = args.method == "tr-gradient"
        system = full if gradient else lti_full
        # the warm start gets the default budget; --max-iters bounds the main run
        x0 = _init_point(full, args.r, args.init or "bt", args.seed, StiefelConfig(), gradient)
        tr_kwargs = {"grad_tol": args.tol}
        if args.max_iters is not None:
            tr_kwargs["max_outer_iters"] = args.max_iters
        t0 = time.perf_counter()
        x, state = trust_region_minimize(system, x0, TrustRegionConfig(**tr_kwargs), trace_rows.append)
        red = ReducedSystem(x.A_r, x.B_r, x.B_r.T if gradient else x.C_r)
        rep = baselines.report_for(
            args.method, lti_full, red, time.perf_counter() - t0,
            iterations=state.iter, grad_norm=state.grad_norm, status=state.status,
        )

    write_report(rep, args.output)
    if args.trace:
        if args.method in ("bt", "stiefel"):
            print(f"note: no iteration trace for method {args.method}", file=sys.stderr)
        else:
            with open(args.trace, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(TRACE_FIELDS)
                for rec in trace_rows:
                    w.writerow([rec.iter] + [repr(float(v)) for v in (rec.J, rec.grad_norm, rec.delta, rec.rho)]
                               + [int(rec.accepted)])
    print(
        f"{rep.method}: ||G-G_r|| = {rep.h2_error:.6g} (relative {rep.relative_h2_error:.3e}), "
        f"SPD A_r: {'yes' if rep.spd_flag else 'no'}, status: {rep.status}"
    )
    return EXIT_CAP if rep.status in ("max_iters", "line search failed") else EXIT_OK


# ---------------------------------------------------------------------------
# compare, validate, gen


def _parse_r_list(text: str) -> list[int]:
    try:
        rs = [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise InputError(f"--r expects comma-separated integers, got {text!r}") from None
    if not rs:
        raise InputError("--r is empty")
    return rs


def _run_compare(args) -> int:
    full = load_system(args.input)
    lti_full = full.as_lti() if isinstance(full, GradientSystem) else full
    rs = _parse_r_list(args.r)
    for r in rs:
        _check_r(r, lti_full.n)
    methods = ["bt", "stiefel", "tr"] + (["tr-gradient"] if lti_full.is_gradient_system() else [])
    rows = []
    for r in rs:
        reps = {rep.method: rep for rep in baselines.compare_methods(lti_full, r, seed=args.seed)}
        rows.append([r] + [repr(float(reps[m].relative_h2_error)) for m in methods])
        print(f"r={r}: " + ", ".join(f"{m} {reps[m].relative_h2_error:.3e}" for m in methods))
    with open(args.output, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["r"] + methods)
        w.writerows(rows)
    return EXIT_OK


def _run_validate(args) -> int:
    A, B, C, flagged = _raw_system(args.input)
    n = A.shape[0]
    print(f"n: {n}")
    print(f"m: {B.shape[1]}")
    print(f"p: {C.shape[0]}")
    if A.shape != (n, n) or B.shape[0] != n or C.shape[1] != n:
        print(f"dimensions: inconsistent (A {A.shape}, B {B.shape}, C {C.shape})")
        return EXIT_INPUT
    asym = float(np.linalg.norm(A - A.T))
    if asym > 1e-10 * max(float(np.linalg.norm(A)), np.finfo(float).tiny):
        print(f"symmetric: no (||A - A^T||_F={asym:.3e})")
        return EXIT_INPUT
    lam = np.linalg.eigvalsh(sym(A))
    lam_min = float(lam[0])
    spd = lam_min > 1e-12 * max(1.0, float(lam[-1]))
    print(f"SPD: {'yes' if spd else 'no'} (λ_min={lam_min:.6g})")
    if spd:
        print(f"stable: yes (poles of x' = -Ax + Bu in [{-lam[-1]:.6g}, {-lam_min:.6g}])")
    else:
        print("stable: not guaranteed")
    gdef = float(np.linalg.norm(C - B.T)) if C.shape == B.T.shape else math.inf
    is_grad = gdef == 0.0
    detail = f"||C-B^T||_F={gdef:.3e}" if math.isfinite(gdef) else "C and B^T differ in shape"
    print(f"gradient system: {'yes' if is_grad else 'no'} ({detail}{', flagged' if flagged else ''})")
    return EXIT_OK if spd else EXIT_INPUT


def system_dict(system) -> dict:
    if isinstance(system, GradientSystem):
        return {"A": system.A.tolist(), "B": system.B.tolist(), "gradient_system": True}
    return {"A": system.A.tolist(), "B": system.B.tolist(), "C": system.C.tolist()}


def _run_gen(args) -> int:
    if args.p is None and not args.gradient:
        raise InputError("--p is required unless --gradient is given")
    if min(args.n, args.m, args.p or args.m) < 1:
        raise InputError("dimensions must be positive")
    system = random_system(args.n, args.m, args.p or args.m, args.seed, gradient=args.gradient)
    _dump(system_dict(system), args.output)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="spdmor", description="Structure-preserving H2 model reduction.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("reduce", help="reduce one system to order r")
    p.add_argument("--input", required=True, help="system file or builtin:NAME")
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--method", choices=METHODS, default="tr")
    p.add_argument("--init", help="bt, stiefel, or a file with U or A_r/B_r[/C_r] (default: bt)")
    p.add_argument("--seed", type=int, help="random orthonormal start for Stiefel descent (method stiefel, --init stiefel)")
    p.add_argument("--tol", type=float, help="gradient-norm stopping tolerance")
    p.add_argument("--max-iters", type=int, help="outer iteration cap")
    p.add_argument("--output", required=True, help="report JSON")
    p.add_argument("--trace", help="per-iteration CSV (trust-region methods)")
    p.set_defaults(func=_run_reduce)

    p = sub.add_parser("compare", help="relative H2 errors of all methods for several r")
    p.add_argument("--input", required=True)
    p.add_argument("--r", required=True, help="comma-separated orders, e.g. 6,8,10")
    p.add_argument("--output", required=True, help="CSV table")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_run_compare)

    p = sub.add_parser("validate", help="check a system file")
    p.add_argument("--input", required=True)
    p.set_defaults(func=_run_validate)

    p = sub.add_parser("gen", help="write a seeded random SPD system")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--p", type=int)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--gradient", action="store_true", help="C = B^T; --p is ignored")
    p.add_argument("--output", required=True)
    p.set_defaults(func=_run_gen)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
