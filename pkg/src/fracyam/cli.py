"""Command-line entry point: ``fyam <subcommand> [flags]``.

Every subcommand writes a table (CSV or JSON) whose rows echo the run
parameters.  Values are printed with ``repr`` so identical inputs give
byte-identical output.  Exit codes: 0 success, 1 a verify criterion
failed, 2 invalid input, 3 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from .errors import ConvergenceError, FitError, FracYamError

EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_NONCONVERGED = 0, 1, 2, 3

SUBCOMMANDS = ("constants", "bubble", "dtn", "minimize", "continue", "expand", "verify")

COLUMNS = {
    "constants": ("quantity", "value"),
    "bubble": ("r", "w", "w_pow_2star", "neumann_trace"),
    "dtn": ("k", "symbol", "k_pow_2gamma", "rel_error"),
    "minimize": ("beta", "theta", "iterations", "converged", "constraint_residual", "el_residual",
                 "peak"),
    "continue": ("beta", "theta", "iterations", "converged", "constraint_residual", "el_residual",
                 "peak", "criterion"),
    "expand": ("quantity", "value", "stderr"),
    "verify": ("criterion", "title", "passed", "value", "target", "detail"),
}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


def _positive(kind):
    def conv(s):
        v = kind(s)
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {s}")
        return v

    return conv


def _float_list(s: str) -> list:
    try:
        return [float(v) for v in s.replace(";", ",").split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad number list {s!r}") from exc


def _int_range(s: str) -> list:
    """'1..8' or '1,2,5'."""
    try:
        if ".." in s:
            a, b = s.split("..")
            return list(range(int(a), int(b) + 1))
        return [int(v) for v in s.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad integer range {s!r}") from exc


def _default_workers() -> int:
    env = os.environ.get("FYAM_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _common(p: argparse.ArgumentParser, n: int, gamma: float) -> None:
    p.add_argument("--config", type=Path, help="flat key=value file; flags override it")
    p.add_argument("--n", type=int, default=n)
    p.add_argument("--gamma", type=float, default=gamma)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=_positive(int), default=None,
                   help="worker threads (default: FYAM_WORKERS, else all cores)")
    p.add_argument("--out", type=Path, default=None, help="output file (default stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def _grid(p, tangential=32, normal=200, height=20.0) -> None:
    p.add_argument("--grid-tangential", type=_positive(int), default=tangential)
    p.add_argument("--grid-normal", type=_positive(int), default=normal)
    p.add_argument("--height", type=_positive(float), default=height)


def _torus(p) -> None:
    _grid(p, 48, 120, 20.0)
    p.add_argument("--tol", type=_positive(float), default=1e-7)
    p.add_argument("--f", choices=("const", "bump"), default="bump", dest="f_kind")
    p.add_argument("--amplitude", type=float, default=0.5)
    p.add_argument("--width", type=_positive(float), default=0.5)
    p.add_argument("--Q", type=float, default=0.1)
    p.add_argument("--init", choices=("const", "random"), default="const")
    p.add_argument("--maxiter", type=_positive(int), default=5000)
    p.add_argument("--telemetry", type=Path, default=None)


def build_parser() -> argparse.ArgumentParser:
    top = _Parser(prog="fyam", description="Fractional Yamabe numerical toolkit")
    sub = top.add_subparsers(dest="subcommand", parser_class=_Parser)

    p = sub.add_parser("constants", help="kappa, alpha, 2*, m1, m21, m22, c1, c2")
    _common(p, 3, 0.5)

    p = sub.add_parser("bubble", help="bubble profile samples")
    _common(p, 3, 0.5)
    p.add_argument("--r2", type=_positive(float), default=5.0, help="largest radius sampled")
    p.add_argument("--points", type=_positive(int), default=21)
    p.add_argument("--lam", type=_positive(float), default=1.0)

    p = sub.add_parser("dtn", help="discrete Neumann symbol against |k|^(2 gamma)")
    _common(p, 2, 0.5)
    _grid(p)
    p.add_argument("--modes", type=_int_range, default=_int_range("1..6"))

    p = sub.add_parser("minimize", help="one subcritical minimisation on the flat 2-torus")
    _common(p, 2, 0.5)
    _torus(p)
    p.add_argument("--beta", type=_positive(float), default=2.0)

    p = sub.add_parser("continue", help="beta continuation up to 2*")
    _common(p, 2, 0.5)
    _torus(p)
    p.add_argument("--beta-schedule", type=_float_list,
                   default=[1.5, 2.0, 2.5, 2.75, 2.9, 2.95, 2.98, 3.0])

    p = sub.add_parser("expand", help="energy expansion for a model metric family")
    _common(p, 3, 0.5)
    p.add_argument("--case", choices=("A1", "A2", "A3"), default="A1")
    p.add_argument("--II-norm", type=float, default=1.0, dest="II_norm", help="|II|^2 (A1)")
    p.add_argument("--R-NN-N", type=float, default=-1.0, dest="R_NN_N", help="R_NN;N (A2)")
    p.add_argument("--S-norm", type=float, default=1.0, dest="S_norm", help="|R_iNjN|^2 (A3)")
    p.add_argument("--q", type=float, default=0.0, help="R_;NN (A3)")
    p.add_argument("--C", type=float, default=0.0, help="correction constant")
    p.add_argument("--scan-C1", action="store_true", dest="scan_C1")
    p.add_argument("--scan-C2", action="store_true", dest="scan_C2")
    p.add_argument("--eps-min", type=_positive(float), default=None)
    p.add_argument("--eps-max", type=_positive(float), default=None)
    p.add_argument("--eps-count", type=_positive(int), default=10)
    p.add_argument("--r2", type=_positive(float), default=1.0)

    p = sub.add_parser("verify", help="run the acceptance suite")
    _common(p, 3, 0.5)
    p.add_argument("--criteria", type=_int_range, default=list(range(1, 13)))
    return top


# --------------------------------------------------------------------------
# config files


def _read_config(path: Path) -> dict:
    out = {}
    try:
        text = path.read_text()
    except OSError as exc:
        raise _UsageError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise _UsageError(f"{path}:{lineno}: expected key=value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.lstrip("-")] = v
    return out


def _apply_config(argv: list) -> list:
    """Turn config entries into flags placed before the command-line ones."""
    if "--config" not in argv and not any(a.startswith("--config=") for a in argv):
        return argv
    pre = _Parser(add_help=False)
    pre.add_argument("--config", type=Path)
    known, _ = pre.parse_known_args(argv)
    if known.config is None:
        return argv
    cfg = _read_config(known.config)
    sub = argv[0] if argv and argv[0] in SUBCOMMANDS else cfg.pop("subcommand", None)
    cfg.pop("subcommand", None)
    if sub is None:
        raise _UsageError("no subcommand given")
    rest = argv[1:] if argv and argv[0] == sub else argv
    flags = []
    for k, v in cfg.items():
        flag = "--" + k.replace("_", "-")
        if v.lower() in ("true", "yes", "on"):
            flags.append(flag)
        elif v.lower() in ("false", "no", "off"):
            continue
        else:
            flags.extend([flag, v])
    return [sub] + flags + rest


# --------------------------------------------------------------------------
# output


def _fmt(v, as_text: bool = True):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v)) if as_text else float(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    return v


def _echo(args) -> dict:
    e = {"n": args.n, "gamma": args.gamma}
    for key in ("grid_tangential", "grid_normal", "height"):
        if hasattr(args, key):
            e[key] = getattr(args, key)
    e["seed"] = args.seed
    return e


def render(subcommand: str, rows: list, echo: dict, fmt: str) -> str:
    cols = list(COLUMNS[subcommand]) + list(echo)
    full = [{**r, **echo} for r in rows]
    if fmt == "json":
        data = {"subcommand": subcommand, "columns": cols,
                "rows": [{c: _fmt(r.get(c, ""), False) for c in cols} for r in full]}
        return json.dumps(data, indent=1) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in full:
        w.writerow([_fmt(r.get(c, "")) for c in cols])
    return buf.getvalue()


# --------------------------------------------------------------------------
# subcommands


def _cmd_constants(args) -> tuple[list, int]:
    from .params import c1, c2, make_params, m1, m21, m22

    p = make_params(args.n, args.gamma)
    rows = [{"quantity": k, "value": v} for k, v in p.as_dict().items() if k not in ("n", "gamma")]
    for name, fn in (("m1", m1), ("m21", m21), ("m22", m22), ("c1", c1), ("c2", c2)):
        try:
            rows.append({"quantity": name, "value": fn(args.n, args.gamma)})
        except FracYamError:
            rows.append({"quantity": name, "value": "undefined"})
    return rows, EXIT_OK


def _cmd_bubble(args) -> tuple[list, int]:
    from .bubbles import Bubble, neumann_trace_half, w_eval
    from .params import make_params

    p = make_params(args.n, args.gamma)
    b = Bubble(p, args.lam)
    r = np.linspace(0.0, args.r2, args.points)
    x = np.zeros((args.points, args.n))
    x[:, 0] = r
    w = w_eval(b, x)
    nt = neumann_trace_half(b, x) if p.is_half else [None] * len(r)
    rows = [{"r": ri, "w": wi, "w_pow_2star": wi**p.two_star,
             "neumann_trace": "" if ti is None else ti} for ri, wi, ti in zip(r, w, nt)]
    return rows, EXIT_OK


def _cmd_dtn(args) -> tuple[list, int]:
    from .extsolve import TorusExtensionProblem, dtn_symbol, graded_normal_grid
    from .params import make_params

    p = make_params(args.n, args.gamma)
    ext = TorusExtensionProblem(p, 2.0 * math.pi, args.grid_tangential,
                                graded_normal_grid(args.gamma, args.height, args.grid_normal))
    rows = []
    for k in args.modes:
        if k <= 0:
            raise _UsageError("modes must be positive integers")
        kv = np.zeros(args.n)
        kv[0] = k
        s = dtn_symbol(ext, kv)
        exact = float(k) ** (2.0 * args.gamma)
        rows.append({"k": k, "symbol": s, "k_pow_2gamma": exact, "rel_error": abs(s - exact) / exact})
    return rows, EXIT_OK


def _torus_problem(args, beta):
    from .acceptance import bump_problem

    if args.n != 2 or args.gamma != 0.5:
        raise _UsageError("minimize/continue run on the flat 2-torus with gamma = 1/2")
    amp = args.amplitude if args.f_kind == "bump" else 0.0
    prob = bump_problem(args.grid_tangential, beta, amp, args.width, args.Q, args.grid_normal,
                        args.height)
    return prob


def _result_row(beta, res) -> dict:
    return {"beta": beta, "theta": res.theta, "iterations": res.iterations,
            "converged": res.converged, "constraint_residual": res.constraint_residual,
            "el_residual": res.el_residual, "peak": res.peak}


def _cmd_minimize(args) -> tuple[list, int]:
    from .yamin import minimize_subcritical, write_telemetry

    prob = _torus_problem(args, args.beta)
    res = minimize_subcritical(prob, init=None if args.init == "const" else "random",
                               tol=args.tol, seed=args.seed, maxiter=args.maxiter)
    if args.telemetry is not None:
        write_telemetry(args.telemetry, res.history, _echo(args))
    return [_result_row(args.beta, res)], EXIT_OK if res.converged else EXIT_NONCONVERGED


def _cmd_continue(args) -> tuple[list, int]:
    from .yamin import beta_continuation, criterion_check

    sched = args.beta_schedule
    prob = _torus_problem(args, sched[0])
    init = None if args.init == "const" else np.random.default_rng(args.seed).random(
        prob.ext.grid_shape) + 0.5
    steps = beta_continuation(prob, sched, init=init, tol=args.tol, maxiter=args.maxiter)
    rows = [_result_row(s.beta, s.result) for s in steps]
    if abs(sched[-1] - prob.params.two_star) < 1e-12:
        rows[-1]["criterion"] = criterion_check(steps[-1].theta, float(prob.f.max()), prob.params)
    ok = all(s.result.converged for s in steps)
    return rows, EXIT_OK if ok else EXIT_NONCONVERGED


def _cmd_expand(args) -> tuple[list, int]:
    from . import expfit
    from .metric import flat_weyl_metric, normalized_ii_metric, trace_free_ii, umbilic_rnnn_metric
    from .params import make_params

    n = {"A1": 3, "A2": 4, "A3": 5}[args.case]
    if args.n not in (n, 3):
        raise _UsageError(f"case {args.case} lives in dimension n = {n}")
    args.n = n
    p = make_params(n, args.gamma)
    if args.case == "A1":
        mm = normalized_ii_metric(n, trace_free_ii(n, args.II_norm))
        kind = "psi1"
    elif args.case == "A2":
        mm = umbilic_rnnn_metric(n, args.R_NN_N)
        kind = "none"
    else:
        mm = flat_weyl_metric(n, trace_free_ii(n, args.S_norm), args.q)
        kind = "psi2"
    if args.scan_C1 and kind != "psi1" or args.scan_C2 and kind != "psi2":
        raise _UsageError(f"case {args.case} has no such correction to scan")
    eps = ()
    if args.eps_min is not None or args.eps_max is not None:
        hi = args.eps_max or args.r2 / 8.0
        lo = args.eps_min or args.r2 / 200.0
        if not lo < hi:
            raise _UsageError("need eps-min < eps-max")
        eps = tuple(np.geomspace(hi, lo, args.eps_count))
    workers = args.workers or _default_workers()
    run = expfit.ExpansionRun(p, mm, expfit.Correction(kind, args.C if kind != "none" else 0.0),
                              r2=args.r2, eps=eps, workers=workers)
    pieces = expfit.energy_pieces(run)
    fit = expfit.energy_expansion(run, pieces)
    rows = [{"quantity": f"coef[{lab}]", "value": c, "stderr": math.sqrt(max(v, 0.0))}
            for lab, c, v in zip(fit.basis, fit.coef, np.diag(fit.cov))]
    target = expfit.expected_log_coefficient(run)
    if target is not None:
        rows.append({"quantity": "target_log_coef", "value": target, "stderr": ""})
    if args.scan_C1 or args.scan_C2:
        rng = (-1.0, 0.5) if kind == "psi1" else (-0.6, 0.2)
        scan = expfit.scan_correction(run, kind, rng, 31 if kind == "psi1" else 33, pieces)
        rows += [{"quantity": "C_opt", "value": scan.C_opt, "stderr": ""},
                 {"quantity": "log_coef_at_C_opt", "value": scan.coef_at_opt,
                  "stderr": scan.err_at_opt},
                 {"quantity": "scan_r_squared", "value": scan.r_squared, "stderr": ""}]
    return rows, EXIT_OK


def _cmd_verify(args) -> tuple[list, int]:
    from .acceptance import run_criteria

    if any(k not in range(1, 13) for k in args.criteria):
        raise _UsageError("criteria are numbered 1..12")
    results = run_criteria(args.criteria, args.seed)
    for r in results:
        print(r.line(), file=sys.stderr)
    rows = [{"criterion": r.number, "title": r.title, "passed": r.passed, "value": r.value,
             "target": r.target, "detail": r.detail} for r in results]
    return rows, EXIT_OK if all(r.passed for r in results) else EXIT_FAILED


_COMMANDS = {
    "constants": _cmd_constants,
    "bubble": _cmd_bubble,
    "dtn": _cmd_dtn,
    "minimize": _cmd_minimize,
    "continue": _cmd_continue,
    "expand": _cmd_expand,
    "verify": _cmd_verify,
}


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(_apply_config(argv))
        if args.subcommand is None:
            raise _UsageError(parser.format_usage())
        np.random.seed(args.seed)
        rows, code = _COMMANDS[args.subcommand](args)
    except _UsageError as exc:
        print(str(exc).rstrip(), file=sys.stderr)
        return EXIT_USAGE
    except ConvergenceError as exc:
        print(f"fyam: not converged: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except FitError as exc:
        print(f"fyam: fit failed: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except (FracYamError, ValueError) as exc:
        print(f"fyam: invalid input: {exc}", file=sys.stderr)
        return EXIT_USAGE
    text = render(args.subcommand, rows, _echo(args), args.format)
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.write_text(text)
    return code


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
