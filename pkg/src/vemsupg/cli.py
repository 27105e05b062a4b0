"""Command-line front end.

Subcommands::

    vemsupg mesh --family m1 --n 10 --out mesh.txt
    vemsupg solve --config run.json
    vemsupg convergence --config run.json
    vemsupg sweep-alpha --config run.json
    vemsupg layer --config run.json

Configs are JSON objects. The problem is either ``"problem1"``,
``"layer"`` or ``"custom"``; custom coefficients are expressions in
``x`` and ``y`` (``+ - * / ^``, ``sin``, ``cos``, ``exp``).
"""
from __future__ import annotations

import argparse
import ast
import csv
import json
import math
import operator
import sys
from pathlib import Path

import numpy as np

from vemsupg import analysis
from vemsupg.assembly import AssemblyOptions
from vemsupg.mesh import FAMILIES, MeshError, generate, read_mesh, write_mesh
from vemsupg.solver import SolveOptions, SolverError
from vemsupg.supg import CoefficientError, CoefficientField

CSV_COLUMNS = ("family", "k", "refinement", "h_max", "ndof", "err_l2", "err_h1", "err_energy",
               "rate_l2", "rate_h1", "rate_energy")
SWEEP_COLUMNS = ("family", "k", "alpha", "h_max", "ndof", "err_l2", "err_h1", "err_energy")


class ConfigError(ValueError):
    def __init__(self, field, message):
        self.field = field
        super().__init__(f"config field '{field}': {message}")


# ---------------------------------------------------------------- expressions

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNARY = {ast.USub: operator.neg, ast.UAdd: operator.pos}
_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}
_CONSTS = {"pi": math.pi}


def parse_expression(text: str):
    """Compile an arithmetic expression in ``x, y`` to a vectorised function."""
    if not isinstance(text, (str, int, float)) or isinstance(text, bool):
        raise ValueError(f"expected an expression string, got {text!r}")
    src = str(text).replace("^", "**")
    try:
        tree = ast.parse(src, mode="eval").body
    except SyntaxError as exc:
        raise ValueError(f"cannot parse {text!r}: {exc.msg}") from None
    _validate(tree, text)

    def fn(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = _eval(tree, {"x": x, "y": y})
        return np.broadcast_to(np.asarray(out, dtype=float), np.broadcast(x, y).shape).copy()

    fn.expression = str(text)
    return fn


def _validate(node, text):
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        _validate(node.left, text)
        _validate(node.right, text)
    elif isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
        _validate(node.operand, text)
    elif isinstance(node, ast.Call):
        if not (isinstance(node.func, ast.Name) and node.func.id in _FUNCS) \
                or len(node.args) != 1 or node.keywords:
            raise ValueError(f"unsupported function call in {text!r}")
        _validate(node.args[0], text)
    elif isinstance(node, ast.Name):
        if node.id not in ("x", "y") and node.id not in _CONSTS:
            raise ValueError(f"unknown name {node.id!r} in {text!r}")
    elif isinstance(node, ast.Constant):
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
            raise ValueError(f"unsupported literal in {text!r}")
    else:
        raise ValueError(f"unsupported syntax in {text!r}")


def _eval(node, env):
    if isinstance(node, ast.BinOp):
        return _BINOPS[type(node.op)](_eval(node.left, env), _eval(node.right, env))
    if isinstance(node, ast.UnaryOp):
        return _UNARY[type(node.op)](_eval(node.operand, env))
    if isinstance(node, ast.Call):
        return _FUNCS[node.func.id](_eval(node.args[0], env))
    if isinstance(node, ast.Name):
        return env[node.id] if node.id in env else _CONSTS[node.id]
    return float(node.value)


# ---------------------------------------------------------------- config


def load_config(path) -> dict:
    try:
        cfg = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError("config", f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"invalid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config", "top level must be an object")
    return cfg


def _get(cfg, key, kind, default=None, required=False):
    if key not in cfg:
        if required:
            raise ConfigError(key, "missing")
        return default
    val = cfg[key]
    if kind is float and isinstance(val, int) and not isinstance(val, bool):
        val = float(val)
    if not isinstance(val, kind) or (kind is int and isinstance(val, bool)):
        raise ConfigError(key, f"expected {getattr(kind, '__name__', kind)}, got {val!r}")
    return val


def _degrees(cfg):
    if "degrees" in cfg:
        ks = _get(cfg, "degrees", list)
    else:
        ks = [_get(cfg, "k", int, 1)]
    for k in ks:
        if not isinstance(k, int) or isinstance(k, bool) or k not in (1, 2, 3):
            raise ConfigError("degrees" if "degrees" in cfg else "k", "k must be 1, 2 or 3")
    return ks


def _families(cfg, default):
    if "families" in cfg:
        fams = _get(cfg, "families", list)
    elif "family" in cfg:
        fams = [_get(cfg, "family", str)]
    else:
        fams = list(default)
    for f in fams:
        if f not in FAMILIES:
            raise ConfigError("families" if "families" in cfg else "family",
                              f"unknown mesh family {f!r}")
    return fams


def assembly_options(cfg) -> AssemblyOptions:
    c_tau = _get(cfg, "C_tau", float, 0.5)
    if not 0 < c_tau < 1:
        raise ConfigError("C_tau", "must lie in (0, 1)")
    conv = _get(cfg, "convection", str, "consistent")
    if conv not in ("consistent", "volume"):
        raise ConfigError("convection", "must be 'consistent' or 'volume'")
    proj = _get(cfg, "function_projection", str, "k")
    if proj not in ("k", "k-1"):
        raise ConfigError("function_projection", "must be 'k' or 'k-1'")
    return AssemblyOptions(C_tau=c_tau, convection=conv, function_projection=proj)


def solver_options(cfg) -> SolveOptions:
    s = _get(cfg, "solver", dict, {})
    method = s.get("method", "direct")
    if method not in ("direct", "krylov"):
        raise ConfigError("solver.method", "must be 'direct' or 'krylov'")
    tol = s.get("tolerance", 1e-12)
    if not isinstance(tol, (int, float)) or isinstance(tol, bool) or not tol > 0:
        raise ConfigError("solver.tolerance", "must be a positive number")
    its = s.get("max_iterations", 2000)
    if not isinstance(its, int) or isinstance(its, bool) or its < 1:
        raise ConfigError("solver.max_iterations", "must be a positive integer")
    return SolveOptions(method, float(tol), its)


def _expr(text, field):
    try:
        return parse_expression(text)
    except ValueError as exc:
        raise ConfigError(field, str(exc)) from None


def _numeric_grad(u, step=1e-6):
    def grad(x, y):
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        gx = (u(x + step, y) - u(x - step, y)) / (2 * step)
        gy = (u(x, y + step) - u(x, y - step)) / (2 * step)
        return np.stack([gx, gy], axis=-1)

    return grad


def custom_problem(cfg) -> analysis.BenchmarkProblem:
    co = _get(cfg, "coefficients", dict, required=True)
    K = co.get("K", [["1", "0"], ["0", "1"]])
    if not (isinstance(K, list) and len(K) == 2 and all(isinstance(r, list) and len(r) == 2 for r in K)):
        raise ConfigError("coefficients.K", "expected a 2x2 list of expressions")
    Kf = [[_expr(K[i][j], f"coefficients.K[{i}][{j}]") for j in range(2)] for i in range(2)]
    beta = co.get("beta", ["0", "0"])
    if not (isinstance(beta, list) and len(beta) == 2):
        raise ConfigError("coefficients.beta", "expected a list of two expressions")
    bf = [_expr(beta[i], f"coefficients.beta[{i}]") for i in range(2)]
    gf = _expr(co.get("gamma", "0"), "coefficients.gamma")
    ff = _expr(co.get("f", "0"), "coefficients.f")
    uf = _expr(co["u"], "coefficients.u") if "u" in co else None
    g = _expr(co["g"], "coefficients.g") if "g" in co else uf
    if g is None:
        g = _expr("0", "coefficients.g")

    def Kfun(x, y):
        return np.stack([np.stack([Kf[i][0](x, y), Kf[i][1](x, y)], -1) for i in range(2)], -2)

    def betafun(x, y):
        return np.stack([bf[0](x, y), bf[1](x, y)], -1)

    coeffs = CoefficientField(K=Kfun, beta=betafun, gamma=gf, f=ff, u=uf)
    grad = _numeric_grad(uf) if uf is not None else None
    return analysis.BenchmarkProblem("custom", coeffs, g, uf, grad)


def build_problem(cfg, default="problem1") -> analysis.BenchmarkProblem:
    name = _get(cfg, "problem", str, default)
    if name == "problem1":
        alpha = _get(cfg, "alpha", float, 1e-7)
        if not alpha > 0:
            raise ConfigError("alpha", "must be positive")
        return analysis.problem1(alpha, _get(cfg, "reaction", bool, True))
    if name == "layer":
        eps = _get(cfg, "epsilon", float, 1e-6)
        if not eps > 0:
            raise ConfigError("epsilon", "must be positive")
        return analysis.layer_problem(eps)
    if name == "custom":
        return custom_problem(cfg)
    raise ConfigError("problem", f"unknown problem {name!r}")


def _mesh(cfg, default_n=5):
    if "mesh" in cfg:
        path = _get(cfg, "mesh", str)
        try:
            return read_mesh(path)
        except FileNotFoundError:
            raise ConfigError("mesh", f"file not found: {path}") from None
    fam = _families(cfg, ["m1"])
    if len(fam) != 1:
        raise ConfigError("family", "a single family is required here")
    n = _get(cfg, "n", int, default_n)
    if n < 2:
        raise ConfigError("n", "must be >= 2")
    return generate(fam[0], n)


# ---------------------------------------------------------------- output


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def write_table(path, columns, records):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for rec in records:
            w.writerow([_fmt(rec[c]) for c in columns])


def write_samples(path, x, y, u):
    write_table(path, ("x", "y", "u"),
                ({"x": float(a), "y": float(b), "u": float(c)} for a, b, c in zip(x, y, u)))


# ---------------------------------------------------------------- commands


def cmd_mesh(args) -> int:
    mesh = generate(args.family, args.n)
    write_mesh(mesh, args.out)
    print(f"wrote {mesh!r} to {args.out}")
    return 0


def cmd_solve(cfg) -> int:
    problem = build_problem(cfg)
    mesh = _mesh(cfg)
    (k,) = _degrees(cfg)
    sol = analysis.solve_problem(mesh, k, problem, assembly_options(cfg), solver_options(cfg))
    rep = analysis.compute_errors(sol)
    print(f"mesh {mesh!r} k={k} ndof={rep.ndof} h_max={rep.h_max:.6g}")
    if problem.has_exact:
        print(f"err_l2={rep.err_l2:.6e} err_h1={rep.err_h1:.6e} err_energy={rep.err_energy:.6e}")
    if "output" in cfg:
        rec = {"family": mesh.family or "file", "k": k, "refinement": 0, "h_max": rep.h_max,
               "ndof": rep.ndof, "err_l2": rep.err_l2, "err_h1": rep.err_h1,
               "err_energy": rep.err_energy, "rate_l2": None, "rate_h1": None, "rate_energy": None}
        write_table(_get(cfg, "output", str), CSV_COLUMNS, [rec])
    if "samples" in cfg:
        x, y = analysis.sample_grid(_get(cfg, "n_samples", int, 200))
        write_samples(_get(cfg, "samples", str), x, y, analysis.sample_solution(sol, x, y))
    return 0


def cmd_convergence(cfg) -> int:
    problem = build_problem(cfg)
    fams = _families(cfg, ["m1"])
    ks = _degrees(cfg)
    nref = _get(cfg, "refinements", int, 4)
    if nref < 1:
        raise ConfigError("refinements", "must be >= 1")
    base = _get(cfg, "base", int, 5)
    if base < 2:
        raise ConfigError("base", "must be >= 2")
    out = _get(cfg, "output", str, required=True)
    opts, sopts = assembly_options(cfg), solver_options(cfg)
    records = []
    for fam in fams:
        for k in ks:
            table = analysis.run_convergence(fam, k, nref, problem, base, opts, sopts)
            for rec in table.records():
                records.append(rec)
                print(" ".join(f"{c}={_fmt(rec[c])}" for c in CSV_COLUMNS))
    write_table(out, CSV_COLUMNS, records)
    return 0


def cmd_sweep_alpha(cfg) -> int:
    fams = _families(cfg, ["m1", "m4"])
    ks = _degrees(cfg) if ("k" in cfg or "degrees" in cfg) else [1, 2, 3]
    n = _get(cfg, "n", int, 10)
    alphas = _get(cfg, "alphas", list, list(analysis.ALPHA_SWEEP))
    for a in alphas:
        if not isinstance(a, (int, float)) or isinstance(a, bool) or not a > 0:
            raise ConfigError("alphas", f"invalid diffusion scale {a!r}")
    reaction = _get(cfg, "reaction", bool, False)
    out = _get(cfg, "output", str, required=True)
    opts, sopts = assembly_options(cfg), solver_options(cfg)
    records = []
    for fam in fams:
        mesh = generate(fam, n)
        for k in ks:
            for a, rep in analysis.sweep_alpha(mesh, k, [float(a) for a in alphas], reaction, opts, sopts):
                rec = {"family": fam, "k": k, "alpha": a, "h_max": rep.h_max, "ndof": rep.ndof,
                       "err_l2": rep.err_l2, "err_h1": rep.err_h1, "err_energy": rep.err_energy}
                records.append(rec)
                print(" ".join(f"{c}={_fmt(rec[c])}" for c in SWEEP_COLUMNS))
    write_table(out, SWEEP_COLUMNS, records)
    return 0


def cmd_layer(cfg) -> int:
    problem = build_problem(cfg, default="layer")
    mesh = _mesh(cfg, default_n=40)
    (k,) = _degrees(cfg)
    rep = analysis.layer_problem_report(mesh, k, problem, _get(cfg, "n_samples", int, 200),
                                        assembly_options(cfg), solver_options(cfg))
    print(f"mesh {mesh!r} k={k}")
    print(f"min={rep.u_min:.6g} max={rep.u_max:.6g} "
          f"plateau_one={rep.plateau_one:.3e} plateau_zero={rep.plateau_zero:.3e}")
    if rep.u_min < 0 or rep.u_max > 1:
        print("note: undershoot/overshoot near the layer")
    if "samples" in cfg:
        write_samples(_get(cfg, "samples", str), rep.x, rep.y, rep.u)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vemsupg", description="Nonconforming SUPG virtual elements")
    sub = p.add_subparsers(dest="command", required=True)
    m = sub.add_parser("mesh", help="generate a mesh file")
    m.add_argument("--family", required=True, choices=FAMILIES)
    m.add_argument("--n", required=True, type=int)
    m.add_argument("--out", required=True)
    for name in ("solve", "convergence", "sweep-alpha", "layer"):
        s = sub.add_parser(name)
        s.add_argument("--config", required=True)
    return p


COMMANDS = {"solve": cmd_solve, "convergence": cmd_convergence,
            "sweep-alpha": cmd_sweep_alpha, "layer": cmd_layer}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "mesh":
            return cmd_mesh(args)
        return COMMANDS[args.command](load_config(args.config))
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (MeshError, ValueError, CoefficientError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"error: solver failed: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
