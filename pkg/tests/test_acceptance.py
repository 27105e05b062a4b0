"""Acceptance suite: one PASS/FAIL line per criterion."""
import csv
import json
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from vemsupg.analysis import (ALPHA_SWEEP, compute_errors, layer_problem, layer_problem_report,
                              monomial_problem, problem1, solve_problem, sweep_alpha)
from vemsupg.assembly import assemble, element_system
from vemsupg.mesh import generate
from vemsupg.poly import dim_poly, exponents
from vemsupg.supg import DIVERGENCE_FREE, tau_from_bounds
from tests.conftest import cached_mesh, random_cells

RATE_FAMILIES = ("m1", "m2", "m4")
DEGREES = (1, 2, 3)


def report(capsys, criterion, ok, detail):
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}")


@pytest.fixture(scope="module")
def convergence_runs(tmp_path_factory):
    """Run the convergence CLI with one and with eight threads, concurrently."""
    root = tmp_path_factory.mktemp("conv")
    procs = {}
    for threads in (1, 8):
        out = root / f"threads{threads}.csv"
        cfg_t = root / f"conv{threads}.json"
        cfg_t.write_text(json.dumps({"problem": "problem1", "families": list(RATE_FAMILIES),
                                     "degrees": list(DEGREES), "refinements": 4, "base": 5,
                                     "output": str(out)}))
        env = dict(os.environ, VEMSUPG_THREADS=str(threads))
        procs[threads] = (subprocess.Popen([sys.executable, "-m", "vemsupg.cli", "convergence",
                                            "--config", str(cfg_t)], env=env,
                                           stdout=subprocess.DEVNULL, stderr=subprocess.PIPE), out)
    results = {}
    for threads, (proc, out) in procs.items():
        _, err = proc.communicate()
        assert proc.returncode == 0, err.decode()
        results[threads] = out
    return results


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_criterion1_patch(capsys):
    start = time.perf_counter()
    worst = 0.0
    for family in ("m1", "m2", "m3", "m4"):
        mesh = cached_mesh(family, 5)
        for k in DEGREES:
            for mu, nu in exponents(k):
                prob = monomial_problem(mu, nu, beta=(1.0, 1.0), gamma=1.0)
                worst = max(worst, compute_errors(solve_problem(mesh, k, prob)).err_l2)
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and elapsed < 60
    report(capsys, 1, ok, f"patch test max relative L2 = {worst:.2e} (<= 1e-9), "
                          f"{elapsed:.1f} s (< 60 s)")
    assert ok


@pytest.mark.slow
def test_criterion2_rates(capsys, convergence_runs):
    rows = _rows(convergence_runs[1])
    assert len(rows) == len(RATE_FAMILIES) * len(DEGREES) * 4
    failures = []
    lines = []
    for fam in RATE_FAMILIES:
        for k in DEGREES:
            last = [r for r in rows if r["family"] == fam and int(r["k"]) == k][-1]
            rh1, rl2 = float(last["rate_h1"]), float(last["rate_l2"])
            lines.append(f"{fam} k={k}: H1 {rh1:.2f} (>= {k - 0.2:.1f}), "
                         f"L2 {rl2:.2f} (>= {k + 0.7:.1f})")
            if not (rh1 >= k - 0.2 and rl2 >= k + 1 - 0.3):
                failures.append(f"{fam} k={k}")
    report(capsys, 2, not failures, "final rates; " + "; ".join(lines))
    assert not failures


@pytest.mark.slow
def test_energy_rates(capsys, convergence_runs):
    rows = _rows(convergence_runs[1])
    bad = []
    for fam in RATE_FAMILIES:
        for k in DEGREES:
            last = [r for r in rows if r["family"] == fam and int(r["k"]) == k][-1]
            if not float(last["rate_energy"]) >= k - 0.2:
                bad.append(f"{fam} k={k}: {float(last['rate_energy']):.2f}")
    with capsys.disabled():
        print(f"\n[{'PASS' if not bad else 'FAIL'}] property: final energy rate >= k - 0.2"
              + ("" if not bad else " failing " + ", ".join(bad)))
    assert not bad


@pytest.mark.slow
def test_criterion3_alpha_sweep(capsys):
    worst = 0.0
    parts = []
    for fam in ("m1", "m4"):
        mesh = generate(fam, 10)
        for k in DEGREES:
            errs = np.array([r.err_h1 for _, r in sweep_alpha(mesh, k, ALPHA_SWEEP, reaction=False)])
            assert np.isfinite(errs).all()
            ratio = errs.max() / errs.min()
            worst = max(worst, ratio)
            parts.append(f"{fam} k={k}: {ratio:.3f}")
    ok = worst <= 10
    report(capsys, 3, ok, "max/min H1 error over alpha in [1e-11, 1e-4] <= 10; " + ", ".join(parts))
    assert ok


@pytest.mark.slow
@pytest.mark.parametrize("family", ["m1", "m2"])
@pytest.mark.parametrize("k", [1, 3])
def test_criterion4_layer(capsys, family, k):
    mesh = cached_mesh(family, 40)
    start = time.perf_counter()
    rep = layer_problem_report(mesh, k)
    elapsed = time.perf_counter() - start
    peak = float(np.nanmax(np.abs(rep.u)))
    ok = (rep.plateau_one <= 0.05 and rep.plateau_zero <= 0.05 and peak <= 2
          and np.isfinite(rep.u).all() and elapsed < 60)
    report(capsys, 4, ok, f"layer {family} 40x40 k={k}: plateau |u-1| {rep.plateau_one:.2e}, "
                          f"|u| {rep.plateau_zero:.2e} (<= 0.05), max|u| {peak:.3f} (<= 2), "
                          f"min {rep.u_min:.3f}, {elapsed:.1f} s (< 60 s)")
    assert ok


def test_criterion5_invariants(capsys):
    start = time.perf_counter()
    checks = {}
    coeffs = problem1().coeffs
    skew = 0.0
    repro = 0.0
    kernel = 0.0
    for i, (mesh, ci) in enumerate(random_cells(100, seed=11)):
        k = 1 + i % 3
        ops, loc = element_system(mesh, ci, k, coeffs)
        b = loc.b_h
        skew = max(skew, np.abs(b + b.T).max() / np.abs(b).max())
        n = dim_poly(k)
        P = ops.D @ ops.PiNabla
        Q = ops.D @ ops.Pi0k
        # idempotency relative to the operator scale (entries reach 1e4 on skinny cells)
        repro = max(repro, np.abs(ops.PiNabla @ ops.D - np.eye(n)).max(),
                    np.abs(ops.Pi0k @ ops.D - np.eye(n)).max(),
                    np.abs(ops.PiNabla @ P - ops.PiNabla).max() / np.abs(ops.PiNabla).max(),
                    np.abs(ops.Pi0k @ Q - ops.Pi0k).max() / np.abs(ops.Pi0k).max())
        kernel = max(kernel, np.abs(loc.S @ ops.D).max() / np.abs(loc.S).max())
    checks["b_h skew <= 1e-13"] = (skew <= 1e-13, f"{skew:.1e}")
    checks["projector reproduction/idempotency <= 1e-10"] = (repro <= 1e-10, f"{repro:.1e}")
    checks["stability kernel contains P_k"] = (kernel <= 1e-10, f"{kernel:.1e}")

    rng = np.random.default_rng(0)
    positive = 0
    cases = [("m3", 1, problem1()), ("m4", 2, problem1()), ("m2", 3, problem1()),
             ("m1", 2, layer_problem())]
    for family, k, prob in cases:
        system = assemble(cached_mesh(family, 5), k, prob.coeffs, prob.dirichlet)
        interior = ~system.boundary_mask
        V = np.zeros((system.matrix.shape[0], 250))
        V[interior] = rng.standard_normal((interior.sum(), 250))
        positive += int((np.einsum("ij,ij->j", V, system.matrix @ V) > 0).sum())
    checks["coercivity on 1000 vectors"] = (positive == 1000, f"{positive}/1000 positive")

    t1 = tau_from_bounds(1e-7, 1.0, 0.0, 0.2, DIVERGENCE_FREE).tau
    t2 = tau_from_bounds(1e-7, 1.0, 2.0, 0.2, DIVERGENCE_FREE, C_tau=0.5).tau
    ck = 0.05
    t3 = tau_from_bounds(1e-7, 0.0, 0.0, 0.2, ck).tau
    tau_ok = abs(t1 - 0.1) <= 1e-15 and abs(t2 - 0.1) <= 1e-15 and abs(t3 - ck * 0.04 / 1e-7) <= 1e-9
    checks["tau examples"] = (tau_ok, f"{t1:g}, {t2:g}, {t3:g}")
    elapsed = time.perf_counter() - start
    checks["runtime < 60 s"] = (elapsed < 60, f"{elapsed:.1f} s")
    ok = all(v[0] for v in checks.values())
    report(capsys, 5, ok, "; ".join(f"{name}: {detail}" for name, (_, detail) in checks.items()))
    assert ok


@pytest.mark.slow
def test_criterion6_thread_determinism(capsys, convergence_runs):
    a = convergence_runs[1].read_bytes()
    b = convergence_runs[8].read_bytes()
    ok = a == b
    report(capsys, 6, ok, f"convergence CSV with VEMSUPG_THREADS=1 and =8 identical "
                          f"({len(a)} bytes each)" if ok else "CSV bytes differ")
    assert ok
