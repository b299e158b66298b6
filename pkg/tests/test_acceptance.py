"""Acceptance criteria 1-10; each prints one PASS/FAIL line."""
import math
import sys
import time

import numpy as np

from conftest import ACCEPTANCE_LINES, below_states, gap_states
from trimer import (DomainError, ModelParams, Nystrom, bs_exactness_check, critical_gammas, epsilon,
                    essential_spectrum, fiber_eigenvalue, limit_matrix_general_K, make_grid,
                    sector_restrict, asymptotic_z)
from trimer import laplace
from trimer.birman_schwinger import limit_funcs
from trimer.torus_grid import quadrature_point_singular
from trimer.two_body import fiber_eigenvalues


def report(num, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {num}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line, file=sys.stderr)
    assert ok, line


def test_criterion_01_watson():
    t0 = time.perf_counter()
    W = laplace.watson_constant()
    g = make_grid(128, 0.5)
    grid_raw = float(np.sum(1 / epsilon(g.nodes)) * g.cell_weight / (2 * math.pi) ** 3)
    Wg = quadrature_point_singular(lambda p: 1 / epsilon(p), 128) / (2 * math.pi) ** 3
    dt = time.perf_counter() - t0
    ok = abs(W - 0.5054620197) <= 1e-7 and abs(Wg - 0.5054620197) <= 1e-4 and dt < 5
    report(1, ok, f"W bessel={W:.12f} grid n=128 (Richardson)={Wg:.9f} "
                  f"(raw trapezoid {grid_raw:.6f}) time={dt:.2f}s")


def test_criterion_02_gamma1():
    t0 = time.perf_counter()
    g1 = 1 / laplace.cosine_moments(0.0)["ms"]
    cg = critical_gammas()
    dt = time.perf_counter() - t0
    ok = abs(g1 - 4.7655) <= 5e-4 and abs(cg.gamma1 - g1) < 1e-12 and dt < 5
    report(2, ok, f"gamma1(0)={g1:.9f} time={dt:.2f}s")


def test_criterion_03_gap_constants():
    t0 = time.perf_counter()
    e1, e3, _ = limit_funcs(0.0)
    g2t = 1 / e1
    dt = time.perf_counter() - t0
    ok = (abs(g2t - 5.398489) <= 5e-4 and abs(e3 - 0.340538) <= 5e-4
          and abs(e1 - 0.185237) <= 5e-4 and 1 / e3 <= 2.93652 + 5e-4 and dt < 30)
    report(3, ok, f"gamma2~={g2t:.7f} e3(0)={e3:.9f} e1(0)={e1:.9f} 1/e3={1 / e3:.7f} time={dt:.2f}s")


def test_criterion_04_two_body_sandwich():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = np.inf
    ok = True
    for g in (0.5, 1.0, 4.0):
        lam = 20 * (1 + g)
        P = ModelParams(g, lam)
        q = rng.uniform(-math.pi, math.pi, (50, 3))
        z, bound = fiber_eigenvalues(P, q)
        zh = z - epsilon(q)
        hi = -lam + 3 * (1 + g)
        lo = hi - 9 * (1 + g) ** 2 / lam
        ok &= bool(np.all(bound) and np.all(zh > lo) and np.all(zh < hi))
        worst = min(worst, float(np.min(np.minimum(zh - lo, hi - zh))))
    dt = time.perf_counter() - t0
    ok &= dt < 30
    report(4, ok, f"150 fibers strictly inside, min margin {worst:.3e} time={dt:.2f}s")


def test_criterion_05_asymptotic_order():
    t0 = time.perf_counter()
    q = np.array([1.0, 2.0, -1.0])
    err = {}
    for lam in (40.0, 80.0):
        P = ModelParams(1.0, lam)
        err[lam] = abs(fiber_eigenvalue(P, q).z - asymptotic_z(P, q, 3))
    r = err[80.0] / err[40.0]
    dt = time.perf_counter() - t0
    # O(1/lambda^5) remainder: ratio near 1/32, at most 1/16
    ok = r <= 1 / 16 and 1 / (32 * 2.5) <= r <= 2.5 / 32 and dt < 10
    report(5, ok, f"err40={err[40.0]:.3e} err80={err[80.0]:.3e} ratio={r:.5f} (1/32={1 / 32:.5f}) "
                  f"time={dt:.2f}s")


def test_criterion_06_oracle():
    t0 = time.perf_counter()
    devs, ok, n_states = [], True, 0
    for g in (6.0, 2.0):
        for K in ((0, 0, 0), (1, 0.5, -2)):
            rep = bs_exactness_check(ModelParams(g, 60.0, K), make_grid(4))
            ok &= rep.passed and len(rep.entries) > 0
            devs.append(rep.max_deviation)
            n_states += len(rep.entries)
    dt = time.perf_counter() - t0
    ok &= dt < 120
    report(6, ok, f"{n_states} isolated states, max |mu-1|={max(devs):.2e} time={dt:.2f}s")


def test_criterion_07_below_phases():
    s2, t2 = below_states(2.0)
    s6, t6 = below_states(6.0)
    ok = (s2 == [] and len(s6) == 1 and s6[0].multiplicity == 3 and s6[0].parity == "odd"
          and t2 + t6 < 180)
    z = s6[0].z if s6 else float("nan")
    report(7, ok, f"gamma=2: {len(s2)} states; gamma=6: {len(s6)} state z={z:.10f} "
                  f"mult={s6[0].multiplicity if s6 else 0} time={t2 + t6:.1f}s")


def test_criterion_08_gap_phases():
    s1, t1 = gap_states(1.0)
    s4, t4 = gap_states(4.0)
    s6, t6 = gap_states(6.0)
    tau = {g: essential_spectrum(ModelParams(g, 200.0)).tau_max for g in (4.0, 6.0)}
    n6 = sum(s.multiplicity for s in s6 if tau[6.0] < s.z < tau[6.0] + 6 and s.parity == "even")
    n4 = sum(s.multiplicity for s in s4 if tau[4.0] < s.z < tau[4.0] + 14)
    dt = t1 + t4 + t6
    ok = s1 == [] and n6 >= 3 and n4 >= 1 and dt < 300
    report(8, ok, f"gamma=1: {len(s1)}; gamma=6: {n6} even states in (tau_max, tau_max+6); "
                  f"gamma=4: {n4} in (tau_max, tau_max+14) time={dt:.1f}s")


def test_criterion_09_sign_laws():
    t0 = time.perf_counter()
    rng = np.random.default_rng(99)
    g = make_grid(8, 0.5)
    worst = -np.inf
    ok = True
    checked = {"below": 0, "gap": 0}
    while min(checked.values()) < 10:
        P = ModelParams(rng.uniform(0.3, 8), rng.uniform(20, 400))
        b = essential_spectrum(P)
        region = "below" if checked["below"] < 10 else "gap"
        if region == "below":
            z = b.tau_min - rng.uniform(1e-3, 20)
        else:
            if b.gap is None:
                continue
            z = b.tau_max + rng.uniform(0.02, 0.98) * (b.E_min - b.tau_max)
        try:
            op = Nystrom(P, g).full_matrix(z)
        except DomainError:
            continue
        if op.region != region:
            continue
        slack = 1e-9 * np.abs(np.linalg.eigvalsh(op.matrix)).max()
        ev_e = np.linalg.eigvalsh(sector_restrict(op, "Even").matrix)
        ev_o = np.linalg.eigvalsh(sector_restrict(op, "Odd").matrix)
        if region == "below":
            v = max(ev_e.max(), -ev_o.min())
        else:
            v = max(-ev_e.min(), ev_o.max())
        worst = max(worst, v / slack if slack else v)
        ok &= v <= slack
        checked[region] += 1
    dt = time.perf_counter() - t0
    ok &= dt < 120
    report(9, ok, f"20 samples, worst violation / slack = {worst:.3e} time={dt:.2f}s")


def test_criterion_10_general_K_limit():
    t0 = time.perf_counter()
    K = (1.0, 0.5, -2.0)
    sig = []
    for branch in ("below", "gap"):
        L = limit_matrix_general_K(K, 0.3, branch)
        sig.append((int(np.sum(L.signed > 1e-12)), int(np.sum(L.signed < -1e-12))))
    closed = critical_gammas((0, 0, 0), "closed")
    limit = critical_gammas((0, 0, 0), "limit")
    pairs = [(closed.gamma1, limit.gamma1), (closed.gamma1_tilde, limit.gamma1_tilde),
             (closed.gamma2_bound_or_value, limit.gamma2_bound_or_value),
             (closed.gamma2_tilde, limit.gamma2_tilde)]
    rel = max(abs(a - b) / abs(a) for a, b in pairs)
    dt = time.perf_counter() - t0
    ok = all(s == (3, 3) for s in sig) and rel <= 1e-6 and dt < 60
    report(10, ok, f"signatures {sig}, closed vs limit route max rel diff {rel:.2e} time={dt:.2f}s")


if __name__ == "__main__":
    import pytest
    sys.exit(pytest.main([__file__, "-q"]))
