import numpy as np
import pytest

from trimer import (DomainError, GapWindow, InvalidArgument, ModelParams, Nystrom,
                    constraint_projection, critical_gammas, essential_spectrum, make_grid,
                    phase_point, reconstruct_eigenfunction, solve_below, solve_gap)
from trimer.bound_states import _Blocks
from trimer.oracle import dense_three_body, discrete_tau_set
from trimer.torus_grid import symmetry_maps

GAMMA1 = 4.765497145
GAMMA2T = 5.398476183


def test_lambda_zero():
    P = ModelParams(6.0, 0.0)
    assert solve_below(P) == []
    rep = phase_point(P)
    assert rep.below == [] and rep.gap == [] and rep.bands.gap is None


def test_below_gamma2_empty(cached):
    states, _ = cached["below"](2.0)
    assert states == []


def test_below_gamma6_triple(cached):
    states, _ = cached["below"](6.0)
    assert len(states) == 1
    st = states[0]
    assert st.multiplicity == 3 and st.parity == "odd" and st.location == "below"
    assert set(st.sector_tags) == {"Odd1", "Odd2", "Odd3"}
    assert st.residual <= 1e-6
    assert st.z < essential_spectrum(ModelParams(6.0, 60.0)).tau_min
    assert st.flags == ()


def _block_counts(P, z, grid):
    blocks = _Blocks(Nystrom(P, grid))
    top, count = -np.inf, 0
    for parts in blocks.classes.values():
        for spec, wt in parts:
            ev = blocks.top(spec, z)
            top = max(top, ev[0]) if wt > 0 else top
            count += wt * int(np.sum(np.abs(ev - 1) <= 1e-6))
    return top, count


@pytest.mark.parametrize("kind,gamma", [("below", 6.0), ("gap", 6.0), ("gap", 4.0)])
def test_bs_consistency(cached, kind, gamma):
    states, _ = cached[kind](gamma)
    assert states
    lam = 60.0 if kind == "below" else 200.0
    P = ModelParams(gamma, lam)
    top, _ = _block_counts(P, states[0].z, make_grid(20, 0.5))
    assert abs(top - 1) <= 1e-8 or top > 1
    for st in states:
        _, count = _block_counts(P, st.z, make_grid(20, 0.5))
        assert count == st.multiplicity
        assert abs(st.mu - 1) <= 1e-8


def test_monotone_trace():
    trace = []
    states = solve_below(ModelParams(6.0, 60.0), make_grid(12, 0.5), trace=trace)
    assert len(states) == 1 and states[0].multiplicity == 3
    assert trace
    for pts in trace:
        mu = [m for _, m in pts]
        assert np.all(np.diff(mu) > 0)


def test_gap_gamma1_empty(cached):
    states, _ = cached["gap"](1.0)
    assert states == []


def test_gap_gamma6(cached):
    states, _ = cached["gap"](6.0)
    tau = essential_spectrum(ModelParams(6.0, 200.0)).tau_max
    inside = [s for s in states if tau < s.z < tau + 6]
    assert sum(s.multiplicity for s in inside) >= 3
    assert all(s.parity == "even" and s.location == "gap" for s in states)
    assert all(s.residual <= 1e-6 for s in states)


def test_gap_gamma4(cached):
    states, _ = cached["gap"](4.0)
    tau = essential_spectrum(ModelParams(4.0, 200.0)).tau_max
    assert sum(s.multiplicity for s in states if tau < s.z < tau + 14) >= 1
    assert all(s.parity == "even" for s in states)


def test_gap_absent():
    with pytest.raises(DomainError):
        solve_gap(ModelParams(1.0, 2.0))


def test_gap_window_validation():
    assert GapWindow().width(400.0) == 20.0
    for c, th in [(0, 0.5), (1, 1.0), (1, 0.0), (-1, 0.5)]:
        with pytest.raises(InvalidArgument):
            GapWindow(c, th)


def _oracle_state(P, grid, region):
    w = dense_three_body(P, grid).eigenvalues
    tau, E = discrete_tau_set(P, grid)
    nys = Nystrom(P, grid)
    for z in w:
        if np.min(np.abs(tau - z)) < 1e-6 or np.min(np.abs(E - z)) < 1e-6 or z >= nys.E_grid_min:
            continue
        D = nys.delta(z)
        if (region == "below" and np.all(D > 0)) or (region == "gap" and np.all(D < 0)):
            return z, nys
    raise AssertionError("no isolated state found")


@pytest.mark.parametrize("region", ["below", "gap"])
def test_reconstruct_oracle_pairing(region):
    g = make_grid(4)
    P = ModelParams(6.0, 60.0)
    z, nys = _oracle_state(P, g, region)
    op = constraint_projection(nys.full_matrix(z))
    w, V = np.linalg.eigh(op.matrix)
    i = int(np.argmin(np.abs(w - 1)))
    assert abs(w[i] - 1) < 1e-8
    f, res = reconstruct_eigenfunction(P, z, V[:, i], g, delta=op.delta)
    assert res <= 1e-8
    assert np.abs(f + f.T).max() <= 1e-12 * np.abs(f).max()
    if region == "below":
        neg = symmetry_maps(g).negate
        assert np.allclose(f[np.ix_(neg, neg)], -f, atol=1e-12 * np.abs(f).max())


def test_reconstruct_rejects_constraint_violation():
    g = make_grid(4)
    P = ModelParams(6.0, 60.0)
    nys = Nystrom(P, g)
    z = essential_spectrum(P).tau_min - 1
    op = nys.full_matrix(z)
    with pytest.raises(InvalidArgument):
        reconstruct_eigenfunction(P, z, op.phi0, g, delta=op.delta)


def test_critical_gammas_K0():
    cg = critical_gammas()
    assert abs(cg.gamma1 - GAMMA1) < 1e-8 and cg.gamma1 == cg.gamma1_tilde
    assert abs(cg.gamma2_tilde - GAMMA2T) < 1e-8
    assert cg.gamma2_bound_or_value <= cg.gamma2_tilde
    assert cg.gamma2_flag in ("exact", "lower-bound-derived-from-sup")
    # the scan shows e3 decreasing from alpha = 0, so the sup sits at alpha = 0
    assert cg.gamma2_flag == "exact"
    assert np.all(np.diff(cg.scan["e3"]) < 0)
    lim = critical_gammas((0, 0, 0), "limit")
    for a, b in [(cg.gamma1, lim.gamma1), (cg.gamma1_tilde, lim.gamma1_tilde),
                 (cg.gamma2_bound_or_value, lim.gamma2_bound_or_value),
                 (cg.gamma2_tilde, lim.gamma2_tilde)]:
        assert abs(a - b) <= 1e-6 * abs(a)


def test_critical_gammas_general_K():
    cg = critical_gammas((1, 0.5, 0))
    assert 0 < cg.gamma1 <= cg.gamma1_tilde
    assert 0 < cg.gamma2_bound_or_value <= cg.gamma2_tilde
    with pytest.raises(InvalidArgument):
        critical_gammas((1, 0, 0), "closed")


def test_phase_point_corollary(cached):
    P = ModelParams(6.0, 200.0)
    below = solve_below(P)
    gap, _ = cached["gap"](6.0)
    assert len(below) == 1 and below[0].multiplicity == 3
    assert sum(s.multiplicity for s in gap) >= 3


@pytest.mark.parametrize("lam", [60.0, 200.0])
@pytest.mark.parametrize("K", [(0, 0, 0), (1, 1, 1)])
def test_small_gamma_no_states(lam, K):
    rep = phase_point(ModelParams(0.5, lam, K))
    assert rep.below == [] and rep.gap == []


def test_general_K_split_triplets():
    rep = phase_point(ModelParams(6.0, 60.0, (1, 0.5, -2)))
    assert len(rep.below) == 3 and len(rep.gap) == 3
    assert all(s.residual <= 1e-6 and s.parity == "n/a" for s in rep.below + rep.gap)
    assert all(s.z < rep.bands.tau_min for s in rep.below)
    assert all(rep.bands.tau_max < s.z < rep.bands.E_min for s in rep.gap)


@pytest.mark.parametrize("gamma,lam", [(6.0, 60.0), (2.0, 60.0), (5.0, 120.0), (4.0, 200.0), (0.5, 60.0)])
def test_refinement_stability(gamma, lam):
    P = ModelParams(gamma, lam)
    counts = []
    for n in (16, 24):
        rep = phase_point(P, grid=make_grid(n, 0.5))
        counts.append(([s.multiplicity for s in rep.below], [s.multiplicity for s in rep.gap]))
    assert counts[0] == counts[1]
