import numpy as np
from hypothesis import given, settings, strategies as st

from trimer import ModelParams, delta, epsilon, even_odd_split, fiber_eigenvalue, make_grid, total_energy
from trimer.two_body import fiber_profile
from trimer.torus_grid import group_action

angle = st.floats(-np.pi, np.pi, allow_nan=False)
vec = st.tuples(angle, angle, angle)
gammas = st.floats(0.1, 8.0)


@settings(max_examples=60, deadline=None)
@given(gammas, vec, vec, vec)
def test_energy_bounds_and_symmetry(g, K, p, q):
    P = ModelParams(g, 0.0, K)
    E = total_energy(P, p, q)
    assert -1e-12 <= E <= 12 + 6 * g + 1e-12
    assert np.isclose(E, total_energy(P, q, p))


@settings(max_examples=60, deadline=None)
@given(gammas, vec, vec)
def test_split_identity(g, p, q):
    s = even_odd_split(g, np.array(p), np.array(q))
    assert np.isclose(s.E_c + s.E_s, total_energy(ModelParams(g, 0), p, q), atol=1e-12)
    assert abs(s.E_s) <= s.E_c + 1e-12


@settings(max_examples=40, deadline=None)
@given(gammas, st.floats(0.5, 60), vec, vec)
def test_fiber_sandwich(g, lam, K, q):
    P = ModelParams(g, lam, K)
    s = fiber_eigenvalue(P, q)
    _, emin, emax = fiber_profile(P, np.array(q))
    assert emin - lam - 1e-9 <= s.z <= emin + 1e-12
    assert s.z <= emax - lam + 1e-9 or not s.is_bound
    if s.is_bound:
        assert abs(delta(P, q, s.z)) < 1e-10


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 6), st.sampled_from([0.0, 0.5]), st.permutations([0, 1, 2]),
       st.tuples(*[st.sampled_from([-1, 1])] * 3))
def test_group_action_is_bijection(n2, offset, perm, signs):
    g = make_grid(2 * n2, offset)
    idx = group_action(g, tuple(perm), signs)
    assert sorted(idx) == list(range(g.size))
    assert np.allclose(epsilon(g.nodes[idx]), epsilon(g.nodes))


@settings(max_examples=25, deadline=None)
@given(gammas, st.floats(0.5, 40), vec, vec, st.floats(0.01, 20))
def test_delta_monotone(g, lam, K, q, gap):
    P = ModelParams(g, lam, K)
    _, emin, _ = fiber_profile(P, np.array(q))
    z = emin - gap
    assert delta(P, q, z - 1e-3) > delta(P, q, z)
