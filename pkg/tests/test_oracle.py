import numpy as np
import pytest

from trimer import (ModelParams, ResourceError, bs_exactness_check, dense_fiber, dense_three_body,
                    essential_spectrum, fiber_eigenvalue, make_grid, total_energy)
from trimer.birman_schwinger import _energy_outer
from trimer.dispersion import band_extrema
from trimer.oracle import secular_root, three_body_matrix

PI = np.pi


def test_dense_fiber_lambda_zero():
    g = make_grid(4, 0.25)
    P = ModelParams(1.4, 0.0, (0.3, 0, 1))
    q = np.array([0.2, -1.0, 2.0])
    E = total_energy(P, g.nodes, np.broadcast_to(q, (g.size, 3)))
    assert np.allclose(dense_fiber(P, q, g).eigenvalues, np.sort(E), atol=1e-12)


def test_dense_fiber_secular_and_interlacing():
    g = make_grid(6)
    P = ModelParams(2.0, 25.0, (0.4, 0.2, -1))
    q = np.array([0.5, 0.1, -0.3])
    w = dense_fiber(P, q, g).eigenvalues
    E = np.sort(total_energy(P, g.nodes, np.broadcast_to(q, (g.size, 3))))
    assert abs(w[0] - secular_root(P, q, g)) < 1e-10
    # rank-one nonpositive update: E_{j-1} <= w_j <= E_j
    assert np.all(w <= E + 1e-10)
    assert np.all(w[1:] >= E[:-1] - 1e-10)


def test_dense_fiber_converges_to_continuum():
    # bound state about 0.5 below its band: slow enough to see the rate
    P = ModelParams(1.0, 8.0)
    q = np.array([0.4, -0.2, 1.1])
    z = fiber_eigenvalue(P, q).z
    errs = [abs(dense_fiber(P, q, make_grid(n), k=1).eigenvalues[0] - z) for n in (8, 12, 16)]
    # n = 20 through the secular equation, which equals the dense root (tested above)
    errs.append(abs(secular_root(P, q, make_grid(20)) - z))
    for a, b in zip(errs, errs[1:]):
        assert b <= a / 5 or b < 1e-13


def test_size_caps():
    with pytest.raises(ResourceError):
        dense_fiber(ModelParams(1, 1), np.zeros(3), make_grid(21))
    with pytest.raises(ResourceError):
        dense_three_body(ModelParams(1, 1), make_grid(6))


def test_three_body_lambda_zero():
    g = make_grid(3)
    P = ModelParams(1.5, 0.0, (0.1, 0.2, 0.3))
    E = _energy_outer(P.gamma, np.asarray(P.K), g.nodes, g.nodes)
    j, k = np.triu_indices(g.size, 1)
    assert np.allclose(dense_three_body(P, g).eigenvalues, np.sort(E[j, k]), atol=1e-12)


def test_three_body_matrix_acts_as_hamiltonian():
    # compare with direct action on an antisymmetric function
    g = make_grid(3, 0.5)
    P = ModelParams(2.0, 7.0, (0.3, -0.5, 1.0))
    H, _ = three_body_matrix(P, g)
    N = g.size
    rng = np.random.default_rng(0)
    c = rng.normal(size=H.shape[0])
    j, k = np.triu_indices(N, 1)
    f = np.zeros((N, N))
    f[j, k] = c / np.sqrt(2)
    f[k, j] = -c / np.sqrt(2)
    E = _energy_outer(P.gamma, np.asarray(P.K), g.nodes, g.nodes)
    c0 = P.lam * g.cell_weight / (2 * PI) ** 3
    Hf = E * f - c0 * (f.sum(axis=0)[None, :] + f.sum(axis=1)[:, None])
    assert np.allclose(np.sqrt(2) * Hf[j, k], H @ c, atol=1e-12)


def test_variational_sandwich():
    g = make_grid(4)
    for gam, lam, K in [(1.0, 10.0, (0, 0, 0)), (3.0, 40.0, (1, 0.5, -2))]:
        P = ModelParams(gam, lam, K)
        w = dense_three_body(P, g).eigenvalues
        E = _energy_outer(gam, np.asarray(P.K), g.nodes, g.nodes)
        j, k = np.triu_indices(g.size, 1)
        assert E[j, k].min() - lam <= w[0] <= E[j, k].max() - lam


def test_hvz_clustering():
    P = ModelParams(1.0, 30.0)
    b = essential_spectrum(P)
    bands = [(b.tau_min - 0.5, b.tau_max + 0.5), (b.E_min - 0.5, b.E_max + 0.5)]
    fr, bottom = [], []
    # each grid contains q = 0, where tau_min is attained
    for n, off in ((3, 0.5), (4, 0.0), (5, 0.5)):
        w = dense_three_body(P, make_grid(n, off)).eigenvalues
        inside = np.zeros(w.size, bool)
        for lo, hi in bands:
            inside |= (w >= lo) & (w <= hi)
        fr.append(1 - inside.mean())
        bottom.append(abs(w[0] - b.tau_min))
    assert fr[0] >= fr[1] >= fr[2]
    # the fraction is already zero at n = 3 here; the band bottom still converges
    assert bottom[0] > bottom[1] > bottom[2]


@pytest.mark.parametrize("gam,K", [(6.0, (0, 0, 0)), (6.0, (1, 0.5, -2)), (2.0, (0, 0, 0))])
def test_bs_exactness(gam, K):
    rep = bs_exactness_check(ModelParams(gam, 60.0, K), make_grid(4))
    assert len(rep.entries) > 0
    assert rep.max_deviation <= 1e-8
    assert not rep.mismatches
    regions = {e.region for e in rep.entries}
    assert "gap" in regions


def test_bs_exactness_lambda_zero():
    rep = bs_exactness_check(ModelParams(1.0, 0.0), make_grid(3))
    assert rep.entries == [] and rep.passed
