"""Brute-force diagonalization of the discretized fiber Hamiltonians."""
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .birman_schwinger import Nystrom, _energy_outer, constraint_projection
from .dispersion import total_energy
from .errors import ResourceError

FIBER_CAP = 20 ** 3
THREE_BODY_N = 5
ISOLATION = 1e-6
MULT_TOL = 1e-6


@dataclass(frozen=True)
class DenseSpectrum:
    eigenvalues: np.ndarray
    dims: int
    grid_n: int


def _coupling(params, grid):
    return params.lam * grid.cell_weight / (2 * np.pi) ** 3


def dense_fiber(params, q, grid, k=None):
    """Spectrum of diag E(p_j, q) minus the rank-one quadrature potential.

    k limits the solve to the k lowest eigenvalues.
    """
    N = grid.size
    if N > FIBER_CAP:
        raise ResourceError(f"fiber matrix of size {N} exceeds the cap {FIBER_CAP}")
    E = total_energy(params, grid.nodes, np.broadcast_to(np.asarray(q, float), (N, 3)))
    H = np.diag(E) - _coupling(params, grid) * np.ones((N, N))
    if k is None:
        w = sla.eigh(H, eigvals_only=True, driver="evd")
    else:
        w = sla.eigh(H, eigvals_only=True, subset_by_index=[0, min(k, N) - 1])
    return DenseSpectrum(np.sort(w), N, grid.n)


def secular_root(params, q, grid):
    """Lowest root of 1 - c sum_j 1/(E_j - z) below min E, by bracketing."""
    from scipy.optimize import brentq
    N = grid.size
    E = total_energy(params, grid.nodes, np.broadcast_to(np.asarray(q, float), (N, 3)))
    c = _coupling(params, grid)
    e0 = E.min()
    f = lambda z: 1.0 - c * np.sum(1.0 / (E - z))
    hi = e0 - 1e-14 * max(1.0, abs(e0))
    lo = e0 - c * N - 1.0
    return brentq(f, lo, hi, xtol=1e-15, rtol=1e-15 * 4, maxiter=500)


def _pairs(N):
    j, k = np.triu_indices(N, 1)
    return j, k


def three_body_matrix(params, grid):
    """Fiber Hamiltonian on antisymmetric grid functions.

    Basis (e_jk - e_kj)/sqrt2 for j < k.  The potential V13 + V23 acts as
    D^T D with D the node/pair incidence matrix D[m, (j,k)] = d_mk - d_mj.
    """
    if grid.n > THREE_BODY_N:
        raise ResourceError(f"three-body dense solve needs n <= {THREE_BODY_N}, got {grid.n}")
    N = grid.size
    j, k = _pairs(N)
    E = _energy_outer(params.gamma, np.asarray(params.K), grid.nodes, grid.nodes)[j, k]
    D = np.zeros((N, j.size))
    cols = np.arange(j.size)
    D[k, cols] = 1.0
    D[j, cols] = -1.0
    H = -_coupling(params, grid) * (D.T @ D)
    H[np.diag_indices_from(H)] += E
    return H, E


def dense_three_body(params, grid):
    H, _ = three_body_matrix(params, grid)
    w = sla.eigh(H, eigvals_only=True, driver="evd")
    return DenseSpectrum(np.sort(w), H.shape[0], grid.n)


def discrete_tau_set(params, grid):
    """All eigenvalues of the discrete two-body fibers h(p_i), i over nodes."""
    Efull = _energy_outer(params.gamma, np.asarray(params.K), grid.nodes, grid.nodes)
    c = _coupling(params, grid)
    N = grid.size
    out = []
    for i in range(N):
        h = np.diag(Efull[i]) - c * np.ones((N, N))
        out.append(np.linalg.eigvalsh(h))
    return np.sort(np.concatenate(out)), np.sort(Efull.ravel())


def _twisted_eigs(params, grid, z):
    """Eigenvalues of sgn(Delta) M for z where Delta changes sign."""
    Efull = _energy_outer(params.gamma, np.asarray(params.K), grid.nodes, grid.nodes)
    c = _coupling(params, grid)
    T = 1.0 / (Efull - z)
    D = 1.0 - c * T.sum(axis=1)
    r = 1.0 / np.sqrt(np.abs(D))
    M = -c * r[:, None] * T * r[None, :]
    return np.linalg.eigvals(np.sign(D)[:, None] * M), "mixed"


@dataclass(frozen=True)
class ExactnessEntry:
    z: float
    region: str
    deviation: float
    dense_mult: int
    bs_mult: int


@dataclass
class ExactnessReport:
    entries: list = field(default_factory=list)

    @property
    def max_deviation(self):
        return max((e.deviation for e in self.entries), default=0.0)

    @property
    def mismatches(self):
        return [e for e in self.entries if e.dense_mult != e.bs_mult]

    @property
    def passed(self):
        return self.max_deviation <= 1e-8 and not self.mismatches


def _near(x, a, tol):
    i = np.searchsorted(a, x)
    d = np.inf
    if i < a.size:
        d = a[i] - x
    if i > 0:
        d = min(d, x - a[i - 1])
    return d < tol


def bs_exactness_check(params, grid, spectrum=None):
    """Pair every isolated dense eigenvalue with BS eigenvalue 1 at the same grid."""
    rep = ExactnessReport()
    if params.lam == 0:
        return rep
    spec = spectrum or dense_three_body(params, grid)
    tau, evals = discrete_tau_set(params, grid)
    w = spec.eigenvalues
    nys = Nystrom(params, grid, "grid")
    clusters = []
    for z in w:
        if _near(z, tau, ISOLATION) or _near(z, evals, ISOLATION):
            continue
        if clusters and z - clusters[-1][-1] <= MULT_TOL:
            clusters[-1].append(z)
        else:
            clusters.append([z])
    for cl in clusters:
        for z in cl:
            mu, region = _bs_eigs(nys, params, grid, z)
            dev = float(np.min(np.abs(mu - 1.0)))
            bs_mult = int(np.sum(np.abs(mu - 1.0) <= MULT_TOL))
            rep.entries.append(ExactnessEntry(float(z), region, dev, len(cl), bs_mult))
    return rep


def _bs_eigs(nys, params, grid, z):
    if z < nys.E_grid_min:
        D = nys.delta(z)
        if np.all(D > 0) or np.all(D < 0):
            op = constraint_projection(nys.full_matrix(z))
            return np.linalg.eigvalsh(op.matrix), op.region
    return _twisted_eigs(params, grid, z)
