"""Birman-Schwinger operator: Nystrom matrices, sectors, principal parts."""
from dataclasses import dataclass, field, replace

import numpy as np

from . import laplace
from .dispersion import ModelParams, epsilon, gamma_hat
from .errors import DomainError, IllConditioned, InvalidArgument, ResourceError, UnsupportedGrid
from .sectors import block_basis, coarse_block, fundamental_orbits, sector_basis
from .torus_grid import make_grid
from .two_body import essential_spectrum

SECTOR_TAGS = ("Full", "Even", "Odd", "Odd1", "Odd2", "Odd3", "Odd123",
               "EvenS2", "EvenA2", "EvenPerp")
FULL_CAP = 6000  # largest node count for dense full-grid matrices


@dataclass(frozen=True)
class SymmetrySector:
    tag: str

    def __post_init__(self):
        if self.tag not in SECTOR_TAGS:
            raise InvalidArgument(f"unknown sector {self.tag!r}")


@dataclass
class KernelOperator:
    grid: object
    z: float
    params: ModelParams
    sector: str
    matrix: np.ndarray = field(repr=False)
    region: str
    phi0: np.ndarray = field(repr=False, default=None)   # constraint vector, sector coords
    basis: object = field(repr=False, default=None)      # BlockBasis, dense Q or None
    delta: np.ndarray = field(repr=False, default=None)  # Delta at all nodes
    projected: bool = False

    def eigvalsh(self):
        return np.linalg.eigvalsh(self.matrix)


@dataclass(frozen=True)
class PrincipalEigs:
    e_odd: float
    e_even_12: float
    e_even_3: float
    beta_bar: float


def _energy_outer(gamma, K, pa, pb):
    """E(pa_i, pb_j) as a dense matrix without forming (d, d, 3) arrays."""
    E = epsilon(pa)[:, None] + epsilon(pb)[None, :]
    for i in range(3):
        ca, sa = np.cos(K[i] - pa[:, i]), np.sin(K[i] - pa[:, i])
        cb, sb = np.cos(pb[:, i]), np.sin(pb[:, i])
        E += gamma * (1.0 - (np.outer(ca, cb) + np.outer(sa, sb)))
    return E


class Nystrom:
    """Discretized BS kernel on one grid for fixed (gamma, lambda, K).

    delta_mode "grid" evaluates Delta with the same quadrature, which makes
    the discrete reduction exact for the discretized Hamiltonian; "bessel"
    uses the continuum determinant.
    """

    def __init__(self, params, grid, delta_mode="grid"):
        if delta_mode not in ("grid", "bessel"):
            raise InvalidArgument(f"delta_mode must be 'grid' or 'bessel', got {delta_mode!r}")
        self.params = params
        self.grid = grid
        self.mode = delta_mode
        self.p = grid.nodes
        self.K = np.asarray(params.K)
        self.c = params.lam * grid.cell_weight / (2 * np.pi) ** 3
        self.symmetric = params.is_zero_K and grid.symmetric
        self._blockE = {}
        self._Efull = None
        if self.symmetric:
            reps, ids = fundamental_orbits(grid)
            self._orbit_ids = ids
            self._Ef = _energy_outer(params.gamma, self.K, self.p[reps], self.p)
            self.E_grid_min = float(self._Ef.min())
        else:
            self._check_full()
            self.E_grid_min = float(self.full_energy().min())

    def _check_full(self):
        if self.grid.size > FULL_CAP:
            raise ResourceError(
                f"{self.grid.size} nodes exceed the dense full-grid cap {FULL_CAP}")

    def full_energy(self):
        if self._Efull is None:
            self._check_full()
            self._Efull = _energy_outer(self.params.gamma, self.K, self.p, self.p)
        return self._Efull

    def delta(self, z):
        """Delta(p_i, z) at all nodes."""
        if self.params.lam == 0:
            return np.ones(self.grid.size)
        if z >= self.E_grid_min:
            raise DomainError(f"z = {z} is not below the grid three-particle band")
        if self.mode == "bessel":
            try:
                D = laplace.grid_delta_tensor(self.params.gamma, self.params.lam,
                                              self.params.K, self.grid.axis, z)
            except ValueError as exc:
                raise DomainError(str(exc)) from None
            return D.ravel()
        if self.symmetric:
            tmp = np.subtract(self._Ef, z)
            np.reciprocal(tmp, out=tmp)
            Df = 1.0 - self.c * tmp.sum(axis=1)
            return Df[self._orbit_ids]
        return 1.0 - self.c * np.sum(1.0 / (self.full_energy() - z), axis=1)

    def region_of(self, z, D):
        amin = np.abs(D).min()
        if amin < 1e-14:
            i = int(np.argmin(np.abs(D)))
            raise IllConditioned(
                f"|Delta| = {amin:.3e} at node {i} (p = {tuple(self.p[i])}); "
                "z is too close to a fiber eigenvalue")
        if np.all(D > 0):
            return "below"
        if np.all(D < 0):
            return "gap"
        raise DomainError(f"z = {z} lies inside the two-particle band (Delta changes sign)")

    def _phi0(self, D):
        v = 1.0 / np.sqrt(np.abs(D))
        return v / np.linalg.norm(v)

    def full_matrix(self, z):
        D = self.delta(z)
        region = self.region_of(z, D)
        sgn = 1.0 if region == "below" else -1.0
        r = 1.0 / np.sqrt(np.abs(D))
        M = -sgn * self.c * (r[:, None] / (self.full_energy() - z)) * r[None, :]
        M = 0.5 * (M + M.T)
        return KernelOperator(self.grid, z, self.params, "Full", M, region,
                              self._phi0(D), None, D)

    def block_energy(self, bb):
        key = bb.spec
        if key not in self._blockE:
            pa = self.p[bb.reps]
            self._blockE[key] = np.stack([
                _energy_outer(self.params.gamma, self.K, pa, self.p[m[bb.reps]])
                for m in bb.maps])
        return self._blockE[key]

    def block_matrix(self, spec, z, D=None):
        """Restriction of the Nystrom matrix to a symmetry block, assembled directly."""
        if not self.symmetric:
            raise UnsupportedGrid("symmetry blocks need K = 0 and a symmetric grid")
        bb = block_basis(self.grid, spec)
        if D is None:
            D = self.delta(z)
        region = self.region_of(z, D)
        sgn = 1.0 if region == "below" else -1.0
        Eg = self.block_energy(bb)
        S = np.zeros(Eg.shape[1:])
        tmp = np.empty_like(S)
        for chi, E in zip(bb.chars, Eg):
            np.subtract(E, z, out=tmp)
            np.reciprocal(tmp, out=tmp)
            if chi > 0:
                S += tmp
            else:
                S -= tmp
        r = 1.0 / (np.sqrt(np.abs(D[bb.reps])) * bb.norms)
        M = (-sgn * self.c / len(bb.chars)) * (r[:, None] * S * r[None, :])
        M = 0.5 * (M + M.T)
        phi0 = bb.matrix().T @ self._phi0(D)
        return KernelOperator(self.grid, z, self.params, spec.name, M, region,
                              phi0, bb, D)

    def sector_matrix(self, tag, z):
        return sector_restrict(self.full_matrix(z), tag) if tag in ("Full", "EvenPerp") \
            else self.block_matrix(coarse_block(tag), z)


def bs_matrix(params, z, grid, delta_mode="grid"):
    """Full-grid Nystrom matrix M_ij = w * B(p_i, p_j)."""
    return Nystrom(params, grid, delta_mode).full_matrix(z)


def constraint_projection(op):
    """Compress by P = I - phi0 phi0^T, i.e. restrict to the constraint space."""
    v = op.phi0
    if v is None or np.linalg.norm(v) < 1e-14:
        return replace(op, projected=True)
    M = op.matrix
    Mv = M @ v
    vMv = v @ Mv
    P = M - np.outer(v, Mv) - np.outer(Mv, v) + vMv * np.outer(v, v)
    return replace(op, matrix=0.5 * (P + P.T), projected=True)


def sector_restrict(op, tag):
    """Restrict a full-grid operator to a K = 0 symmetry sector."""
    SymmetrySector(tag)
    if not op.params.is_zero_K:
        raise UnsupportedGrid("sector restriction needs K = 0")
    if not op.grid.symmetric:
        raise UnsupportedGrid("sector restriction needs a symmetry-closed grid")
    if op.sector != "Full":
        raise InvalidArgument("sector_restrict expects a full-grid operator")
    if tag == "Full":
        return op
    Q = sector_basis(op.grid, tag)
    M = Q.T @ op.matrix @ Q
    return replace(op, sector=tag, matrix=0.5 * (M + M.T), phi0=Q.T @ op.phi0, basis=Q)


def _check_below(params, z, bands=None):
    bands = bands or essential_spectrum(params)
    if not z < bands.tau_min:
        raise DomainError(f"z = {z} is not below the two-particle band (tau_min = {bands.tau_min})")
    return bands


def _check_gap(params, z, bands=None):
    bands = bands or essential_spectrum(params)
    if bands.gap is None or not bands.gap[0] < z < bands.gap[1]:
        raise DomainError(f"z = {z} is not inside the gap {bands.gap}")
    return bands


def _principal_grid(grid):
    return grid if grid is not None else make_grid(64, 0.5)


def _node_delta(params, z, grid, delta_mode):
    if delta_mode == "bessel":
        return laplace.grid_delta_tensor(params.gamma, params.lam, params.K,
                                         grid.axis, z).ravel()
    return Nystrom(params, grid, "grid").delta(z)


def principal_odd_eig(params, z, grid=None, delta_mode="bessel", bands=None):
    """e^{o,p}(z): the positive eigenvalue (multiplicity 3) of the odd principal part."""
    if not params.is_zero_K:
        raise UnsupportedGrid("principal_odd_eig is defined at K = 0")
    _check_below(params, z, bands)
    grid = _principal_grid(grid)
    D = _node_delta(params, z, grid, delta_mode)
    s2 = np.sin(grid.nodes[:, 0]) ** 2
    integral = grid.cell_weight * np.sum(s2 / D)
    g = params.gamma
    return params.lam * g * integral / ((2 * np.pi) ** 3 * (gamma_hat(g) - z) ** 2)


def principal_even_eigs(params, z, grid=None, delta_mode="bessel", bands=None):
    """Eigenvalues of the projected even principal part in the gap."""
    if not params.is_zero_K:
        raise UnsupportedGrid("principal_even_eigs is defined at K = 0")
    _check_gap(params, z, bands)
    grid = _principal_grid(grid)
    D = np.abs(_node_delta(params, z, grid, delta_mode))
    c = np.cos(grid.nodes)
    w = grid.cell_weight
    beta = np.sum(c[:, 0] / D) / np.sum(1.0 / D)
    i12 = w * np.sum((c[:, 0] - c[:, 1]) ** 2 / D)
    i3 = w * np.sum((c.sum(axis=1) - 3 * beta) ** 2 / D)
    g = params.gamma
    pref = params.lam * g / ((2 * np.pi) ** 3 * (gamma_hat(g) - z) ** 2)
    s2 = np.sin(grid.nodes[:, 0]) ** 2
    # odd principal eigenvalue at the same z; negative in the gap
    e_odd = -pref * w * np.sum(s2 / D)
    return PrincipalEigs(float(e_odd), float(pref * i12 / 2), float(pref * i3 / 3), float(beta))


def principal_part_matrix(nys, z, kind):
    """Full-grid Nystrom matrix of the principal part ('odd' or 'even')."""
    params = nys.params
    D = nys.delta(z)
    region = nys.region_of(z, D)
    sgn = 1.0 if region == "below" else -1.0
    g = params.gamma
    r = 1.0 / np.sqrt(np.abs(D))
    p = nys.p
    if kind == "odd":
        ker = g * np.sin(p) @ np.sin(p).T
        M = sgn * nys.c * ker / (gamma_hat(g) - z) ** 2
    elif kind == "even":
        u = 1 / np.sqrt(g) + np.sqrt(g) * np.cos(p)
        M = -sgn * nys.c * (u @ u.T) / (gamma_hat(g) - z) ** 2
    else:
        raise InvalidArgument(f"kind must be 'odd' or 'even', got {kind!r}")
    M = r[:, None] * M * r[None, :]
    return KernelOperator(nys.grid, z, params, "Full", 0.5 * (M + M.T), region,
                          nys._phi0(D), None, D)


def limit_funcs(alpha):
    """(e1(alpha), e3(alpha), beta_bar_alpha) of the gap limit problem."""
    if not alpha >= 0:
        raise InvalidArgument(f"alpha must be >= 0, got {alpha}")
    m = laplace.cosine_moments(alpha)
    beta = -m["m1"] / m["m0"]
    e1 = 0.5 * m["d12"]
    e3 = m["m2"] + 2 * m["m11"] - 3 * m["m1"] ** 2 / m["m0"]
    return float(e1), float(e3), float(beta)


@dataclass(frozen=True)
class LimitOperator:
    K: tuple
    alpha: float
    branch: str
    A: np.ndarray            # A_alpha = L^2 in orthonormal coordinates
    signed: np.ndarray       # eigenvalues of the branch-signed operator, descending
    beta: np.ndarray         # three branch-positive eigenvalues, descending


def limit_matrix_general_K(K, alpha, branch):
    """Rank-six limit operator of the projected principal part.

    Basis: mean-deflated cos p_i and sin p_i over sqrt(w + alpha), with
    w = eps(p) below the band and eps(pi - p) in the gap.  The coupling
    matrix per axis is [[cos K_i, sin K_i], [sin K_i, -cos K_i]] from
    cos(K_i - p_i - q_i); the branch sign makes the physically relevant
    eigenvalues positive.  Its square is A_alpha and beta = sqrt(eig A_alpha)
    on the positive branch.
    """
    if not alpha >= 0:
        raise InvalidArgument(f"alpha must be >= 0, got {alpha}")
    if branch not in ("below", "gap"):
        raise InvalidArgument(f"branch must be 'below' or 'gap', got {branch!r}")
    K = tuple(float(k) for k in K)
    m = laplace.cosine_moments(alpha)
    # Gram matrix of the deflated basis.  In the gap the weight is
    # eps(pi - p); substituting u = pi - p flips cos and leaves sin, which
    # changes the mean but not the deflated Gram entries.
    Sc = np.full((3, 3), m["m11"]) + np.eye(3) * (m["m2"] - m["m11"]) - m["m1"] ** 2 / m["m0"]
    S = np.zeros((6, 6))
    S[:3, :3] = Sc
    S[3:, 3:] = np.eye(3) * m["ms"]
    R = np.zeros((6, 6))
    for i, k in enumerate(K):
        c, s = np.cos(k), np.sin(k)
        R[i, i], R[i, 3 + i], R[3 + i, i], R[3 + i, 3 + i] = c, s, s, -c
    from .linalg import jacobi_eigh
    w, V = jacobi_eigh(S)
    Sh = (V * np.sqrt(np.maximum(w, 0))) @ V.T
    sgn = 1.0 if branch == "below" else -1.0
    L = -sgn * Sh @ R @ Sh
    L = 0.5 * (L + L.T)
    ev, _ = jacobi_eigh(L)
    ev = np.sort(ev)[::-1]
    A = L @ L
    return LimitOperator(K, float(alpha), branch, 0.5 * (A + A.T), ev, ev[:3].copy())


def residual_bounds(params, z, region):
    """Explicit norm bounds for the residual part of the BS operator at K = 0.

    below: dict with the z-dependent bound and C1(gamma)/lambda;
    gap: the bound on || P B^{e,r} P ||.
    """
    g, lam = params.gamma, params.lam
    gh = gamma_hat(g)
    W = laplace.watson_constant()
    if region == "below":
        C1 = ((gh * (3 + g) / 12 + (3 + g) ** 2 / 4)
              * (6 * g * gh + 3 * g * gh / (gh + 6) + 27 * g ** 3 * gh / 36 + 27 * g ** 3 / 6)
              * W + 3 * (3 + g))
        zb = (gh + lam) / z ** 2 * (6 * g * gh + 3 * g * gh ** 2 / (gh - z)
                                    + 27 * g ** 3 * (gh - z) / z ** 2) * W
        return {"C1": C1, "C1_over_lambda": C1 / lam, "z_bound": zb}
    if region == "gap":
        return {"gap_bound": (gh - z) * (gh + lam) * (9 * g ** 2 / (-z) ** 3
                                                       + gh ** 2 / ((gh - z) ** 2 * (-z))) * W}
    raise InvalidArgument(f"region must be 'below' or 'gap', got {region!r}")
