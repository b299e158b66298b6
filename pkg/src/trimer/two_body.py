"""Two-body fiber operators: Fredholm determinant, bound state, bands."""
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import i0e

from . import laplace
from .dispersion import ModelParams, band_extrema, epsilon, fiber_b, total_energy
from .errors import DomainError, InvalidArgument
from .torus_grid import TorusGrid, make_grid


@dataclass(frozen=True)
class FiberSolution:
    q: tuple
    z: float
    is_bound: bool


@dataclass(frozen=True)
class Threshold:
    value: float
    divergent: bool


@dataclass(frozen=True)
class TauBand:
    tau_min: float
    tau_max: float
    argmin_q: tuple
    argmax_q: tuple


@dataclass(frozen=True)
class SpectralBands:
    two_particle: tuple
    three_particle: tuple
    gap: tuple
    argmin_q: tuple
    argmax_q: tuple

    @property
    def tau_min(self):
        return self.two_particle[0]

    @property
    def tau_max(self):
        return self.two_particle[1]

    @property
    def E_min(self):
        return self.three_particle[0]

    @property
    def E_max(self):
        return self.three_particle[1]

    def region(self, z):
        """'below', 'gap' or None (inside a band or above)."""
        if z < self.tau_min:
            return "below"
        if self.gap is not None and self.gap[0] < z < self.gap[1]:
            return "gap"
        return None


def fiber_profile(params, q):
    """Amplitudes b_i and band edges E_min(K,q), E_max(K,q) of the fiber."""
    q = np.asarray(q, dtype=float)
    x = np.asarray(params.K) - q
    b = fiber_b(params.gamma, x)
    eq = epsilon(q)
    g = params.gamma
    return b, eq + np.sum(1 + g - b, axis=-1), eq + np.sum(1 + g + b, axis=-1)


class _Laplace:
    """Fiber integrals J(s) for a fixed set of q, reusing the Bessel products."""

    def __init__(self, b):
        tb = b[..., None, :] * laplace.T_NODES[:, None]
        self.prod = np.prod(i0e(tb), axis=-1) * laplace.T_WEIGHTS
        self.divergent = np.min(b, axis=-1) < 1e-12

    def J(self, s, derivative=False):
        e = self.prod * np.exp(-np.asarray(s)[..., None] * laplace.T_NODES)
        J = e.sum(axis=-1)
        edge = (np.asarray(s) == 0) & self.divergent
        J = np.where(edge, np.inf, J)
        if not derivative:
            return J
        dJ = (e * laplace.T_NODES).sum(axis=-1)
        return J, np.where(np.asarray(s) == 0, np.inf, dJ)


def _grid_of(method, offset=0.0):
    if isinstance(method, TorusGrid):
        return method
    if isinstance(method, (int, np.integer)):
        return make_grid(int(method), offset)
    if isinstance(method, tuple) and method[0] == "grid":
        return make_grid(int(method[1]), method[2] if len(method) > 2 else offset)
    raise InvalidArgument(f"unknown delta method {method!r}")


def delta(params, q, z, method="bessel"):
    """Fredholm determinant Delta(q, z) of the fiber h(K, q).

    method is "bessel" (exact 1-D Laplace route) or a grid given as a
    TorusGrid, an integer n, or ("grid", n[, offset]).
    """
    q = np.asarray(q, dtype=float)
    z = np.asarray(z, dtype=float)
    if params.lam == 0:
        return np.ones(np.broadcast(q[..., 0], z).shape)
    if method == "bessel":
        b, emin, _ = fiber_profile(params, q)
        s = emin - z
        if np.any(s < 0):
            raise DomainError("z lies above E_min(K, q); the Laplace integral diverges")
        J = laplace.fiber_integral(b, s)
        if np.any(~np.isfinite(J)):
            raise DomainError("Laplace integral diverges at the band edge")
        return 1.0 - params.lam * J
    grid = _grid_of(method)
    p = grid.nodes
    qq = np.reshape(q, (-1, 3))
    zz = np.broadcast_to(z, np.broadcast(q[..., 0], z).shape).reshape(-1) \
        if z.ndim else np.full(len(qq), float(z))
    qq = np.broadcast_to(qq, (len(zz), 3)) if len(qq) == 1 else qq
    out = np.empty(len(zz))
    c = params.lam * grid.cell_weight / (2 * np.pi) ** 3
    for i in range(len(zz)):
        E = total_energy(params, p, qq[i])
        if zz[i] >= E.min():
            raise DomainError(f"z = {zz[i]} is not below the grid band of the fiber")
        out[i] = 1.0 - c * np.sum(1.0 / (E - zz[i]))
    return out.reshape(np.broadcast(q[..., 0], z).shape)


def existence_threshold(params, q):
    """Coupling above which h(K, q) has an eigenvalue below its band."""
    b, _, _ = fiber_profile(params, q)
    J = float(laplace.fiber_integral(b, 0.0))
    if not np.isfinite(J):
        return Threshold(0.0, True)
    return Threshold(1.0 / J, False)


def _solve_s(lam, lap, bsum, bound, tol=1e-13):
    # root of f(s) = 1 - lam J(s), s = E_min(K,q) - z; f is increasing and
    # concave, so Newton from the left never overshoots the root
    lo = np.where(bound, np.maximum(lam - bsum, 0.0), np.nan)
    hi = np.where(bound, lam + 1.0, np.nan)
    s = lo.copy()
    todo = np.flatnonzero(bound)
    for _ in range(200):
        if todo.size == 0:
            break
        st = s[todo]
        pos = st > 0
        J, dJ = lap_subset(lap, todo, st)
        f = 1.0 - lam * J
        # f < 0 on the left side; update bracket
        left = f < 0
        lo[todo] = np.where(left, st, lo[todo])
        hi[todo] = np.where(left, hi[todo], st)
        step = np.where(pos & np.isfinite(dJ), -f / (lam * np.where(pos, dJ, 1.0)), np.nan)
        new = st + step
        bad = ~np.isfinite(new) | (new <= lo[todo]) | (new >= hi[todo])
        new = np.where(bad, 0.5 * (lo[todo] + hi[todo]), new)
        width = np.abs(new - st)
        s[todo] = new
        done = width <= tol * np.maximum(1.0, lam)
        todo = todo[~done]
    return s


def lap_subset(lap, idx, s):
    e = lap.prod[idx] * np.exp(-s[:, None] * laplace.T_NODES)
    J = e.sum(axis=-1)
    dJ = (e * laplace.T_NODES).sum(axis=-1)
    return J, np.where(s == 0, np.inf, dJ)


def fiber_eigenvalues(params, q):
    """Vectorized fiber eigenvalues z(K, q) and bound flags for q of shape (..., 3)."""
    q = np.asarray(q, dtype=float)
    shape = q.shape[:-1]
    qq = q.reshape(-1, 3)
    b, emin, _ = fiber_profile(params, qq)
    if params.lam == 0:
        return emin.reshape(shape), np.zeros(shape, bool)
    lap = _Laplace(b)
    J0 = lap.J(np.zeros(len(qq)))
    bound = params.lam * J0 > 1.0
    s = _solve_s(params.lam, lap, b.sum(axis=-1), bound)
    z = np.where(bound, emin - s, emin)
    return z.reshape(shape), bound.reshape(shape)


def fiber_eigenvalue(params, q):
    z, bound = fiber_eigenvalues(params, np.asarray(q, dtype=float)[None, :])
    return FiberSolution(tuple(float(x) for x in q), float(z[0]), bool(bound[0]))


def asymptotic_z(params, q, order):
    """Large-coupling expansion of z(K, q) truncated after 1, 1/lam or 1/lam^3.

    The 1/lam^3 coefficient is -(2 S^2 - 3 sum s_i^2) / 8 with
    s_i = 1 + gamma^2 + 2 gamma cos(K_i - q_i) and S = sum s_i; this is what
    the moment expansion of the determinant gives and it leaves an
    O(1/lam^5) remainder.
    """
    if order not in (0, 1, 3):
        raise InvalidArgument(f"order must be 0, 1 or 3, got {order!r}")
    q = np.asarray(q, dtype=float)
    g, lam = params.gamma, params.lam
    s = fiber_b(g, np.asarray(params.K) - q) ** 2
    S = np.sum(s, axis=-1)
    z = epsilon(q) - lam + 3 * (1 + g)
    if order >= 1:
        z = z - S / (2 * lam)
    if order >= 3:
        z = z - (2 * S ** 2 - 3 * np.sum(s ** 2, axis=-1)) / (8 * lam ** 3)
    return z


def _scan_grid(n=24):
    return make_grid(n, 0.0).nodes


def tau_band(params, scan_n=24):
    """Extremes of q -> z(K, q) with their locations."""
    if params.is_zero_K:
        pts = np.array([[0.0, 0.0, 0.0], [np.pi, np.pi, np.pi]])
        z, _ = fiber_eigenvalues(params, pts)
        return TauBand(float(z[0]), float(z[1]), (0.0, 0.0, 0.0), (np.pi,) * 3)
    qs = _scan_grid(scan_n)
    z, _ = fiber_eigenvalues(params, qs)
    out = []
    for sign in (1.0, -1.0):
        j = int(np.argmin(sign * z))
        f = lambda x: sign * float(fiber_eigenvalues(params, x[None, :])[0][0])
        res = minimize(f, qs[j], method="Nelder-Mead",
                       options={"xatol": 1e-11, "fatol": 1e-15, "maxiter": 4000})
        x, v = (res.x, sign * res.fun) if sign * res.fun <= sign * z[j] else (qs[j], z[j])
        x = np.pi - np.mod(np.pi - np.asarray(x), 2 * np.pi)
        out.append((float(v), tuple(float(c) for c in x)))
    return TauBand(out[0][0], out[1][0], out[0][1], out[1][1])


def essential_spectrum(params):
    emin, emax = band_extrema(params)
    tb = tau_band(params)
    gap = (tb.tau_max, emin) if tb.tau_max < emin else None
    return SpectralBands((tb.tau_min, tb.tau_max), (emin, emax), gap,
                         tb.argmin_q, tb.argmax_q)
