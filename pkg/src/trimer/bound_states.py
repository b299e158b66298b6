"""Bound states via the Birman-Schwinger principle, and critical mass ratios."""
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from . import laplace, linalg
from .birman_schwinger import (Nystrom, _energy_outer, constraint_projection,
                               limit_funcs, limit_matrix_general_K)
from .dispersion import ModelParams
from .errors import DomainError, InvalidArgument
from .sectors import EVEN_CLASSES, ODD_CLASSES, fine_blocks
from .torus_grid import make_grid
from .two_body import essential_spectrum

CLUSTER_TOL = 1e-6
TOP_K = 6
GAP_MESH = 400


@dataclass(frozen=True)
class BoundState:
    z: float
    multiplicity: int
    parity: str
    location: str
    residual: float
    sector_tags: tuple
    mu: float = 1.0
    flags: tuple = ()


@dataclass(frozen=True)
class GapWindow:
    c: float = 1.0
    theta: float = 0.5

    def __post_init__(self):
        if not self.c > 0 or not 0 < self.theta < 1:
            raise InvalidArgument("gap window needs c > 0 and 0 < theta < 1")

    def width(self, lam):
        return self.c * lam ** self.theta


@dataclass(frozen=True)
class CriticalGammas:
    gamma1: float
    gamma1_tilde: float
    gamma2_bound_or_value: float
    gamma2_flag: str
    gamma2_tilde: float
    K: tuple
    scan: dict = field(default=None, repr=False, compare=False)


def default_grid(params):
    return make_grid(20, 0.5) if params.is_zero_K else make_grid(10, 0.5)


_COARSE = {(1, 0, 0): "Odd1", (0, 1, 0): "Odd2", (0, 0, 1): "Odd3", (1, 1, 1): "Odd123"}


def _coarse_tags(block_name, eta):
    if eta in _COARSE:
        return (_COARSE[eta],)
    if eta == (0, 0, 0) and block_name.endswith("/sym"):
        return ("EvenS2",)
    if eta == (0, 0, 0):
        # standard irrep of S3: one partner in each of A2 and Perp
        return ("EvenA2", "EvenPerp")
    # even classes with two odd axes split over S2 / A2 / Perp by their
    # permutation content; report them as Even
    return ("Even",)


class _Blocks:
    """Per-(gamma, lambda) cache of the K = 0 block operators."""

    def __init__(self, nys):
        self.nys = nys
        self.classes = {eta: fine_blocks(eta) for eta in ODD_CLASSES + EVEN_CLASSES}
        self._dz = (None, None)

    def delta(self, z):
        if self._dz[0] != z:
            self._dz = (z, self.nys.delta(z))
        return self._dz[1]

    def op(self, spec, z):
        op = self.nys.block_matrix(spec, z, self.delta(z))
        return constraint_projection(op)

    def top(self, spec, z, k=TOP_K):
        M = self.op(spec, z).matrix
        return linalg.eigvalsh(M, top=min(k, M.shape[0]))[::-1]

    def kth(self, spec, z, j):
        return self.top(spec, z, j + 1)[j]


def _geometric_alphas(a0, a1, count):
    return np.geomspace(a0, a1, count)


def _find_roots(fun, zs, vals, j):
    """Roots of fun(z) = 1 for the j-th curve between mesh sign changes."""
    roots = []
    d = vals - 1.0
    for i in range(len(zs) - 1):
        if d[i] == 0:
            roots.append(zs[i])
        elif d[i] * d[i + 1] < 0:
            a, b = zs[i], zs[i + 1]
            r = brentq(lambda z: fun(z, j) - 1.0, a, b,
                       xtol=1e-13 * max(1.0, abs(a)), rtol=1e-15, maxiter=200)
            roots.append(r)
    return roots


def _cluster(values, tol):
    values = sorted(values)
    groups = []
    for v in values:
        if groups and abs(v - groups[-1][-1]) <= tol * max(1.0, abs(v)):
            groups[-1].append(v)
        else:
            groups.append([v])
    return [float(np.mean(g)) for g in groups]


def _count_at(blocks, z, location):
    """Weighted count of BS eigenvalues within CLUSTER_TOL of 1 at z, over all blocks."""
    mult, tags, vecs, mus = 0, [], [], []
    for eta, parts in blocks.classes.items():
        for spec, wt in parts:
            op = blocks.op(spec, z)
            k = min(TOP_K, op.matrix.shape[0])
            w, V = linalg.eigh(op.matrix, top=k)
            near = np.abs(w - 1.0) <= CLUSTER_TOL
            c = int(near.sum())
            if c and wt < 0:
                # totally antisymmetric states also show up in the a23 block
                mult += wt * c
                tags.append("EvenA2")
                if tags.count("EvenPerp") <= c:
                    tags = [t for t in tags if t != "EvenPerp"]
            elif c:
                mult += wt * c
                if wt > 0:
                    tags.extend(_coarse_tags(spec.name, eta))
                    for i in np.flatnonzero(near):
                        vecs.append((op, V[:, i]))
                        mus.append(w[i])
    return mult, tags, vecs, mus


def _parity(tags):
    odd = {t.startswith("Odd") for t in tags}
    if odd == {True}:
        return "odd"
    if odd == {False}:
        return "even"
    return "mixed"


def _state_from_blocks(blocks, z, location, flags=()):
    mult, tags, vecs, mus = _count_at(blocks, z, location)
    if mult <= 0:
        return None
    res = 0.0
    for op, v in vecs[:4]:
        psi = op.basis.expand(v)
        res = max(res, reconstruct_eigenfunction(op.params, z, psi, op.grid,
                                                 delta=op.delta)[1])
    tags = tuple(dict.fromkeys(tags))
    mu = float(mus[int(np.argmax(np.abs(np.asarray(mus) - 1)))])
    return BoundState(float(z), int(mult), _parity(tags), location, float(res), tags, mu,
                      tuple(flags))


def _scan_blocks(blocks, specs, zs, roots, k=TOP_K):
    # z outer so that Delta is shared by all blocks at one z
    per = [[blocks.top(spec, z, k) for spec in specs] for z in zs]
    for b, spec in enumerate(specs):
        curves = np.array([row[b] for row in per])
        for j in range(curves.shape[1]):
            if np.all(curves[:, j] < 1.0) or np.all(curves[:, j] > 1.0):
                continue
            roots.extend(_find_roots(lambda z, jj: blocks.kth(spec, z, jj), zs, curves[:, j], j))


def _primary_and_secondary(location):
    if location == "below":
        primary = [s for s, w in fine_blocks((1, 0, 0)) if w > 0]
        secondary = [(1, 1, 1)] + list(EVEN_CLASSES)
    else:
        primary = [s for s, w in fine_blocks((0, 0, 0)) if w > 0]
        secondary = [(0, 1, 1), (1, 0, 1), (1, 1, 0)] + list(ODD_CLASSES)
    return primary, secondary


def _secondary_scan(blocks, classes, zs_coarse, zs_fine, roots):
    # classes without a principal part: coarse mesh, refined only if a
    # curve comes anywhere near 1
    specs = [spec for eta in classes for spec, wt in blocks.classes[eta] if wt > 0]
    tops = np.array([[blocks.top(spec, z, 2)[0] for spec in specs] for z in zs_coarse])
    for b, spec in enumerate(specs):
        if tops[:, b].max() > 0.5:
            _scan_blocks(blocks, [spec], zs_fine, roots)


def _lower_end(blocks, specs, tau_min):
    a = 1.0
    while True:
        z = tau_min - a
        if max(blocks.top(s, z, 1)[0] for s in specs) < 1.0 or a > 1e7:
            return a
        a *= 2


def solve_below(params, grid=None, bands=None, trace=None):
    """Eigenvalues of H(K) below the essential spectrum."""
    if params.lam == 0:
        return []
    grid = grid or default_grid(params)
    bands = bands or essential_spectrum(params)
    tau = bands.tau_min
    z_hi = tau - 1e-7 * max(1.0, abs(tau))
    if not (params.is_zero_K and grid.symmetric):
        return _solve_general(params, grid, bands, "below")
    blocks = _Blocks(Nystrom(params, grid))
    primary, secondary = _primary_and_secondary("below")
    a_lo = _lower_end(blocks, primary, tau)
    roots, flags = [], []
    zs_f = tau - _geometric_alphas(1e-6, a_lo, 80)
    for spec in primary:
        top = blocks.top(spec, z_hi)
        for j in np.flatnonzero(top > 1.0):
            f = lambda z, jj=j, s=spec: blocks.kth(s, z, jj)
            pts = []
            g = lambda z: (pts.append((z, f(z))), pts[-1][1] - 1.0)[1]
            r = brentq(g, tau - a_lo, z_hi, xtol=1e-13 * max(1.0, abs(tau)),
                       rtol=1e-15, maxiter=200)
            roots.append(r)
            pts.sort()
            if trace is not None:
                trace.append(pts)
            if np.any(np.diff([m for _, m in pts]) <= 0):
                # bisection assumption broken: fall back to a mesh scan
                flags.append("non-monotone-trace")
                _scan_blocks(blocks, [spec], zs_f[::-1], roots)
    zs_c = tau - _geometric_alphas(1e-6, a_lo, 12)
    _secondary_scan(blocks, secondary, zs_c[::-1], zs_f[::-1], roots)
    out = []
    for z in _cluster(roots, CLUSTER_TOL):
        st = _state_from_blocks(blocks, z, "below", dict.fromkeys(flags))
        if st is not None:
            out.append(st)
    return out


def _gap_mesh(z0, z1, count=GAP_MESH):
    span = z1 - z0
    half = count // 2
    a = np.concatenate([np.geomspace(1e-6, span, half),
                        np.linspace(span / (count - half), span, count - half)])
    a = np.unique(np.clip(a, 1e-6, span))
    return z0 + a


def solve_gap(params, window=GapWindow(), grid=None, bands=None):
    """Eigenvalues of H(K) in the gap within T_lambda of the two-particle band."""
    bands = bands or essential_spectrum(params)
    if bands.gap is None:
        raise DomainError("no gap between the two-particle and three-particle bands")
    grid = grid or default_grid(params)
    z0 = bands.tau_max
    z1 = min(bands.tau_max + window.width(params.lam), bands.E_min - 1e-6)
    if not (params.is_zero_K and grid.symmetric):
        return _solve_general(params, grid, bands, "gap", (z0, z1))
    blocks = _Blocks(Nystrom(params, grid))
    primary, secondary = _primary_and_secondary("gap")
    zs = _gap_mesh(z0, z1)
    roots = []
    _scan_blocks(blocks, primary, zs, roots, k=4)
    _secondary_scan(blocks, secondary, zs[::20], zs, roots)
    out = []
    for z in _cluster(roots, CLUSTER_TOL):
        st = _state_from_blocks(blocks, z, "gap")
        if st is not None:
            out.append(st)
    return out


def _solve_general(params, grid, bands, location, span=None):
    nys = Nystrom(params, grid)

    def top(z, k=TOP_K):
        op = constraint_projection(nys.full_matrix(z))
        return linalg.eigvalsh(op.matrix, top=k)[::-1]

    if location == "below":
        tau = bands.tau_min
        a = 1.0
        while top(tau - a, 1)[0] >= 1.0 and a < 1e7:
            a *= 2
        zs = (tau - _geometric_alphas(1e-6, a, 40))[::-1]
    else:
        zs = _gap_mesh(span[0], span[1], 120)
    curves = np.array([top(z) for z in zs])
    roots = []
    for j in range(curves.shape[1]):
        roots.extend(_find_roots(lambda z, jj: top(z, jj + 1)[jj], zs, curves[:, j], j))
    out = []
    for z in _cluster(roots, CLUSTER_TOL):
        op = constraint_projection(nys.full_matrix(z))
        w, V = linalg.eigh(op.matrix, top=TOP_K)
        near = np.flatnonzero(np.abs(w - 1.0) <= CLUSTER_TOL)
        if not near.size:
            continue
        res = max(reconstruct_eigenfunction(params, z, V[:, i], grid, delta=op.delta)[1]
                  for i in near[:4])
        out.append(BoundState(float(z), int(near.size), "n/a", location, float(res),
                              ("Full",), float(w[near[0]])))
    return out


def reconstruct_eigenfunction(params, z, psi, grid, delta=None, materialize=None):
    """Three-body eigenfunction f(p, q) from a BS eigenvector psi.

    psi is the Euclidean unit eigenvector on the grid nodes.  Returns
    (f or None, residual) with residual = ||(H_disc - z) f|| / ||f||, H_disc
    the grid Hamiltonian (multiplication by E minus lambda times the two
    quadrature potentials).  f is returned as an (N, N) array only when
    materialize is true or N <= 1728.
    """
    psi = np.asarray(psi, dtype=float)
    N = grid.size
    if psi.shape != (N,):
        raise InvalidArgument(f"psi must have {N} node values")
    D = delta if delta is not None else Nystrom(params, grid).delta(z)
    v = 1.0 / np.sqrt(np.abs(D))
    v /= np.linalg.norm(v)
    if abs(psi @ v) > 1e-8 * np.linalg.norm(psi):
        raise InvalidArgument("psi violates the constraint (not orthogonal to 1/sqrt|Delta|)")
    phi = psi / np.sqrt(grid.cell_weight) / np.sqrt(np.abs(D))
    p = grid.nodes
    K = np.asarray(params.K)
    c0 = params.lam * grid.cell_weight / (2 * np.pi) ** 3
    if materialize is None:
        materialize = N <= 1728
    f_full = np.empty((N, N)) if materialize else None
    colsum = np.zeros(N)
    rowsum = np.zeros(N)
    fnorm2 = 0.0
    step = max(1, 2_000_000 // N)
    for i0 in range(0, N, step):
        sl = slice(i0, min(N, i0 + step))
        E = _energy_outer(params.gamma, K, p[sl], p)
        F = (phi[None, :] - phi[sl, None]) / (E - z)
        colsum += F.sum(axis=0)
        rowsum[sl] = F.sum(axis=1)
        fnorm2 += np.sum(F * F)
        if materialize:
            f_full[sl] = F
    # (E - z) f = phi(q) - phi(p), so the residual is a_q - b_p
    a = phi - c0 * colsum
    b = phi + c0 * rowsum
    r2 = N * np.sum(a * a) + N * np.sum(b * b) - 2 * np.sum(a) * np.sum(b)
    res = np.sqrt(max(r2, 0.0) / fnorm2) if fnorm2 > 0 else np.inf
    return f_full, float(res)


def _sup_curve(fun, alphas):
    vals = np.array([fun(a) for a in alphas])
    j = int(np.argmax(vals))
    if j == 0:
        return float(vals[0]), float(alphas[0]), vals
    lo = alphas[j - 1]
    hi = alphas[min(j + 1, len(alphas) - 1)]
    res = minimize_scalar(lambda a: -fun(a), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-10 * max(1.0, hi)})
    if -res.fun > vals[j]:
        return float(-res.fun), float(res.x), vals
    return float(vals[j]), float(alphas[j]), vals


ALPHA_SCAN = np.concatenate([[0.0], np.logspace(-3, 3, 61)])


def critical_gammas(K=(0.0, 0.0, 0.0), route=None):
    """Critical mass ratios gamma1, gamma1~, gamma2 and gamma2~ at quasi-momentum K.

    route "closed" (K = 0 only) uses the closed-form Laplace constants;
    route "limit" scans the rank-six limit operator over alpha.
    """
    K = tuple(ModelParams(1.0, 0.0, K).K)
    if route is None:
        route = "closed" if all(k == 0 for k in K) else "limit"
    if route == "closed":
        if any(k != 0 for k in K):
            raise InvalidArgument("closed-form route needs K = 0")
        g1 = 1.0 / laplace.cosine_moments(0.0)["ms"]
        s1, a1, v1 = _sup_curve(lambda a: limit_funcs(a)[0], ALPHA_SCAN)
        s3, a3, v3 = _sup_curve(lambda a: limit_funcs(a)[1], ALPHA_SCAN)
        smax, amax = (s3, a3) if s3 >= s1 else (s1, a1)
        flag = "exact" if amax == 0.0 and np.all(np.diff(v3) <= 0) else \
            "lower-bound-derived-from-sup"
        return CriticalGammas(g1, g1, 1.0 / smax, flag, 1.0 / s1, K,
                              {"alpha": ALPHA_SCAN, "e1": v1, "e3": v3})
    if route != "limit":
        raise InvalidArgument(f"unknown route {route!r}")
    sups = {}
    scan = {"alpha": ALPHA_SCAN}
    for branch in ("below", "gap"):
        cache = {}

        def beta(a, i):
            if a not in cache:
                cache[a] = limit_matrix_general_K(K, a, branch).beta
            return cache[a][i]
        sups[branch] = []
        for i in range(3):
            s, a, v = _sup_curve(lambda x: beta(x, i), ALPHA_SCAN)
            sups[branch].append(s)
            scan[f"{branch}_{i}"] = v
    b, g = sups["below"], sups["gap"]
    flag = "exact" if all(np.all(np.diff(scan[f"gap_{i}"]) <= 0) for i in range(3)) \
        else "lower-bound-derived-from-sup"
    return CriticalGammas(1.0 / max(b), 1.0 / min(b), 1.0 / max(g), flag, 1.0 / min(g), K, scan)


@dataclass(frozen=True)
class PhaseReport:
    params: ModelParams
    bands: object
    below: list
    gap: list
    seconds: float = field(compare=False, default=0.0)

    @property
    def max_residual(self):
        r = [s.residual for s in self.below + self.gap]
        return max(r) if r else 0.0


def phase_point(params, window=GapWindow(), grid=None):
    t0 = time.perf_counter()
    bands = essential_spectrum(params)
    if params.lam == 0:
        return PhaseReport(params, bands, [], [], time.perf_counter() - t0)
    below = solve_below(params, grid, bands)
    gap = solve_gap(params, window, grid, bands) if bands.gap is not None else []
    return PhaseReport(params, bands, below, gap, time.perf_counter() - t0)
