"""Bessel-Laplace route for lattice integrals.

Integrals of the form (2pi)^-3 int dp g(p) / (a - sum_i b_i cos p_i) become
one-dimensional integrals over t of e^{-a t} prod_i I_k(b_i t).  Everything
here works with exponentially scaled Bessel functions so that products
never overflow.  The t-integral uses a fixed exp-sinh rule, which copes
with the t^{-3/2} tails that appear at band edges.
"""
import numpy as np
from scipy.special import i0e, i1e

_H = 1.0 / 16
_U = 5.0


def exp_sinh_rule(h=_H, U=_U):
    """Nodes and weights for int_0^inf f(t) dt with t = exp(sinh u)."""
    u = np.arange(-U, U + h / 2, h)
    t = np.exp(np.sinh(u))
    return t, h * np.cosh(u) * t


T_NODES, T_WEIGHTS = exp_sinh_rule()


def _i2_series(t):
    # I_2(t) = sum_k (t/2)^(2k+2) / (k! (k+2)!), enough terms for t < 2
    x = 0.25 * t * t
    term = 0.5 * x
    total = term.copy()
    for k in range(1, 16):
        term = term * x / (k * (k + 2))
        total = total + term
    return total


def bessel_scaled(t):
    """e^{-t} I_k(t) for k = 0, 1, 2 (I_2 by series below t = 2, else recurrence)."""
    t = np.asarray(t, dtype=float)
    b0 = i0e(t)
    b1 = i1e(t)
    small = t < 2.0
    big = np.where(small, 2.0, t)
    b2 = np.where(small, _i2_series(np.where(small, t, 0.0)) * np.exp(-np.where(small, t, 0.0)),
                  b0 - 2.0 * b1 / big)
    return b0, b1, b2


def fiber_integral(b, s, derivative=False):
    """J(b, s) = int_0^inf e^{-s t} prod_i e^{-b_i t} I_0(b_i t) dt.

    b has shape (..., 3), s has shape (...) with s >= 0.  This equals
    (2pi)^-3 int dp / (s + sum_i b_i (1 - cos p_i)).  With derivative=True
    also returns -dJ/ds = int t e^{-st} prod(...) dt.
    Infinite where s = 0 and some b_i = 0 (non-integrable edge).
    """
    b = np.asarray(b, dtype=float)
    s = np.asarray(s, dtype=float)
    t = T_NODES
    tb = b[..., None, :] * t[:, None]
    prod = np.prod(i0e(tb), axis=-1)
    damp = np.exp(-s[..., None] * t)
    integrand = prod * damp * T_WEIGHTS
    J = integrand.sum(axis=-1)
    edge = (s == 0) & (np.min(b, axis=-1) < 1e-12)
    if np.any(edge):
        J = np.where(edge, np.inf, J)
    if derivative:
        dJ = (integrand * t).sum(axis=-1)
        dJ = np.where(s == 0, np.inf, dJ)
        return J, dJ
    return J


def cosine_moments(alpha):
    """Moments of the weight 1/(eps(u) + alpha), normalized by (2pi)^3.

    Returns a dict with
      m0   = <1>,  m1 = <cos u1>,  m2 = <cos^2 u1>,  m11 = <cos u1 cos u2>,
      ms   = <sin^2 u1>,
    where <g> = (2pi)^-3 int g(u) / (eps(u) + alpha) du.
    """
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    t, w = T_NODES, T_WEIGHTS * np.exp(-alpha * T_NODES)
    b0, b1, b2 = bessel_scaled(t)
    return {
        "m0": np.sum(w * b0 ** 3),
        "m1": np.sum(w * b0 ** 2 * b1),
        "m2": np.sum(w * b0 ** 2 * 0.5 * (b0 + b2)),
        "m11": np.sum(w * b0 * b1 ** 2),
        "ms": np.sum(w * b0 ** 2 * 0.5 * (b0 - b2)),
        # (cos u1 - cos u2)^2 combined before summing to avoid cancellation
        "d12": np.sum(w * b0 * ((b0 + b2) * b0 - 2 * b1 ** 2)),
    }


def watson_constant():
    """W = (2pi)^-3 int dp / eps(p) = int_0^inf (e^{-t} I_0(t))^3 dt."""
    return float(cosine_moments(0.0)["m0"])


def sin2_over_eps2():
    """(2pi)^-3 int sin^2 p1 / eps(p)^2 dp, via 1/x^2 = int t e^{-tx} dt."""
    t, w = T_NODES, T_WEIGHTS
    b0, b1, b2 = bessel_scaled(t)
    return float(np.sum(w * t * b0 ** 2 * 0.5 * (b0 - b2)))


def grid_delta_tensor(gamma, lam, K, axis, z):
    """Delta(p, z) at every node of a tensor grid by the Laplace route.

    The integrand factorizes over axes, so each t-node contributes an outer
    product of three per-axis vectors.  Returns an (n, n, n) array indexed
    [j3, j2, j1].  Requires z below min_p E_min(K, p) on the grid.
    """
    from .dispersion import fiber_b
    t, w = T_NODES, T_WEIGHTS
    facs, amin = [], 0.0
    for k in K:
        b = fiber_b(gamma, k - axis)
        a = 1 - np.cos(axis) + 1 + gamma - b
        m = a.min()
        amin += m
        facs.append(np.exp(-np.outer(t, a - m)) * i0e(np.outer(t, b)))
    gap = amin - z
    if gap <= 0:
        raise ValueError("z is not below the fiber bands on this grid")
    c = w * np.exp(-t * gap)
    J = np.einsum("k,ka,kb,kc->cba", c, facs[0], facs[1], facs[2], optimize=True)
    return 1.0 - lam * J
