"""Closed-form energies of the model and their extrema."""
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import InvalidArgument


@dataclass(frozen=True)
class ModelParams:
    gamma: float
    lam: float
    K: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        K = tuple(float(k) for k in np.ravel(self.K))
        if len(K) != 3 or not all(np.isfinite(K)):
            raise InvalidArgument(f"K must be three finite numbers, got {self.K!r}")
        if not (np.isfinite(self.gamma) and self.gamma > 0):
            raise InvalidArgument(f"gamma must be > 0, got {self.gamma}")
        if not (np.isfinite(self.lam) and self.lam >= 0):
            raise InvalidArgument(f"lambda must be >= 0, got {self.lam}")
        # fold K into (-pi, pi]
        K = tuple(float(np.pi - np.mod(np.pi - k, 2 * np.pi)) for k in K)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "lam", float(self.lam))

    @property
    def is_zero_K(self):
        return all(k == 0.0 for k in self.K)

    def with_lam(self, lam):
        return ModelParams(self.gamma, lam, self.K)


def gamma_hat(gamma):
    return 3.0 * (2.0 + gamma + 1.0 / gamma)


def epsilon(p):
    p = np.asarray(p, dtype=float)
    return np.sum(1.0 - np.cos(p), axis=-1)


def total_energy(params, p, q):
    """E(p, q) = eps(p) + eps(q) + gamma eps(K - p - q)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    K = np.asarray(params.K)
    return epsilon(p) + epsilon(q) + params.gamma * epsilon(K - p - q)


@dataclass(frozen=True)
class EvenOddSplit:
    E_c: np.ndarray
    E_s: np.ndarray
    E_hat_c: np.ndarray
    gamma_hat: float


def even_odd_split(gamma, p, q):
    """Split E at K = 0 into parts even and odd under q -> -q."""
    cp = np.cos(np.asarray(p, dtype=float))
    cq = np.cos(np.asarray(q, dtype=float))
    sp = np.sin(np.asarray(p, dtype=float))
    sq = np.sin(np.asarray(q, dtype=float))
    E_c = np.sum(2 + gamma - cp - cq - gamma * cp * cq, axis=-1)
    E_s = gamma * np.sum(sp * sq, axis=-1)
    r = np.sqrt(gamma)
    E_hat_c = np.sum((1 / r + r * cp) * (1 / r + r * cq), axis=-1)
    return EvenOddSplit(E_c, E_s, E_hat_c, gamma_hat(gamma))


def fiber_b(gamma, x):
    """b(x) = sqrt(1 + gamma^2 + 2 gamma cos x); amplitude of the reduced fiber band."""
    return np.sqrt(np.maximum(1 + gamma * gamma + 2 * gamma * np.cos(x), 0.0))


def axis_profile(gamma, k, q, sign=-1):
    """Per-axis contribution to E_min(K, q) (sign=-1) or E_max(K, q) (sign=+1)."""
    return 1 - np.cos(q) + 1 + gamma + sign * fiber_b(gamma, k - q)


def _axis_extreme(gamma, k, sign, seeds=24):
    # the two-body energy separates over axes; minimizing over p_i first
    # leaves a 1-D problem in q_i, seeded by a scan and polished by Brent
    f = (lambda x: axis_profile(gamma, k, x, sign)) if sign < 0 else \
        (lambda x: -axis_profile(gamma, k, x, sign))
    xs = -np.pi + 2 * np.pi * np.arange(seeds) / seeds
    vals = f(xs)
    j = int(np.argmin(vals))
    h = 2 * np.pi / seeds
    res = minimize_scalar(f, bounds=(xs[j] - h, xs[j] + h), method="bounded",
                          options={"xatol": 1e-12})
    best = min(float(res.fun), float(vals[j]))
    x = float(res.x) if res.fun <= vals[j] else float(xs[j])
    return (best if sign < 0 else -best), x


def band_extrema(params):
    """(E_min(K), E_max(K)) of the three-particle band."""
    lo = hi = 0.0
    for k in params.K:
        lo += _axis_extreme(params.gamma, k, -1)[0]
        hi += _axis_extreme(params.gamma, k, +1)[0]
    return lo, hi
