"""Symmetric eigensolvers.

Small matrices (the 6x6 limit operators) go through a cyclic Jacobi
method; Nystrom blocks of hundreds to thousands of rows use LAPACK.
"""
import numpy as np
import scipy.linalg as sla

JACOBI_MAX = 64


def jacobi_eigh(A, tol=1e-12, max_sweeps=100):
    """Cyclic Jacobi rotations until the off-diagonal norm is below tol*||A||."""
    A = np.array(A, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("square matrix required")
    A = 0.5 * (A + A.T)
    V = np.eye(n)
    scale = max(np.linalg.norm(A), 1e-300)
    for _ in range(max_sweeps):
        off = np.sqrt(max(np.sum(A * A) - np.sum(np.diag(A) ** 2), 0.0))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (A[q, q] - A[p, p]) / (2 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1)) if theta else 1.0
                c = 1 / np.sqrt(t * t + 1)
                s = t * c
                G = np.array([[c, s], [-s, c]])
                idx = [p, q]
                A[:, idx] = A[:, idx] @ G
                A[idx, :] = G.T @ A[idx, :]
                V[:, idx] = V[:, idx] @ G
    w = np.diag(A).copy()
    order = np.argsort(w)
    return w[order], V[:, order]


def eigvalsh(M, top=None):
    """Ascending eigenvalues; with top=k only the k largest."""
    n = M.shape[0]
    if n <= JACOBI_MAX and top is None:
        return jacobi_eigh(M)[0]
    if top is None or top >= n:
        return sla.eigvalsh(M, check_finite=False)
    return sla.eigvalsh(M, subset_by_index=[n - top, n - 1], check_finite=False,
                        driver="evr")


def eigh(M, top=None):
    n = M.shape[0]
    if top is None or top >= n:
        return sla.eigh(M, check_finite=False)
    return sla.eigh(M, subset_by_index=[n - top, n - 1], check_finite=False, driver="evr")
