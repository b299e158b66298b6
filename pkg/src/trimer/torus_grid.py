"""Uniform tensor grids on the torus (-pi, pi]^3.

Flat node index i = j1 + n*j2 + n^2*j3 (axis 1 fastest).  Arrays shaped
(n, n, n) in this package are therefore indexed [j3, j2, j1].
"""
from dataclasses import dataclass, field
from itertools import permutations

import numpy as np

from .errors import InvalidArgument, UnsupportedGrid


def _wrap(x):
    # into (-pi, pi]
    y = np.mod(x + np.pi, 2 * np.pi) - np.pi
    return np.where(np.isclose(y, -np.pi, atol=1e-14, rtol=0), np.pi, y)


@dataclass(frozen=True)
class TorusGrid:
    n: int
    offset: float
    axis: np.ndarray = field(repr=False)

    @property
    def size(self):
        return self.n ** 3

    @property
    def cell_weight(self):
        return (2 * np.pi / self.n) ** 3

    @property
    def nodes(self):
        """(n^3, 3) array of node coordinates in lexicographic order."""
        j = np.arange(self.size)
        n = self.n
        return np.stack([self.axis[j % n], self.axis[(j // n) % n],
                         self.axis[j // (n * n)]], axis=1)

    @property
    def symmetric(self):
        return self.n % 2 == 0 and self.offset in (0.0, 0.5)

    def index(self, j1, j2, j3):
        return j1 + self.n * j2 + self.n * self.n * j3

    def axis_indices(self):
        j = np.arange(self.size)
        n = self.n
        return j % n, (j // n) % n, j // (n * n)


def make_grid(n, offset=0.0):
    if not isinstance(n, (int, np.integer)) or n < 2:
        raise InvalidArgument(f"grid size n must be an integer >= 2, got {n!r}")
    offset = float(offset)
    if not 0.0 <= offset < 1.0:
        raise InvalidArgument(f"grid offset must lie in [0, 1), got {offset}")
    j = np.arange(n)
    axis = _wrap(-np.pi + 2 * np.pi * (j + offset) / n)
    axis.setflags(write=False)
    return TorusGrid(int(n), offset, axis)


def quadrature(grid, values):
    """cell_weight * sum of node values."""
    values = np.asarray(values, dtype=float)
    if values.shape[-1] != grid.size:
        raise InvalidArgument(f"expected {grid.size} values, got {values.shape[-1]}")
    return grid.cell_weight * values.sum(axis=-1)


def quadrature_point_singular(f, n):
    """Integral of f over the torus when f ~ 1/|p - p0|^2 at a cell corner.

    On offset-1/2 grids the trapezoidal error of such an integrand is
    c/n + O(1/n^3); one Richardson step on n and n/2 removes the 1/n term.
    f maps (N, 3) nodes to values; n must be even.
    """
    if n < 4 or n % 2:
        raise InvalidArgument(f"n must be even and >= 4, got {n}")
    fine = make_grid(n, 0.5)
    coarse = make_grid(n // 2, 0.5)
    return 2.0 * quadrature(fine, f(fine.nodes)) - quadrature(coarse, f(coarse.nodes))


def axis_negation(grid):
    """Per-axis index map j -> j' with p_j' = -p_j (mod 2pi)."""
    if not grid.symmetric:
        raise UnsupportedGrid(
            f"grid n={grid.n}, offset={grid.offset} is not closed under negation")
    n = grid.n
    j = np.arange(n)
    return (n - j - int(round(2 * grid.offset))) % n


def group_action(grid, perm=(0, 1, 2), signs=(1, 1, 1)):
    """Index permutation for p -> (s_i p_{perm[i]})_i."""
    neg = axis_negation(grid)
    cols = grid.axis_indices()
    new = []
    for i in range(3):
        c = cols[perm[i]]
        new.append(neg[c] if signs[i] < 0 else c)
    return grid.index(*new)


@dataclass(frozen=True)
class SymmetryMaps:
    negate: np.ndarray
    shift_pi: np.ndarray
    permute: dict

    def permute_axes(self, sigma):
        return self.permute[tuple(sigma)]


def symmetry_maps(grid):
    """Node-level involutions used by the K = 0 sector decompositions.

    Offsets 0 and 1/2 with n even are both closed under these maps.
    """
    negate = group_action(grid, signs=(-1, -1, -1))
    n = grid.n
    j1, j2, j3 = grid.axis_indices()
    h = n // 2
    shift = grid.index((j1 + h) % n, (j2 + h) % n, (j3 + h) % n)
    perms = {p: group_action(grid, perm=p) for p in permutations(range(3))}
    return SymmetryMaps(negate, shift, perms)
