"""Symmetry blocks of the K = 0 Birman-Schwinger operator.

At K = 0 the kernel commutes with the 48-element group of axis
permutations and per-axis sign flips.  A block is the range of the
projector (1/|H|) sum_g chi(g) U_g for a subgroup H and a +-1 character
chi; its orthonormal basis is built from node orbits, one vector per
orbit on which chi is trivial on the stabilizer.
"""
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import permutations, product

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import InvalidArgument
from .torus_grid import group_action

_PERM_SIGN = {(0, 1, 2): 1, (1, 2, 0): 1, (2, 0, 1): 1,
              (0, 2, 1): -1, (2, 1, 0): -1, (1, 0, 2): -1}
# transposition fixing axis i
_FIX = {0: (0, 2, 1), 1: (2, 1, 0), 2: (1, 0, 2)}


@dataclass(frozen=True)
class BlockSpec:
    """Subgroup elements (perm, signs) and their characters."""
    name: str
    elements: tuple
    chars: tuple
    parity: str  # 'even' or 'odd' under p -> -p


def _flip_group(eta, perms, perm_char):
    els, chis = [], []
    for signs in product((1, -1), repeat=3):
        cs = int(np.prod([s if e else 1 for s, e in zip(signs, eta)]))
        for p in perms:
            els.append((p, signs))
            chis.append(cs * (perm_char(p)))
    return tuple(els), tuple(chis)


def parity_block(eta, perms=((0, 1, 2),), perm_char=lambda p: 1, name=None):
    els, chis = _flip_group(eta, perms, perm_char)
    par = "odd" if sum(eta) % 2 else "even"
    return BlockSpec(name or "eta" + "".join(map(str, eta)), els, chis, par)


def total_parity_block(parity, perms=((0, 1, 2),), perm_char=lambda p: 1, name=None):
    c = 1 if parity == "even" else -1
    els, chis = [], []
    for s in (1, -1):
        for p in perms:
            els.append((p, (s, s, s)))
            chis.append((c if s < 0 else 1) * perm_char(p))
    return BlockSpec(name or parity, tuple(els), tuple(chis), parity)


S3 = tuple(permutations(range(3)))


def coarse_block(tag):
    """1-D character blocks behind the sector tags (EvenPerp is a complement)."""
    if tag == "Full":
        return BlockSpec("Full", (((0, 1, 2), (1, 1, 1)),), (1,), "mixed")
    if tag in ("Even", "Odd"):
        return total_parity_block(tag.lower(), name=tag)
    if tag in ("Odd1", "Odd2", "Odd3"):
        i = int(tag[-1]) - 1
        eta = tuple(int(k == i) for k in range(3))
        return parity_block(eta, name=tag)
    if tag == "Odd123":
        return parity_block((1, 1, 1), name=tag)
    if tag == "EvenS2":
        return total_parity_block("even", S3, name=tag)
    if tag == "EvenA2":
        return total_parity_block("even", ((0, 1, 2), (0, 2, 1)),
                                  lambda p: _PERM_SIGN[p], name=tag)
    raise InvalidArgument(f"no single block for sector {tag!r}")


def fine_blocks(eta):
    """Blocks splitting one per-axis parity class, with counting weights.

    The spectrum of the class (with multiplicity) is sum over blocks of
    weight * (block spectrum).  For eta with all entries equal the
    2-dimensional irrep of S3 appears in the (23)-antisymmetric block once
    and (implicitly) once more in its complement, hence weight 2 there and
    -1 on the fully antisymmetric block.
    """
    eta = tuple(eta)
    tag = "".join(map(str, eta))
    if len(set(eta)) == 1:
        t = (0, 2, 1)
        return [
            (parity_block(eta, S3, name=tag + "/sym"), 1),
            (parity_block(eta, ((0, 1, 2), t), lambda p: _PERM_SIGN[p], name=tag + "/a23"), 2),
            (parity_block(eta, S3, lambda p: _PERM_SIGN[p], name=tag + "/alt"), -1),
        ]
    odd = [i for i in range(3) if eta[i]]
    even = [i for i in range(3) if not eta[i]]
    lone = odd[0] if len(odd) == 1 else even[0]
    t = _FIX[lone]
    return [
        (parity_block(eta, ((0, 1, 2), t), name=tag + "/+"), 1),
        (parity_block(eta, ((0, 1, 2), t), lambda p: 1 if p == (0, 1, 2) else -1,
                      name=tag + "/-"), 1),
    ]


ODD_CLASSES = ((1, 0, 0), (0, 1, 0), (0, 0, 1), (1, 1, 1))
EVEN_CLASSES = ((0, 0, 0), (0, 1, 1), (1, 0, 1), (1, 1, 0))


@dataclass
class BlockBasis:
    spec: BlockSpec
    maps: np.ndarray = field(repr=False)      # (|H|, N) node index of g p_i
    chars: np.ndarray = field(repr=False)     # (|H|,)
    reps: np.ndarray = field(repr=False)      # (d,)
    norms: np.ndarray = field(repr=False)     # (d,) = ||P e_r||
    n_nodes: int = 0

    @property
    def dim(self):
        return len(self.reps)

    def matrix(self):
        """Sparse orthonormal basis Q (N x d)."""
        H = len(self.chars)
        d = self.dim
        rows = self.maps[:, self.reps].ravel()
        cols = np.tile(np.arange(d), H)
        vals = (self.chars[:, None] / (H * self.norms[None, :])).ravel()
        return sp.csc_matrix((vals, (rows, cols)), shape=(self.n_nodes, d))

    def expand(self, y):
        return self.matrix() @ y


_cache = {}


def block_basis(grid, spec):
    key = (grid.n, grid.offset, spec)
    if key in _cache:
        return _cache[key]
    maps = np.stack([group_action(grid, p, s) for p, s in spec.elements])
    chars = np.asarray(spec.chars, dtype=float)
    orbit_min = maps.min(axis=0)
    reps = np.flatnonzero(orbit_min == np.arange(grid.size))
    stab = maps[:, reps] == reps[None, :]
    c2 = (chars[:, None] * stab).sum(axis=0) / len(chars)
    keep = c2 > 1e-12
    bb = BlockBasis(spec, maps, chars, reps[keep], np.sqrt(c2[keep]), grid.size)
    if len(_cache) > 64:
        _cache.clear()
    _cache[key] = bb
    return bb


def sector_basis(grid, tag):
    """Dense orthonormal basis (N x d) of a sector on a symmetric grid."""
    if tag == "Full":
        return np.eye(grid.size)
    if tag != "EvenPerp":
        return block_basis(grid, coarse_block(tag)).matrix().toarray()
    Qe = block_basis(grid, coarse_block("Even")).matrix()
    Qs = block_basis(grid, coarse_block("EvenS2")).matrix()
    Qa = block_basis(grid, coarse_block("EvenA2")).matrix()
    C = (Qe.T @ sp.hstack([Qs, Qa])).toarray()
    Np = sla.null_space(C.T, rcond=1e-10)
    return Qe @ Np


def fundamental_orbits(grid):
    """Orbit id of each node under the full 48-element group, and the reps."""
    spec = parity_block((0, 0, 0), S3, name="000/sym")
    bb = block_basis(grid, spec)
    orbit_min = bb.maps.min(axis=0)
    reps, ids = np.unique(orbit_min, return_inverse=True)
    return reps, ids
