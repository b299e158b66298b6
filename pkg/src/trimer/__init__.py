"""Discrete spectrum of a lattice system of two identical fermions and a third particle."""
from .bound_states import (BoundState, CriticalGammas, GapWindow, critical_gammas,
                           phase_point, reconstruct_eigenfunction, solve_below, solve_gap)
from .birman_schwinger import (KernelOperator, Nystrom, SymmetrySector, bs_matrix,
                               constraint_projection, limit_matrix_general_K,
                               principal_even_eigs, principal_odd_eig, residual_bounds,
                               sector_restrict)
from .dispersion import ModelParams, band_extrema, epsilon, even_odd_split, total_energy
from .errors import (DomainError, IllConditioned, InvalidArgument, ResourceError,
                     TrimerError, UnsupportedGrid)
from .oracle import DenseSpectrum, bs_exactness_check, dense_fiber, dense_three_body
from .torus_grid import TorusGrid, make_grid, quadrature, symmetry_maps
from .two_body import (FiberSolution, SpectralBands, asymptotic_z, delta, essential_spectrum,
                       existence_threshold, fiber_eigenvalue, tau_band)

__version__ = "0.1.0"
