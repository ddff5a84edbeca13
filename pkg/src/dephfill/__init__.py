"""Filling dynamics of dephased 1D lattices driven by a localized particle source.

Engines
-------
corrmat    exact two-point correlation-matrix propagation for free fermions
           (nearest-neighbor or power-law hopping) with bulk dephasing
adiabatic  strong-dephasing classical hopping solver with closed-form
           asymptotics (erf profile, sqrt(t) growth, diffusion constant)
oracle     brute-force dense Lindblad evolution on the full Hilbert space
           (ground truth for small chains)
tebd       vectorized density-matrix TEBD for the dissipative XXZ chain

The ``analysis`` module extracts growth exponents and diffusion constants
from density trajectories; ``cli`` wires everything into the ``dephfill``
command.
"""

from dephfill.models import (
    ModelSpec,
    JumpOperator,
    JumpOperatorSet,
    build_single_particle_hamiltonian,
    build_xxz_terms,
    build_jump_operators,
)
from dephfill.trajectory import DensityTrajectory, make_time_grid

__version__ = "0.1.0"

__all__ = [
    "ModelSpec",
    "JumpOperator",
    "JumpOperatorSet",
    "build_single_particle_hamiltonian",
    "build_xxz_terms",
    "build_jump_operators",
    "DensityTrajectory",
    "make_time_grid",
    "__version__",
]
