"""Finite-volume toolkit for two-particle Anderson localization.

Modules: ``lattice`` (cubes and distances), ``disorder`` (random
potentials), ``hamiltonian`` (operator assembly), ``spectral``
(eigenvalues and Green functions), ``msa`` (scale schedules and cube
classification), ``montecarlo`` (seeded estimators), ``decay``
(eigenfunction decay fits), ``cli`` (experiment commands).
"""

__version__ = "0.1.0"

from .disorder import DisorderSample, DistributionSpec, sample_potential
from .hamiltonian import (
    HamiltonianMatrix,
    assemble,
    assemble_single_particle,
    assemble_two_particle,
    tensor_sum_spectrum,
)
from .lattice import Cube, InteractionSpec
from .msa import EnergyInterval, MsaParameters, MsaSchedule

__all__ = [
    "Cube",
    "DisorderSample",
    "DistributionSpec",
    "EnergyInterval",
    "HamiltonianMatrix",
    "InteractionSpec",
    "MsaParameters",
    "MsaSchedule",
    "assemble",
    "assemble_single_particle",
    "assemble_two_particle",
    "sample_potential",
    "tensor_sum_spectrum",
    "__version__",
]
