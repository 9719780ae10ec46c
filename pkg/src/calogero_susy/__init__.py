"""Supersymmetric chain of three- and four-body Calogero Hamiltonians on grids."""

__version__ = "0.1.0"

from .grid import Grid, Grid2D, Grid3D, build_grid
from .model import (
    JacobiMap,
    ModelParams,
    SingularGeometry,
    SingularPointError,
    SuperpotentialEval,
    box_half_width,
    eval_superpotential,
    jacobi_forward,
    jacobi_inverse,
    singular_distance,
)
from .operators import (
    CubicalComplex,
    FockSectorSpec,
    OperatorHandle,
    SuperchargePair,
    assemble_chain_n4,
    build_h0,
    build_h1,
    build_h2,
    build_supercharge_components,
)
from .spectral import EigenSet, PairingReport, convergence_study, eigensolve, intertwine_eigenfunction, pair_spectra

__all__ = [
    "__version__",
    "Grid",
    "Grid2D",
    "Grid3D",
    "build_grid",
    "JacobiMap",
    "ModelParams",
    "SingularGeometry",
    "SingularPointError",
    "SuperpotentialEval",
    "box_half_width",
    "eval_superpotential",
    "jacobi_forward",
    "jacobi_inverse",
    "singular_distance",
    "CubicalComplex",
    "FockSectorSpec",
    "OperatorHandle",
    "SuperchargePair",
    "assemble_chain_n4",
    "build_h0",
    "build_h1",
    "build_h2",
    "build_supercharge_components",
    "EigenSet",
    "PairingReport",
    "convergence_study",
    "eigensolve",
    "intertwine_eigenfunction",
    "pair_spectra",
]
