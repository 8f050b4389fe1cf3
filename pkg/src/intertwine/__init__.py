"""Matrix Darboux transformations: intertwining operators for matrix Schrodinger Hamiltonians."""

__version__ = "0.1.0"

from .construct import (  # noqa: E402
    Window, build_intertwiner, final_potential, intertwining_residual, kernel_residual, wronskian,
)
from .conjugate import ExtensionBasis, build_conjugate, conjugate_by_symmetry, verify_susy_algebra  # noqa: E402
from .errors import IntertwineError  # noqa: E402
from .minimize import minimizable_factors, minimize  # noqa: E402
from .reduce import classify_reducibility  # noqa: E402
from .schrodinger import (  # noqa: E402
    AssociationChain, ChainSet, MatrixHamiltonian, VectorFunction, spectral_summary, verify_chain,
)

__all__ = [
    "AssociationChain", "ChainSet", "ExtensionBasis", "IntertwineError", "MatrixHamiltonian",
    "VectorFunction", "Window", "build_conjugate", "build_intertwiner", "classify_reducibility",
    "conjugate_by_symmetry", "final_potential", "intertwining_residual", "kernel_residual",
    "minimizable_factors", "minimize", "spectral_summary", "verify_chain", "verify_susy_algebra",
    "wronskian",
]
