"""Wavelet and Fourier bases for measures on nonlinear Cantor-type fractals."""

__version__ = "0.1.0"

from .cells import Cell, CellFunction, cell_intersection_measure, cell_measure, inner_product, normalize
from .config import BudgetExceeded, budget
from .conjugacy import Conjugacy, phi_eval, phi_inverse_eval, sharp_add
from .fourier import SpectralPair, fourier_gram, l_cycle_search, lambda_set, mu_hat, q_function
from .ifs import (
    Affine,
    IFSystem,
    LogExp,
    Quadratic,
    gap_fill,
    load_system,
    scaling_eval,
    scaling_inverse_eval,
    validate,
)
from .wavelet import WaveletSystem, apply_T, apply_U, gram_matrix, parseval_decompose

__all__ = [
    "Affine", "BudgetExceeded", "Cell", "CellFunction", "Conjugacy", "IFSystem", "LogExp",
    "Quadratic", "SpectralPair", "WaveletSystem", "apply_T", "apply_U", "budget",
    "cell_intersection_measure", "cell_measure", "fourier_gram", "gap_fill", "gram_matrix",
    "inner_product", "l_cycle_search", "lambda_set", "load_system", "mu_hat", "normalize",
    "parseval_decompose", "phi_eval", "phi_inverse_eval", "q_function", "scaling_eval",
    "scaling_inverse_eval", "sharp_add", "validate",
]
