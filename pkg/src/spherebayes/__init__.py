"""Spline and adaptive hierarchical Bayes regression on the sphere."""

from .bayes import BayesFit, PriorSpec, fit_hierarchical
from .catalogue import Catalogue, CatalogueFormat, ingest
from .histospline import CellGrid, bin_directions, fit_histospline
from .kernels import KernelBranch, KernelSpec, kernel_matrix
from .model_select import bayes_factor_table, schwarz_criterion, select_k
from .persistence import load, save
from .projection import Pole, emit_grid, lambert_project
from .spectral import BasisSpec, Direction, WeightScheme, basis_matrix
from .spline import RegressionData, SplineFit, fit_spline, gcv_select_xi

__all__ = [
    "BasisSpec", "BayesFit", "Catalogue", "CatalogueFormat", "CellGrid", "Direction",
    "KernelBranch", "KernelSpec", "Pole", "PriorSpec", "RegressionData", "SplineFit",
    "WeightScheme", "basis_matrix", "bayes_factor_table", "bin_directions", "emit_grid",
    "fit_hierarchical", "fit_histospline", "fit_spline", "gcv_select_xi", "ingest",
    "kernel_matrix", "lambert_project", "load", "save", "schwarz_criterion", "select_k",
]
