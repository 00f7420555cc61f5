"""Spiked covariance estimation with optimization-bias-free eigenvector correction."""

__version__ = "0.1.0"

from .bias import BiasVector, PhiEstimator, bias_invariance_check, opt_bias, phi_estimator
from .correction import (
    CorrectedBasis, assemble_model, correct_flat, correct_sharp, corrected_basis, corrected_eigenvalues,
)
from .covariance import DenseCovariance, LowRankCovariance
from .optimize import (
    OptimizationReport, QuadProblem, discrepancy_forecast, evaluate, min_variance, precision_apply,
    true_min_variance,
)
from .simmodel import PopulationModel, TruthSlice, calibrate, simulate_panel, truth_slice
from .spectra import (
    CenteringProjector, DataMatrix, SampleSpectrum, make_centering, sample_spectrum, select_eigvecs,
    select_singvecs,
)
