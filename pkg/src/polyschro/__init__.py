"""Numerical threshold spectral analysis for polyharmonic operators.

The toolkit discretizes H = (-Delta)^m + V on radial grids (n > 2m),
evaluates the free-resolvent threshold expansions with exact scalar
coefficients, classifies the zero-energy threshold through the nested
projection chain, expands M(mu)^{-1} and the perturbed resolvent as
operator-valued Laurent/log series, and measures the dispersive-decay laws
the classification predicts.
"""

__version__ = "0.1.0"

from .coeffs import (DecayRate, DimensionOrder, EIGENVALUE, REGULAR, decay_rate,
                     resonance, resonance_count)
from .operators import Grid, GridOperator, ModelSpec, build_grid, build_M, discretize_H, sandwich
from .potentials import (CappedPowerPotential, ExponentialPotential,
                         GaussianPotential, plant_bound_state,
                         plant_zero_eigenvalue, plant_zero_resonance)
from .threshold import ProjectionChain, ResonanceClassification, classify_zero, kernel_projection
from .inversion import (LaurentLogSeries, feshbach_inverse, invert_M_series,
                        invert_series, jn_expand, rv_expansion)
from .dynamics import (DecayFit, SpectralData, ginibre_norm, high_energy_fit,
                       kato_jensen_fit, local_decay, spectral_decompose,
                       strichartz_norm)
from .eigentools import (build_counterexample, birman_solomyak_integral,
                         positive_eigenvalue_scan, rellich_constant, virial_check)
from .estimators import DecayExponentFitter, KatoJensenEstimator, ThresholdClassifier

__all__ = [
    "DecayRate", "DimensionOrder", "EIGENVALUE", "REGULAR", "decay_rate",
    "resonance", "resonance_count",
    "Grid", "GridOperator", "ModelSpec", "build_grid", "build_M",
    "discretize_H", "sandwich",
    "CappedPowerPotential", "ExponentialPotential", "GaussianPotential",
    "plant_bound_state", "plant_zero_eigenvalue", "plant_zero_resonance",
    "ProjectionChain", "ResonanceClassification", "classify_zero",
    "kernel_projection",
    "LaurentLogSeries", "feshbach_inverse", "invert_M_series", "invert_series",
    "jn_expand", "rv_expansion",
    "DecayFit", "SpectralData", "ginibre_norm", "high_energy_fit",
    "kato_jensen_fit", "local_decay", "spectral_decompose", "strichartz_norm",
    "build_counterexample", "birman_solomyak_integral",
    "positive_eigenvalue_scan", "rellich_constant", "virial_check",
    "DecayExponentFitter", "KatoJensenEstimator", "ThresholdClassifier",
]
