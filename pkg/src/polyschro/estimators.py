"""Estimator-style front ends for the fit-shaped parts of the toolkit.

ThresholdClassifier and the decay fitters follow the scikit-learn
conventions (constructor parameters, fit() returning self, fitted
attributes with trailing underscores, get_params/set_params), so sweeps
and pipelines from that ecosystem compose with them directly.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from . import coeffs, dynamics, threshold
from .validation import as_model_spec, check_samples


class ThresholdClassifier(BaseEstimator):
    """Classify the zero-energy threshold of a model: regular, resonance kind,
    or eigenvalue, with spectral-gap certificates at every chain stage."""

    def __init__(self, tol: float = 1e-8, gap_factor: float = 100.0):
        self.tol = tol
        self.gap_factor = gap_factor

    def fit(self, X, y=None):
        spec = as_model_spec(X)
        cls, chain = threshold.classify_zero(spec, tol=self.tol,
                                             gap_factor=self.gap_factor)
        self.spec_ = spec
        self.classification_ = cls
        self.chain_ = chain
        self.label_ = cls.label
        self.kind_ = cls.kind
        self.ranks_ = cls.ranks
        if cls.kind in ("regular", "resonance", "eigenvalue", "mixed") and cls.label is not None:
            self.decay_rate_ = coeffs.decay_rate(spec.n, spec.m, cls.label)
        else:
            self.decay_rate_ = None
        return self

    def predict(self, X=None):
        if X is not None:
            return ThresholdClassifier(**self.get_params()).fit(X).kind_
        if not hasattr(self, "kind_"):
            raise NotFittedError("ThresholdClassifier is not fitted")
        return self.kind_


class DecayExponentFitter(BaseEstimator):
    """Least-squares power-law (or log-law) fit of a decay curve."""

    def __init__(self, kind: str = "power", target_exponent: float | None = None,
                 rtol: float = 0.15):
        self.kind = kind
        self.target_exponent = target_exponent
        self.rtol = rtol

    def fit(self, t, y):
        t = check_samples(t)
        y = np.asarray(y, dtype=float)
        target = None
        if self.target_exponent is not None:
            from fractions import Fraction

            target = coeffs.DecayRate(
                "power", Fraction(self.target_exponent).limit_denominator(10**6), "fit"
            )
        if self.kind == "power":
            fit = dynamics.fit_power_law(t, y, target, rtol=self.rtol)
        elif self.kind == "log":
            fit = dynamics.fit_log_law(t, y, target)
        else:
            raise ValueError(f"unknown fit kind {self.kind!r}")
        self.fit_ = fit
        self.exponent_ = fit.exponent
        self.intercept_ = fit.intercept
        self.r_squared_ = fit.r_squared
        self.verdict_ = fit.verdict
        return self

    def predict(self, t):
        if not hasattr(self, "fit_"):
            raise NotFittedError("DecayExponentFitter is not fitted")
        t = np.asarray(t, dtype=float)
        if self.kind == "power":
            return np.exp(self.intercept_) * t**self.exponent_
        return 1.0 / (self.exponent_ * np.log1p(t) + self.intercept_)


class KatoJensenEstimator(BaseEstimator):
    """Measure the weighted propagator decay of a model and fit its exponent."""

    def __init__(self, sigma: float | None = None, energy_cutoff: float = 1.5,
                 t_onset: float = 3.0, classification=coeffs.REGULAR,
                 rtol: float = 0.15):
        self.sigma = sigma
        self.energy_cutoff = energy_cutoff
        self.t_onset = t_onset
        self.classification = classification
        self.rtol = rtol

    def fit(self, X, y=None):
        spec = as_model_spec(X)
        sd = dynamics.spectral_decompose(spec)
        fit = dynamics.kato_jensen_fit(
            spec, sigma=self.sigma, classification=self.classification,
            sd=sd, energy_cutoff=self.energy_cutoff, t_onset=self.t_onset,
            rtol=self.rtol,
        )
        self.spectral_data_ = sd
        self.fit_ = fit
        self.exponent_ = fit.exponent
        self.verdict_ = fit.verdict
        return self
