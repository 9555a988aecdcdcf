"""Input validation helpers shared by the estimators and the CLI."""

from __future__ import annotations

import json
import os

import numpy as np

from . import coeffs
from .operators import ModelSpec


def as_model_spec(X) -> ModelSpec:
    """Coerce a ModelSpec, a config dict, or a JSON path into a ModelSpec."""
    if isinstance(X, ModelSpec):
        return X
    if isinstance(X, dict):
        return ModelSpec.from_dict(X)
    if isinstance(X, (str, os.PathLike)):
        with open(X) as fh:
            return ModelSpec.from_dict(json.load(fh))
    raise TypeError(f"cannot interpret {type(X).__name__} as a model specification")


def check_dimension_order(n: int, m: int) -> coeffs.DimensionOrder:
    return coeffs.DimensionOrder(n, m)


def check_positive(name: str, value: float) -> float:
    if not value > 0:
        raise ValueError(f"{name} must be positive, got {value}")
    return float(value)


def check_samples(t, name: str = "t") -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if t.ndim != 1 or len(t) < 3:
        raise ValueError(f"{name} must be a 1-d array with at least 3 samples")
    if np.any(t <= 0):
        raise ValueError(f"{name} must be strictly positive for log-log fitting")
    return t


def check_weight(sigma: float, n: int, context: str = "") -> float:
    if sigma <= n / 2:
        raise ValueError(
            f"weight sigma={sigma} must exceed n/2 = {n / 2}"
            + (f" for {context}" if context else "")
        )
    return float(sigma)
