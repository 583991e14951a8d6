"""Multivariate polynomial regression baseline.

Features are all monomials of total degree <= q in graded-lexicographic
order (constant first, then degree 1 in variable order, then degree 2 with
x1^2 before x1*x2 before x2^2, ...). The least-squares solve standardizes the
non-constant features, adds a tiny ridge as a rank guard and maps the
coefficients back to the raw monomials, so prediction is a plain dot product
with the expanded features.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations_with_replacement
from math import comb

import numpy as np


@dataclass(frozen=True)
class PolynomialBasis:
    """Monomial exponent table for ``input_dim`` variables up to ``degree``."""

    input_dim: int
    degree: int
    exponents: np.ndarray

    @classmethod
    def create(cls, input_dim, degree):
        if input_dim < 1:
            raise ValueError("input_dim must be >= 1")
        if degree < 0:
            raise ValueError("degree must be >= 0")
        rows = []
        for total in range(degree + 1):
            for combo in combinations_with_replacement(range(input_dim), total):
                row = np.zeros(input_dim, dtype=np.int64)
                for j in combo:
                    row[j] += 1
                rows.append(row)
        exponents = np.vstack(rows) if rows else np.zeros((1, input_dim), dtype=np.int64)
        return cls(input_dim, degree, exponents)

    @property
    def feature_count(self):
        """binomial(input_dim + degree, degree)"""
        return self.exponents.shape[0]


@dataclass
class LinearModel:
    """Fitted coefficients (raw-monomial space) plus the basis they pair with."""

    coefficients: np.ndarray
    basis: PolynomialBasis
    feature_mean: np.ndarray
    feature_std: np.ndarray


def expand_features(basis, x):
    """Monomials x^alpha, |alpha| <= degree, graded-lex order, constant first.

    Accepts shape (input_dim,) returning (feature_count,) or (B, input_dim)
    returning (B, feature_count).
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.shape[1] != basis.input_dim:
        raise ValueError(f"expected {basis.input_dim} input features")
    # Per-variable power tables avoid repeated pow calls.
    powers = x[:, :, None] ** np.arange(basis.degree + 1)[None, None, :]
    out = np.ones((x.shape[0], basis.feature_count))
    for j in range(basis.input_dim):
        out *= powers[:, j, basis.exponents[:, j]]
    return out[0] if single else out


def fit_least_squares(basis, inputs, targets, ridge=1e-10):
    """Ridge-guarded least squares on the expanded features.

    Features are standardized (constant excluded) before an SVD-based solve of
    the augmented system, then the coefficients are mapped back to raw
    monomials. The default ridge 1e-10 only guards against rank deficiency.
    """
    x = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    y = np.asarray(targets, dtype=np.float64)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite regression data")
    if x.shape[0] != y.shape[0] or x.shape[0] < 1:
        raise ValueError("need one target per input row")

    features = expand_features(basis, x)
    mean = features.mean(axis=0)
    std = features.std(axis=0)
    mean[0] = 0.0
    std[0] = 1.0
    std = np.where(std > 0, std, 1.0)
    standardized = (features - mean) / std

    n_feat = basis.feature_count
    design = np.vstack([standardized, np.sqrt(ridge) * np.eye(n_feat)])
    rhs = np.concatenate([y, np.zeros(n_feat)])
    coeff_std, *_ = np.linalg.lstsq(design, rhs, rcond=None)

    coeff = coeff_std / std
    coeff[0] = coeff_std[0] - np.sum(coeff_std[1:] * mean[1:] / std[1:])
    return LinearModel(coeff, basis, mean, std)


def predict(model, x):
    """Dot product of the coefficients with the expanded features; pure."""
    features = expand_features(model.basis, x)
    return features @ model.coefficients
