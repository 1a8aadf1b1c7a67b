"""Input validation helpers shared by the estimators."""

from __future__ import annotations

import numpy as np

from .errors import EmptyData, NotFitted, SchemaMismatch


def check_array(X, allow_empty=False) -> np.ndarray:
    """Coerce to a finite 2-D float64 array."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2:
        raise ValueError(f"expected a 2-D array, got {X.ndim}-D")
    if not allow_empty and X.shape[0] == 0:
        raise EmptyData("no rows")
    if X.size and not np.all(np.isfinite(X)):
        raise ValueError("array contains NaN or infinity")
    return X


def check_X_y(X, y):
    X = check_array(X)
    y = np.asarray(y)
    if y.ndim != 1 or y.shape[0] != X.shape[0]:
        raise ValueError(f"X has {X.shape[0]} rows but y has shape {y.shape}")
    return X, y


def check_is_fitted(estimator, attr: str):
    if not hasattr(estimator, attr):
        raise NotFitted(f"{type(estimator).__name__} is not fitted yet")


def check_n_features(X: np.ndarray, expected: int):
    if X.shape[1] != expected:
        raise SchemaMismatch(
            f"row has {X.shape[1]} features, model was fitted on {expected}")
