"""Input checks shared by the estimator front-end."""
from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array


def check_observations(X, n_sv_max: int) -> np.ndarray:
    """Return ``X`` as an ``(n, N+1, 6)`` float array.

    Accepts a single ``(N+1, 6)`` matrix, a stack ``(n, N+1, 6)`` or flat rows
    ``(n, 6 (N+1))``. Values must be finite.
    """
    rows = n_sv_max + 1
    X = np.asarray(X, dtype=float)
    if X.ndim == 2 and X.shape == (rows, 6):
        X = X[None]
    if X.ndim == 3:
        if X.shape[1:] != (rows, 6):
            raise ValueError(f"expected observations of shape (n, {rows}, 6), got {X.shape}")
        flat = check_array(X.reshape(X.shape[0], -1))
        return flat.reshape(X.shape)
    flat = check_array(X)
    if flat.shape[1] != rows * 6:
        raise ValueError(f"expected {rows * 6} features per row, got {flat.shape[1]}")
    return flat.reshape(-1, rows, 6)


def check_scenarios(n_sv_values, n_sv_max: int) -> list:
    vals = [int(v) for v in np.atleast_1d(n_sv_values)]
    bad = [v for v in vals if not 0 <= v <= n_sv_max]
    if bad:
        raise ValueError(f"scenario sizes {bad} outside 0..{n_sv_max}")
    return vals
