"""Input checks shared by the estimators.

scikit-learn's :func:`~sklearn.utils.validation.check_array` rejects complex
input, so complex readouts get their own (small) checker here.
"""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array

from .sensing import MeasurementVector, SensingMatrix
from .signal_model import ComplexSeries


def check_design(A) -> np.ndarray:
    """Real, finite, 2-D float matrix from a SensingMatrix or array-like."""
    if isinstance(A, SensingMatrix):
        return A.toarray()
    return check_array(A, dtype=np.float64, ensure_min_features=1)


def check_complex_vector(y, name: str = "y") -> np.ndarray:
    if isinstance(y, (MeasurementVector, ComplexSeries)):
        y = y.values
    y = np.asarray(y)
    if y.ndim == 2 and 1 in y.shape:
        y = y.reshape(-1)
    if y.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {y.shape}")
    if not np.issubdtype(y.dtype, np.number):
        raise ValueError(f"{name} must be numeric, got dtype {y.dtype}")
    y = y.astype(complex)
    if not np.all(np.isfinite(y)):
        raise ValueError(f"{name} contains NaN or infinity")
    return y


def check_consistent(A: np.ndarray, y: np.ndarray) -> None:
    if A.shape[0] != y.shape[0]:
        raise ValueError(
            f"sensing matrix has {A.shape[0]} rows but there are {y.shape[0]} readouts")
