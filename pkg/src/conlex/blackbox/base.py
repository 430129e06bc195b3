"""Black-box classifier abstraction: batch probability queries only."""

from __future__ import annotations

import numpy as np

from ..errors import DimensionError

SIMPLEX_ATOL = 1e-9


class ProbabilityModel:
    """Interface every black box implements: rows of class probabilities.

    Implementations expose ``n_classes`` and ``predict_proba``; queries must
    be pure (same batch in, same probabilities out) and every returned row
    must lie on the probability simplex.
    """

    n_classes: int

    def predict_proba(self, batch: np.ndarray) -> np.ndarray:
        raise NotImplementedError


def check_simplex(probs: np.ndarray, n_classes: int, atol: float = SIMPLEX_ATOL) -> None:
    """Raise if any row is off the simplex or the class width is wrong."""
    probs = np.asarray(probs)
    if probs.ndim != 2 or probs.shape[1] != n_classes:
        raise DimensionError(
            f"expected probability matrix with {n_classes} columns, got shape {probs.shape}"
        )
    if probs.size == 0:
        return
    if not np.all(np.isfinite(probs)):
        raise DimensionError("probability matrix contains non-finite entries")
    if probs.min() < -atol or probs.max() > 1 + atol:
        raise DimensionError("probabilities outside [0, 1]")
    sums = probs.sum(axis=1)
    worst = np.abs(sums - 1.0).max()
    if worst > atol:
        raise DimensionError(f"probability rows do not sum to 1 (max deviation {worst:.3e})")


def predict_proba(model: ProbabilityModel, batch: np.ndarray) -> np.ndarray:
    """Query ``model`` on a batch, validating shapes and the simplex property.

    Rows come back in the order they were submitted. An empty batch yields an
    empty (0, C) matrix without touching the model.
    """
    batch = np.asarray(batch, dtype=float)
    if batch.ndim != 2:
        raise DimensionError(f"batch must be 2-D (n, d), got shape {batch.shape}")
    if batch.shape[0] == 0:
        return np.empty((0, model.n_classes), dtype=float)
    expected_d = getattr(model, "n_features", None)
    if expected_d is not None and batch.shape[1] != expected_d:
        raise DimensionError(
            f"batch has {batch.shape[1]} features, model expects {expected_d}"
        )
    probs = np.asarray(model.predict_proba(batch), dtype=float)
    check_simplex(probs, model.n_classes)
    if probs.shape[0] != batch.shape[0]:
        raise DimensionError("model returned a different number of rows than queried")
    return probs
