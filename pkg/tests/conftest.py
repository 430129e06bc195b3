"""Shared fixtures: bundled datasets, reference forests, surrogate builders."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from conlex import (
    KernelConfig,
    ingest_csv,
    label_with_blackbox,
    train_forest,
)

DATA_DIR = Path(__file__).resolve().parent.parent / "data"


class LinearBlackBox:
    """Logistic model p(1|x) = sigmoid(w.x + b); picklable for pool tests."""

    def __init__(self, w, b=0.0):
        self.w = np.asarray(w, dtype=float)
        self.b = float(b)
        self.n_classes = 2

    def predict_proba(self, X):
        X = np.asarray(X, dtype=float)
        u = X @ self.w + self.b
        p1 = 1.0 / (1.0 + np.exp(-u))
        return np.column_stack([1.0 - p1, p1])


class ConstantBlackBox:
    """Always answers the same probability row."""

    def __init__(self, row):
        self.row = np.asarray(row, dtype=float)
        self.n_classes = self.row.shape[0]

    def predict_proba(self, X):
        return np.tile(self.row, (np.asarray(X).shape[0], 1))


class SignBlackBox:
    """One-hot on the sign of feature 0 (class 1 iff x[0] > 0)."""

    n_classes = 2

    def predict_proba(self, X):
        X = np.asarray(X, dtype=float)
        pos = (X[:, 0] > 0).astype(float)
        return np.column_stack([1.0 - pos, pos])


def build_surrogate(Z, probs, x=None, kernel=None):
    """Assemble a consistent SurrogateSet from raw pieces."""

    class _Fixed:
        def __init__(self, P):
            self.P = np.asarray(P, dtype=float)
            self.n_classes = self.P.shape[1]

        def predict_proba(self, X):
            return self.P[: np.asarray(X).shape[0]]

    Z = np.asarray(Z, dtype=float)
    x = Z[0] if x is None else np.asarray(x, dtype=float)
    kernel = kernel or KernelConfig(width=2.0)
    return label_with_blackbox(_Fixed(probs), Z, x, kernel)


@pytest.fixture(scope="session")
def breast():
    ds = ingest_csv(DATA_DIR / "breast_cancer.csv", "diagnosis", seed=0)
    model = train_forest(ds.X[ds.train_idx], ds.y[ds.train_idx], seed=0)
    return ds, model


@pytest.fixture(scope="session")
def diabetes():
    ds = ingest_csv(DATA_DIR / "diabetes_synth.csv", "outcome", seed=0)
    model = train_forest(ds.X[ds.train_idx], ds.y[ds.train_idx], seed=0)
    return ds, model


@pytest.fixture
def rng():
    return np.random.default_rng(0)
