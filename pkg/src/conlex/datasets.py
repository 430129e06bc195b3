"""Bundled offline stand-in datasets.

Real UCI files are user-supplied (see data/README.md for fetch
instructions). For offline runs the repo bundles deterministic synthetic
stand-ins generated here, shaped like the originals (row count, feature
count, positive-class rate) and calibrated so the reference forest lands
in the same held-out AUC band.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

DIABETES_FEATURES = [
    "pregnancies",
    "glucose",
    "blood_pressure",
    "skin_thickness",
    "insulin",
    "bmi",
    "pedigree",
    "age",
]

# steepness of the label-generating sigmoid; sets the Bayes AUC of the
# stand-in so the forest's held-out AUC stays in the 0.72-0.85 band
DIABETES_STEEPNESS = 1.1


def synth_diabetes(seed: int = 7, n: int = 768):
    """768 x 8 synthetic cohort with probabilistic labels."""
    rng = np.random.default_rng(seed)
    preg = np.clip(rng.poisson(3.0, n).astype(float), 0, 15)
    glucose = np.clip(rng.normal(120.0, 30.0, n), 50.0, 200.0)
    bp = np.clip(rng.normal(70.0, 12.0, n), 30.0, 110.0)
    skin = np.clip(rng.normal(25.0, 10.0, n), 5.0, 60.0)
    insulin = np.clip(np.exp(rng.normal(4.3, 0.7, n)), 15.0, 600.0)
    bmi = np.clip(rng.normal(32.0, 7.0, n), 18.0, 60.0)
    pedigree = np.clip(rng.gamma(2.0, 0.25, n), 0.05, 2.5)
    age = np.clip(21.0 + rng.exponential(12.0, n), 21.0, 81.0)
    X = np.column_stack([preg, glucose, bp, skin, insulin, bmi, pedigree, age])

    def z(v):
        return (v - v.mean()) / v.std()

    score = (
        1.1 * z(glucose)
        + 0.8 * z(bmi)
        + 0.6 * z(age)
        + 0.45 * z(pedigree)
        + 0.35 * z(preg)
        + 0.25 * z(insulin)
        + 0.3 * z(glucose) * z(bmi)
    )
    # shift keeps the positive rate near the original cohort's ~35%
    p = 1.0 / (1.0 + np.exp(-DIABETES_STEEPNESS * (score - 0.55)))
    y = (rng.uniform(size=n) < p).astype(int)
    return X, y, DIABETES_FEATURES


def write_dataset_csv(path, X, y, feature_names, label_name="label", label_map=None):
    """Write a headered CSV with the label as the last column."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(feature_names) + [label_name])
        for row, lab in zip(X, y):
            out = [format(v, ".10g") for v in row]
            out.append(label_map[int(lab)] if label_map else str(int(lab)))
            w.writerow(out)
    return path


def write_diabetes_csv(path, seed: int = 7):
    X, y, names = synth_diabetes(seed=seed)
    return write_dataset_csv(path, X, y, names, label_name="outcome")
