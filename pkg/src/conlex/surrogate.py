"""Perturbation neighborhoods around the index sample.

Everything downstream (explainer fits, influence subsampling, stability
benchmarks) trains on the SurrogateSet built here: Gaussian perturbations
labeled by the black box, weighted by an exponential proximity kernel, and
rebalanced by random oversampling (GMM balancing lives in conlex.gmm).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .blackbox.base import ProbabilityModel, predict_proba
from .errors import SingleClassNeighborhood

logger = logging.getLogger(__name__)

PROVENANCE_BOOTSTRAP = "bootstrap"
PROVENANCE_ROS = "ros-duplicate"
PROVENANCE_GMM = "gmm-sample"

# neighborhood widening schedule when balancing needs a second class
SCALE_SCHEDULE = (1.0, 1.5, 2.0, 3.0)


def default_kernel_width(d: int) -> float:
    """De-facto default locality: 0.75 * sqrt(d) distance units."""
    return 0.75 * math.sqrt(d)


@dataclass(frozen=True)
class FeatureStats:
    """Per-feature location/scale of the training distribution."""

    mean: np.ndarray
    std: np.ndarray
    d: int

    @classmethod
    def from_matrix(cls, X: np.ndarray) -> "FeatureStats":
        X = np.asarray(X, dtype=float)
        return cls(mean=X.mean(axis=0), std=X.std(axis=0), d=X.shape[1])

    def __post_init__(self):
        if np.any(self.std < 0):
            raise ValueError("feature standard deviations must be >= 0")

    @property
    def zero_variance(self) -> np.ndarray:
        return self.std == 0.0


@dataclass(frozen=True)
class KernelConfig:
    """Proximity kernel pi_x(z) = exp(-dist(x, z)^2 / width^2).

    When ``scale`` is set, coordinates are divided by it before the distance
    is taken, so the width is measured in per-feature standard deviations
    rather than raw units. Without it the default width is meaningless on
    datasets whose features live on wildly different scales: distances blow
    up and every weight underflows to 0. Zero entries (constant features)
    are treated as 1 so they contribute the raw difference, which is 0 for
    perturbed rows anyway.
    """

    metric: str = "euclidean"
    width: float = 1.0
    scale: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.metric not in ("euclidean", "cosine"):
            raise ValueError(f"unknown kernel metric {self.metric!r}")
        if not self.width > 0:
            raise ValueError("kernel width must be > 0")
        if self.scale is not None:
            scale = tuple(float(s) for s in self.scale)
            if any(not math.isfinite(s) or s < 0 for s in scale):
                raise ValueError("kernel scale entries must be finite and >= 0")
            object.__setattr__(self, "scale", scale)


@dataclass
class SurrogateSet:
    """Perturbed instances plus everything the local fits need.

    All five row-aligned arrays share length n'. Hard labels are the argmax
    of the probability rows (lowest index on ties); weights follow the kernel
    formula exactly, so a row equal to the index sample has weight 1.
    """

    Z: np.ndarray                 # (n', d)
    probs: np.ndarray             # (n', C)
    hard_labels: np.ndarray       # (n',) int
    weights: np.ndarray           # (n',) in (0, 1]
    index_sample: np.ndarray      # (d,)
    kernel: KernelConfig
    provenance: list[str] = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.Z.shape[0]

    @property
    def d(self) -> int:
        return self.Z.shape[1]

    @property
    def n_classes(self) -> int:
        return self.probs.shape[1]

    def class_counts(self) -> dict[int, int]:
        values, counts = np.unique(self.hard_labels, return_counts=True)
        return {int(v): int(c) for v, c in zip(values, counts)}

    def validate(self, atol: float = 1e-9) -> None:
        """Internal-consistency check used by tests after every operation."""
        n = self.n
        assert self.probs.shape[0] == n
        assert self.hard_labels.shape == (n,)
        assert self.weights.shape == (n,)
        assert len(self.provenance) == n
        assert np.all(np.abs(self.probs.sum(axis=1) - 1.0) <= atol)
        assert np.array_equal(self.hard_labels, np.argmax(self.probs, axis=1))
        expected = proximity_weights(self.index_sample, self.Z, self.kernel)
        assert np.allclose(self.weights, expected, rtol=0, atol=atol)
        assert np.all(self.weights > 0) and np.all(self.weights <= 1.0 + atol)


def perturb(
    x: np.ndarray,
    stats: FeatureStats,
    n_prime: int,
    scale: float = 1.0,
    seed: int | np.random.SeedSequence = 0,
) -> np.ndarray:
    """Gaussian neighborhood of x: row 0 is x itself, rest are x + scale*std*g.

    Zero-variance features stay constant (their std is 0); that is logged,
    not an error.
    """
    if n_prime < 1:
        raise ValueError("n_prime must be >= 1")
    if not scale > 0:
        raise ValueError("scale must be > 0")
    x = np.asarray(x, dtype=float)
    if x.shape != (stats.d,):
        raise ValueError(f"index sample shape {x.shape} does not match d={stats.d}")
    if scale > 0 and stats.zero_variance.any():
        logger.info(
            "perturb: %d zero-variance feature(s) held constant",
            int(stats.zero_variance.sum()),
        )
    rng = np.random.default_rng(seed)
    g = rng.standard_normal(size=(n_prime, stats.d))
    Z = x[None, :] + scale * stats.std[None, :] * g
    Z[0] = x
    return Z


def _distances(x: np.ndarray, Z: np.ndarray, metric: str) -> np.ndarray:
    if metric == "euclidean":
        return np.linalg.norm(Z - x[None, :], axis=1)
    # cosine distance 1 - cos(x, z); zero vectors count as orthogonal
    nx = np.linalg.norm(x)
    nz = np.linalg.norm(Z, axis=1)
    dist = np.ones(Z.shape[0])
    if nx == 0.0:
        logger.info("cosine kernel: index sample is the zero vector, distance fixed at 1")
        return dist
    ok = nz > 0.0
    if not ok.all():
        logger.info("cosine kernel: %d zero-vector rows get distance 1", int((~ok).sum()))
    dist[ok] = 1.0 - (Z[ok] @ x) / (nz[ok] * nx)
    return dist


def proximity_weights(x: np.ndarray, Z: np.ndarray, kernel: KernelConfig) -> np.ndarray:
    """exp(-dist(x, z_i)^2 / width^2) for every row of Z."""
    x = np.asarray(x, dtype=float)
    Z = np.asarray(Z, dtype=float)
    if Z.ndim != 2 or Z.shape[0] == 0:
        raise ValueError("Z must be a nonempty 2-D matrix")
    if kernel.scale is not None:
        if len(kernel.scale) != Z.shape[1]:
            raise ValueError(
                f"kernel scale has {len(kernel.scale)} entries for d={Z.shape[1]}"
            )
        s = np.asarray(kernel.scale, dtype=float)
        s[s == 0.0] = 1.0
        x = x / s
        Z = Z / s
    dist = _distances(x, Z, kernel.metric)
    return np.exp(-(dist**2) / kernel.width**2)


def label_with_blackbox(
    model: ProbabilityModel,
    Z: np.ndarray,
    x: np.ndarray,
    kernel: KernelConfig,
) -> SurrogateSet:
    """Query the black box on Z and assemble the full SurrogateSet."""
    Z = np.asarray(Z, dtype=float)
    probs = predict_proba(model, Z)
    return SurrogateSet(
        Z=Z,
        probs=probs,
        hard_labels=np.argmax(probs, axis=1),
        weights=proximity_weights(x, Z, kernel),
        index_sample=np.asarray(x, dtype=float),
        kernel=kernel,
        provenance=[PROVENANCE_BOOTSTRAP] * Z.shape[0],
    )


def _append_rows(s: SurrogateSet, Z_new, probs_new, weights_new, provenance_tag) -> SurrogateSet:
    Z_new = np.atleast_2d(np.asarray(Z_new, dtype=float))
    probs_new = np.atleast_2d(np.asarray(probs_new, dtype=float))
    return replace(
        s,
        Z=np.vstack([s.Z, Z_new]),
        probs=np.vstack([s.probs, probs_new]),
        hard_labels=np.concatenate([s.hard_labels, np.argmax(probs_new, axis=1)]),
        weights=np.concatenate([s.weights, np.asarray(weights_new, dtype=float)]),
        provenance=list(s.provenance) + [provenance_tag] * Z_new.shape[0],
    )


def balance_ros(s: SurrogateSet, seed: int | np.random.SeedSequence = 0) -> SurrogateSet:
    """Random oversampling: duplicate minority rows until all counts match the majority.

    Duplicates keep their source row's probabilities and weights; inputs are
    never mutated. An already-balanced set comes back as-is.
    """
    counts = s.class_counts()
    if len(counts) < 2:
        raise SingleClassNeighborhood(
            "all surrogate samples share one hard label; widen the neighborhood"
        )
    majority = max(counts.values())
    if all(c == majority for c in counts.values()):
        return s
    rng = np.random.default_rng(seed)
    picked = []
    for cls in sorted(counts):
        deficit = majority - counts[cls]
        if deficit == 0:
            continue
        rows = np.nonzero(s.hard_labels == cls)[0]
        picked.append(rng.choice(rows, size=deficit, replace=True))
    dup = np.concatenate(picked)
    return _append_rows(s, s.Z[dup], s.probs[dup], s.weights[dup], PROVENANCE_ROS)
