"""Mixture-model balancing of the surrogate set.

Fits a diagonal-covariance Gaussian mixture to the surrogate rows by EM,
tags each component with the majority black-box label of its points, then
draws minority-class candidates from same-label components, keeping only
candidates the black box actually assigns to the target class (so no row
ever carries a fabricated label). Any remaining deficit falls back to
random oversampling.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .blackbox.base import ProbabilityModel, predict_proba
from .errors import DegenerateComponent, SingleClassNeighborhood
from .surrogate import (
    PROVENANCE_GMM,
    PROVENANCE_ROS,
    SurrogateSet,
    _append_rows,
    proximity_weights,
)

logger = logging.getLogger(__name__)

# relative variance floor: 1e-6 x per-feature data variance
VARIANCE_FLOOR_REL = 1e-6
_ABS_FLOOR = 1e-12


@dataclass
class GmmModel:
    """Fitted diagonal mixture plus per-component majority labels."""

    n_components: int
    mixing: np.ndarray        # (K,) on the simplex
    means: np.ndarray         # (K, d)
    variances: np.ndarray     # (K, d), every entry >= the floor used at fit time
    labels: np.ndarray        # (K,) majority hard label per component
    log_likelihood_trace: list[float]

    def sample(
        self,
        n: int,
        rng: np.random.Generator,
        components: list[int] | None = None,
    ) -> np.ndarray:
        """Draw n points; restrict to a component subset (weights renormalized)."""
        if components is None:
            comps = np.arange(self.n_components)
        else:
            comps = np.asarray(components, dtype=int)
        w = self.mixing[comps]
        w = w / w.sum()
        picks = rng.choice(comps, size=n, p=w)
        g = rng.standard_normal(size=(n, self.means.shape[1]))
        return self.means[picks] + np.sqrt(self.variances[picks]) * g


def _log_gaussian_prob(X, means, variances):
    # (n, K) log N(x_i; mu_k, diag var_k)
    const = -0.5 * np.sum(np.log(2.0 * np.pi * variances), axis=1)  # (K,)
    diff = X[:, None, :] - means[None, :, :]
    quad = -0.5 * np.sum(diff**2 / variances[None, :, :], axis=2)
    return const[None, :] + quad


def _logsumexp(a, axis):
    m = np.max(a, axis=axis, keepdims=True)
    return (m + np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True))).squeeze(axis)


def _kmeanspp_centers(X, K, rng):
    n = X.shape[0]
    centers = [X[rng.integers(n)]]
    for _ in range(1, K):
        d2 = np.min(
            np.stack([np.sum((X - c[None, :]) ** 2, axis=1) for c in centers]), axis=0
        )
        total = d2.sum()
        if total <= 0:
            centers.append(X[rng.integers(n)])
        else:
            centers.append(X[rng.choice(n, p=d2 / total)])
    return np.stack(centers)


def _em(X, K, max_iter, tol, floor, means, variances, mixing):
    trace = []
    prev = -np.inf
    for _ in range(max_iter):
        log_prob = np.log(mixing)[None, :] + _log_gaussian_prob(X, means, variances)
        row_lse = _logsumexp(log_prob, axis=1)
        ll = float(row_lse.sum())
        trace.append(ll)
        if ll - prev < tol:
            break
        prev = ll
        resp = np.exp(log_prob - row_lse[:, None])
        nk = resp.sum(axis=0)
        if np.any(nk <= 0):
            return trace, means, variances, mixing, False
        mixing = nk / X.shape[0]
        means = (resp.T @ X) / nk[:, None]
        diff2 = (X[:, None, :] - means[None, :, :]) ** 2
        var = np.einsum("nk,nkd->kd", resp, diff2) / nk[:, None]
        # clamping is the exact M-step over {var >= floor}, so the trace stays monotone
        variances = np.maximum(var, floor[None, :])
    return trace, means, variances, mixing, True


def _assignments(X, means, variances, mixing):
    log_prob = np.log(mixing)[None, :] + _log_gaussian_prob(X, means, variances)
    return np.argmax(log_prob, axis=1)


def fit_gmm(
    s: SurrogateSet,
    n_components: int | None = None,
    max_iter: int = 100,
    tol: float = 1e-6,
    seed: int | np.random.SeedSequence = 0,
) -> GmmModel:
    """EM fit on the surrogate rows; K defaults to the class count.

    Components are seeded k-means++ style. A component that ends up owning
    no points (by maximum responsibility) is reseeded once; if that recurs
    the fit raises DegenerateComponent. Reseeding restarts the trace.
    """
    X = s.Z
    K = s.n_classes if n_components is None else int(n_components)
    if not 1 <= K <= X.shape[0]:
        raise ValueError(f"need n' >= K >= 1, got n'={X.shape[0]}, K={K}")
    rng = np.random.default_rng(seed)
    data_var = X.var(axis=0)
    floor = np.maximum(VARIANCE_FLOOR_REL * data_var, _ABS_FLOOR)

    def fresh_params():
        means = _kmeanspp_centers(X, K, rng)
        variances = np.tile(np.maximum(data_var, floor), (K, 1))
        mixing = np.full(K, 1.0 / K)
        return means, variances, mixing

    means, variances, mixing = fresh_params()
    for attempt in range(2):
        trace, means, variances, mixing, ok = _em(
            X, K, max_iter, tol, floor, means, variances, mixing
        )
        assign = _assignments(X, means, variances, mixing)
        owned = np.bincount(assign, minlength=K)
        if ok and np.all(owned > 0):
            break
        if attempt == 1:
            raise DegenerateComponent(
                "a mixture component owns no points even after reseeding"
            )
        logger.info("fit_gmm: reseeding %d empty component(s)", int((owned == 0).sum()))
        means, variances, mixing = fresh_params()
    labels = np.array(
        [
            int(np.bincount(s.hard_labels[assign == k], minlength=s.n_classes).argmax())
            for k in range(K)
        ]
    )
    return GmmModel(
        n_components=K,
        mixing=mixing,
        means=means,
        variances=variances,
        labels=labels,
        log_likelihood_trace=trace,
    )


def balance_gmm(
    s: SurrogateSet,
    model: ProbabilityModel,
    gmm: GmmModel,
    seed: int | np.random.SeedSequence = 0,
    rejection_factor: int = 10,
    stats_out: dict | None = None,
) -> SurrogateSet:
    """Top up every minority class with label-checked mixture draws.

    Candidates come from components labeled with the target class; each is
    queried against the black box and kept only if its hard label matches.
    The draw budget is rejection_factor x deficit per class; whatever is
    still missing afterwards is filled by random oversampling.
    """
    counts = s.class_counts()
    if len(counts) < 2:
        raise SingleClassNeighborhood(
            "all surrogate samples share one hard label; widen the neighborhood"
        )
    majority = max(counts.values())
    rng = np.random.default_rng(seed)
    out = s
    drawn_total = 0
    accepted_total = 0
    for cls in sorted(counts):
        deficit = majority - counts[cls]
        if deficit == 0:
            continue
        comps = [k for k in range(gmm.n_components) if gmm.labels[k] == cls]
        accepted_Z: list[np.ndarray] = []
        accepted_probs: list[np.ndarray] = []
        n_accepted = 0
        if not comps:
            logger.info("balance_gmm: no component labeled class %d, falling back to ROS", cls)
        else:
            budget = rejection_factor * deficit
            drawn = 0
            while n_accepted < deficit and drawn < budget:
                chunk = min(budget - drawn, max(deficit - n_accepted, 64))
                cand = gmm.sample(chunk, rng, components=comps)
                probs = predict_proba(model, cand)
                drawn += chunk
                hit = np.argmax(probs, axis=1) == cls
                take = np.nonzero(hit)[0][: deficit - n_accepted]
                if take.size:
                    accepted_Z.append(cand[take])
                    accepted_probs.append(probs[take])
                    n_accepted += take.size
            drawn_total += drawn
            accepted_total += n_accepted
        if n_accepted:
            Z_new = np.vstack(accepted_Z)
            out = _append_rows(
                out,
                Z_new,
                np.vstack(accepted_probs),
                proximity_weights(s.index_sample, Z_new, s.kernel),
                PROVENANCE_GMM,
            )
        if n_accepted < deficit:
            fill = deficit - n_accepted
            rows = np.nonzero(s.hard_labels == cls)[0]
            dup = rng.choice(rows, size=fill, replace=True)
            out = _append_rows(
                out, s.Z[dup], s.probs[dup], s.weights[dup], PROVENANCE_ROS
            )
            logger.info(
                "balance_gmm: class %d short by %d after %s, filled by ROS",
                cls,
                fill,
                "rejection" if comps else "missing components",
            )
    if stats_out is not None:
        stats_out["gmm_candidates_drawn"] = drawn_total
        stats_out["gmm_candidates_accepted"] = accepted_total
    return out
