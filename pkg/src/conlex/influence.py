"""Influence-guided subsampling of the surrogate set.

The surrogate rows are split into train and validation parts; a logistic
explainer is fitted on the train part, and each row's influence rho is the
first-order estimate of how much the validation loss would rise if that
row were removed. Softmax of rho/tau gives sampling probabilities, and a
per-class quota keeps the top (or sampled) fraction q, so subsampling
never reintroduces class imbalance.

Objective of the local fit, over the n_train split:

    J(theta) = (1/n_train) [ sum_i ce_i(theta) + (lambda/2) |theta|^2 ]

The penalty covers the intercept too, which keeps the Hessian's smallest
eigenvalue at or above lambda/n_train even when every sigmoid saturates.
Per-point gradients g_i are penalty-free; rho_i = (1/n_train) gbar_v' H^-1 g_i
with gbar_v the mean validation gradient at the optimum.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import IllConditioned
from .surrogate import SurrogateSet

logger = logging.getLogger(__name__)

DEFAULT_VAL_FRACTION = 0.2
DEFAULT_FIT_TOL = 1e-8
DEFAULT_MAX_ITER = 200
CONDITION_LIMIT = 1e12


@dataclass
class LocalFitState:
    """Fitted local model plus everything influence scoring needs."""

    theta: np.ndarray          # (d+1,), intercept last
    gradients: np.ndarray      # (n', d+1) penalty-free per-point CE gradients
    hessian: np.ndarray        # (d+1, d+1) Hessian of J at theta
    train_idx: np.ndarray
    val_idx: np.ndarray
    target_class: int
    lam: float
    n_train: int
    converged: bool
    grad_inf_norm: float


@dataclass
class InfluenceResult:
    rho: np.ndarray
    psi: np.ndarray
    keep: np.ndarray           # (n',) bool
    kept_count: int
    theta_subset: np.ndarray | None
    val_loss_full: float
    val_loss_subset: float

    def validate(self):
        assert int(self.keep.sum()) == self.kept_count
        assert np.all(self.psi >= 0)
        assert abs(float(self.psi.sum()) - 1.0) <= 1e-9


def _sigmoid(u):
    out = np.empty_like(u, dtype=float)
    pos = u >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-u[pos]))
    eu = np.exp(u[~pos])
    out[~pos] = eu / (1.0 + eu)
    return out


def _design(Z):
    return np.hstack([Z, np.ones((Z.shape[0], 1))])


def _ce_per_point(D, t, theta):
    u = D @ theta
    return np.logaddexp(0.0, u) - t * u


def _objective(D, t, theta, lam):
    n = D.shape[0]
    return float((np.sum(_ce_per_point(D, t, theta)) + 0.5 * lam * theta @ theta) / n)


def _fit_penalized(D, t, lam, max_iter, tol):
    """Newton with backtracking on J; the penalized Hessian is always PD."""
    n, p = D.shape
    theta = np.zeros(p)
    obj = _objective(D, t, theta, lam)
    converged = False
    gnorm = np.inf
    for _ in range(max_iter):
        sig = _sigmoid(D @ theta)
        grad = (D.T @ (sig - t) + lam * theta) / n
        gnorm = float(np.max(np.abs(grad)))
        if gnorm < tol:
            converged = True
            break
        w = sig * (1.0 - sig)
        H = (D.T @ (w[:, None] * D) + lam * np.eye(p)) / n
        step = np.linalg.solve(H, -grad)
        slope = float(grad @ step)
        alpha = 1.0
        for _ in range(60):
            cand = theta + alpha * step
            cand_obj = _objective(D, t, cand, lam)
            if cand_obj <= obj + 1e-4 * alpha * slope:
                theta, obj = cand, cand_obj
                break
            alpha *= 0.5
        else:
            break
    return theta, converged, gnorm


def fit_full(
    s: SurrogateSet,
    target_class: int,
    lam: float,
    val_fraction: float = DEFAULT_VAL_FRACTION,
    seed: int | np.random.SeedSequence = 0,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_FIT_TOL,
) -> LocalFitState:
    """Fit the local logistic model on a train split, cache grads and Hessian.

    Non-convergence within the budget is flagged on the state; scores are
    still computed at the best iterate.
    """
    n = s.n
    if n < 10:
        raise ValueError(f"influence fitting needs n' >= 10, got {n}")
    if lam <= 0:
        raise ValueError("lambda must be > 0 to keep the Hessian invertible")
    if not 0.0 < val_fraction <= 0.5:
        raise ValueError("val_fraction must lie in (0, 0.5]")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    n_val = max(1, int(math.floor(val_fraction * n)))
    val_idx = np.sort(perm[:n_val])
    train_idx = np.sort(perm[n_val:])

    D = _design(s.Z)
    t = s.probs[:, target_class]
    theta, converged, gnorm = _fit_penalized(
        D[train_idx], t[train_idx], lam, max_iter, tol
    )
    if not converged:
        logger.info("fit_full: stopped at grad inf-norm %.3g", gnorm)

    sig = _sigmoid(D @ theta)
    gradients = (sig - t)[:, None] * D                     # penalty-free, all rows
    w = (sig * (1.0 - sig))[train_idx]
    n_tr = train_idx.shape[0]
    Dt = D[train_idx]
    hessian = (Dt.T @ (w[:, None] * Dt) + lam * np.eye(D.shape[1])) / n_tr
    return LocalFitState(
        theta=theta,
        gradients=gradients,
        hessian=hessian,
        train_idx=train_idx,
        val_idx=val_idx,
        target_class=int(target_class),
        lam=lam,
        n_train=n_tr,
        converged=converged,
        grad_inf_norm=gnorm,
    )


def influence_scores(state: LocalFitState) -> np.ndarray:
    """rho_i = (1/n_train) gbar_v' H^-1 g_i for every surrogate row.

    One symmetric solve is shared across all rows. Positive rho means
    removing the row is expected to increase validation loss.
    """
    H = state.hessian
    evals = np.linalg.eigvalsh(H)
    if evals[0] <= 0 or evals[-1] / evals[0] > CONDITION_LIMIT:
        raise IllConditioned(
            "influence Hessian condition number exceeds 1e12; increase lambda"
        )
    gbar = state.gradients[state.val_idx].mean(axis=0)
    sol = np.linalg.solve(H, gbar)
    residual = float(np.linalg.norm(H @ sol - gbar))
    if residual > 1e-8 * max(float(np.linalg.norm(gbar)), 1e-300):
        raise IllConditioned("influence solve residual exceeds 1e-8 relative")
    return (state.gradients @ sol) / state.n_train


def sampling_probabilities(rho: np.ndarray, temperature: float | None = None) -> np.ndarray:
    """softmax(rho/tau); tau defaults to std(rho), uniform when rho is constant."""
    rho = np.asarray(rho, dtype=float)
    if not np.all(np.isfinite(rho)):
        raise ValueError("influence values must be finite")
    if temperature is None:
        temperature = float(np.std(rho))
        if temperature == 0.0:
            # constant rho: softmax is uniform at any temperature
            return np.full(rho.shape[0], 1.0 / rho.shape[0])
    if temperature <= 0:
        raise ValueError("temperature must be > 0")
    z = rho / temperature
    z -= z.max()
    e = np.exp(z)
    return e / e.sum()


def _per_class_quota(counts: dict[int, int], q: float) -> dict[int, int]:
    quota = {}
    for cls, n_c in counts.items():
        k = math.ceil(q * n_c)
        if k < min(2, n_c):
            k = min(2, n_c)
            logger.info("subsample: raised quota of class %d to %d", cls, k)
        quota[cls] = k
    return quota


def subsample_and_refit(
    s: SurrogateSet,
    state: LocalFitState,
    rho: np.ndarray,
    psi: np.ndarray,
    q: float,
    mode: str = "deterministic",
    seed: int | np.random.SeedSequence = 0,
) -> tuple[SurrogateSet, InfluenceResult]:
    """Keep ceil(q*n_c) rows of each class, then refit on kept train rows.

    Deterministic mode keeps the highest-rho rows per class; stochastic
    mode samples them without replacement with probabilities psi. Row
    order of the reduced set follows the original set.
    """
    if not 0.0 < q <= 1.0:
        raise ValueError("q must lie in (0, 1]")
    if mode not in ("deterministic", "stochastic"):
        raise ValueError(f"unknown subsample mode {mode!r}")
    n = s.n
    if math.ceil(q * n) < s.d + 2:
        raise ValueError(f"keep fraction too small: ceil(q*n')={math.ceil(q * n)} < d+2")
    rng = np.random.default_rng(seed)
    quota = _per_class_quota(s.class_counts(), q)
    keep = np.zeros(n, dtype=bool)
    for cls in sorted(quota):
        rows = np.nonzero(s.hard_labels == cls)[0]
        k = quota[cls]
        if mode == "deterministic":
            order = rows[np.lexsort((rows, -rho[rows]))]
            chosen = order[:k]
        else:
            p = psi[rows] / psi[rows].sum()
            chosen = rng.choice(rows, size=k, replace=False, p=p)
        keep[chosen] = True
    kept_count = int(keep.sum())

    reduced = replace(
        s,
        Z=s.Z[keep],
        probs=s.probs[keep],
        hard_labels=s.hard_labels[keep],
        weights=s.weights[keep],
        provenance=[s.provenance[i] for i in np.nonzero(keep)[0]],
    )

    D = _design(s.Z)
    t = s.probs[:, state.target_class]
    train_mask = np.zeros(n, dtype=bool)
    train_mask[state.train_idx] = True
    refit_rows = np.nonzero(keep & train_mask)[0]
    theta_subset, _, _ = _fit_penalized(
        D[refit_rows], t[refit_rows], state.lam, DEFAULT_MAX_ITER, DEFAULT_FIT_TOL
    )
    val_rows = state.val_idx
    val_loss_full = float(np.mean(_ce_per_point(D[val_rows], t[val_rows], state.theta)))
    val_loss_subset = float(
        np.mean(_ce_per_point(D[val_rows], t[val_rows], theta_subset))
    )
    result = InfluenceResult(
        rho=rho,
        psi=psi,
        keep=keep,
        kept_count=kept_count,
        theta_subset=theta_subset,
        val_loss_full=val_loss_full,
        val_loss_subset=val_loss_subset,
    )
    return reduced, result
