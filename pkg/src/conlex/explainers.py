"""Local explainer fits and the end-to-end explanation pipeline.

Three interchangeable local models over the same surrogate substrate:

- lime: weighted ridge on the raw target-class probabilities.
- l-climax: weighted ridge on the log-odds of those probabilities.
- ce-climax: logistic fit to the soft probability targets by minimizing
  cross-entropy (unweighted; this variant drops the proximity weighting).

Multiclass reduces to one-vs-rest: the target class against the pooled
probability mass of every other class, so the binary machinery applies
unchanged. All fits carry an unpenalized intercept by default.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .blackbox.base import ProbabilityModel, predict_proba
from .errors import ConfigError, SingleClassNeighborhood, SingularSystem
from .surrogate import (
    SCALE_SCHEDULE,
    FeatureStats,
    KernelConfig,
    SurrogateSet,
    default_kernel_width,
    label_with_blackbox,
    perturb,
)

logger = logging.getLogger(__name__)

METHODS = ("lime", "l-climax", "ce-climax")
BALANCERS = ("none", "ros", "gmm")

DEFAULT_LAMBDA = {"lime": 1.0, "l-climax": 1.0, "ce-climax": 1e-3}
DEFAULT_EPSILON = 1e-6
DEFAULT_N_PRIME = 1000
DEFAULT_K = 5
DEFAULT_KEEP_FRACTION = 0.7
# ridge screening strength used to pre-select features for the CE fit
SCREENING_LAMBDA = 1.0


@dataclass(frozen=True)
class Budget:
    """Iteration and gradient-tolerance budget for the CE optimizer."""

    max_iter: int = 100
    tol: float = 1e-6


@dataclass(frozen=True)
class ExplainConfig:
    method: str = "ce-climax"
    balancer: str = "gmm"
    influence: bool = False
    keep_fraction: float = DEFAULT_KEEP_FRACTION
    influence_mode: str = "deterministic"
    n_prime: int = DEFAULT_N_PRIME
    k: int = DEFAULT_K
    lam: float | None = None          # None resolves to the method default
    epsilon: float = DEFAULT_EPSILON
    budget: Budget = field(default_factory=Budget)
    kernel: KernelConfig | None = None  # None resolves to width 0.75*sqrt(d)
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}, expected one of {METHODS}")
        if self.balancer not in BALANCERS:
            raise ConfigError(
                f"unknown balancer {self.balancer!r}, expected one of {BALANCERS}"
            )
        if self.influence_mode not in ("deterministic", "stochastic"):
            raise ConfigError(f"unknown influence mode {self.influence_mode!r}")
        if not 0.0 < self.keep_fraction <= 1.0:
            raise ConfigError("keep fraction must be in (0, 1]")
        if self.n_prime < 2:
            raise ConfigError("n' must be at least 2")
        if self.k < 1:
            raise ConfigError("k must be at least 1")
        if self.lam is not None and self.lam < 0:
            raise ConfigError("lambda must be >= 0")
        if not 0.0 < self.epsilon < 0.5:
            raise ConfigError("epsilon must lie in (0, 0.5)")

    @property
    def resolved_lambda(self) -> float:
        return DEFAULT_LAMBDA[self.method] if self.lam is None else self.lam

    def echo(self) -> dict:
        return {
            "method": self.method,
            "balancer": self.balancer,
            "influence": self.influence,
            "keep_fraction": self.keep_fraction,
            "influence_mode": self.influence_mode,
            "n_prime": self.n_prime,
            "k": self.k,
            "lambda": self.resolved_lambda,
            "epsilon": self.epsilon,
            "max_iter": self.budget.max_iter,
            "tol": self.budget.tol,
            "seed": self.seed,
        }


def config_token(cfg: "ExplainConfig") -> str:
    """Compact name for a configuration: method[-ros|-gmm][-if]."""
    parts = [cfg.method]
    if cfg.balancer != "none":
        parts.append(cfg.balancer)
    if cfg.influence:
        parts.append("if")
    return "-".join(parts)


def parse_token(token: str) -> "ExplainConfig":
    """Inverse of config_token, with library defaults for everything else."""
    rest = token
    influence = rest.endswith("-if")
    if influence:
        rest = rest[: -len("-if")]
    balancer = "none"
    for b in ("ros", "gmm"):
        if rest.endswith("-" + b):
            balancer = b
            rest = rest[: -len("-" + b)]
            break
    if rest not in METHODS:
        raise ConfigError(f"cannot parse method token {token!r}")
    return ExplainConfig(method=rest, balancer=balancer, influence=influence)


@dataclass
class Explanation:
    """Per-feature attribution scores for one index sample."""

    phi: np.ndarray                       # full d-vector
    intercept: float
    top_features: list[tuple[int, float]]  # (feature index, score), |score| desc
    target_class: int
    contrast_classes: list[int]
    method: str
    config: dict
    diagnostics: dict

    def validate(self):
        d = self.phi.shape[0]
        k = int(self.config.get("k", d))
        assert len(self.top_features) == min(k, d)
        scores = [abs(s) for _, s in self.top_features]
        assert all(a >= b for a, b in zip(scores, scores[1:]))
        assert np.all(np.isfinite(self.phi))


def _sigmoid(u):
    out = np.empty_like(u, dtype=float)
    pos = u >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-u[pos]))
    eu = np.exp(u[~pos])
    out[~pos] = eu / (1.0 + eu)
    return out


def logit_transform(p, epsilon: float = DEFAULT_EPSILON):
    """log(p'/(1-p')) with p clipped into [eps, 1-eps]. Works elementwise."""
    if not 0.0 < epsilon < 0.5:
        raise ValueError("epsilon must lie in (0, 0.5)")
    # clipping p and 1-p separately keeps the map exactly antisymmetric:
    # logit(1-p) is the bitwise negation of logit(p) even at the clipped
    # endpoints, where 1-(1-eps) != eps in floats
    p = np.asarray(p, dtype=float)
    a = np.clip(p, epsilon, 1.0 - epsilon)
    b = np.clip(1.0 - p, epsilon, 1.0 - epsilon)
    out = np.log(a) - np.log(b)
    return out if out.ndim else float(out)


def _weighted_ridge(Z, y, w, lam, fit_intercept):
    """Solve argmin sum_i w_i (y_i - phi.z_i - b)^2 + lam |phi|^2.

    The intercept column is appended unpenalized. Raises SingularSystem
    when the normal matrix is numerically rank deficient (lam = 0 on a
    degenerate design).
    """
    n, d = Z.shape
    D = np.hstack([Z, np.ones((n, 1))]) if fit_intercept else Z
    A = D.T @ (w[:, None] * D)
    A[np.arange(d), np.arange(d)] += lam
    evals = np.linalg.eigvalsh(A)
    if evals[-1] <= 0 or evals[0] < 1e-12 * evals[-1]:
        raise SingularSystem(
            "weighted ridge normal equations are singular; set lambda > 0"
        )
    sol = np.linalg.solve(A, D.T @ (w * y))
    phi = sol[:d]
    b = float(sol[d]) if fit_intercept else 0.0
    resid = y - D @ sol
    loss = float(np.sum(w * resid**2) + lam * np.sum(phi**2))
    return phi, b, loss


def _all_features_ranked(phi):
    order = sorted(range(phi.shape[0]), key=lambda j: (-abs(phi[j]), j))
    return [(j, float(phi[j])) for j in order]


def _ridge_explanation(s, target_class, phi, b, loss, method, extra_cfg):
    c = int(target_class)
    return Explanation(
        phi=phi,
        intercept=b,
        top_features=_all_features_ranked(phi),
        target_class=c,
        contrast_classes=[j for j in range(s.n_classes) if j != c],
        method=method,
        config={"k": s.d, **extra_cfg},
        diagnostics={"final_loss": loss, "iterations": 0, "non_converged": False},
    )


def fit_lime(
    s: SurrogateSet,
    target_class: int,
    lam: float = DEFAULT_LAMBDA["lime"],
    fit_intercept: bool = True,
) -> Explanation:
    """Weighted ridge on the raw probabilities of the target class."""
    y = s.probs[:, target_class]
    phi, b, loss = _weighted_ridge(s.Z, y, s.weights, lam, fit_intercept)
    return _ridge_explanation(s, target_class, phi, b, loss, "lime", {"lambda": lam})


def fit_l_climax(
    s: SurrogateSet,
    target_class: int,
    lam: float = DEFAULT_LAMBDA["l-climax"],
    epsilon: float = DEFAULT_EPSILON,
    fit_intercept: bool = True,
) -> Explanation:
    """Weighted ridge on the one-vs-rest log-odds of the target class."""
    ell = logit_transform(s.probs[:, target_class], epsilon)
    phi, b, loss = _weighted_ridge(s.Z, ell, s.weights, lam, fit_intercept)
    return _ridge_explanation(
        s, target_class, phi, b, loss, "l-climax", {"lambda": lam, "epsilon": epsilon}
    )


def _ce_loss(D, t, theta, lam, d):
    u = D @ theta
    ce = float(np.sum(np.logaddexp(0.0, u) - t * u))
    return ce + lam * float(np.sum(theta[:d] ** 2))


def _ce_grad_hess(D, t, theta, lam, d):
    """Gradient and Hessian of _ce_loss; the penalty skips the intercept."""
    sig = _sigmoid(D @ theta)
    grad = D.T @ (sig - t)
    grad[:d] += 2.0 * lam * theta[:d]
    w = sig * (1.0 - sig)
    H = D.T @ (w[:, None] * D)
    H[np.arange(d), np.arange(d)] += 2.0 * lam
    return grad, H


def _ce_minimize(Z, t, lam, budget, fit_intercept=True):
    """Damped Newton on the soft-label cross-entropy, gradient-descent fallback.

    Every accepted step strictly decreases the objective (backtracking line
    search), so the recorded loss trace is non-increasing.
    """
    n, d = Z.shape
    D = np.hstack([Z, np.ones((n, 1))]) if fit_intercept else Z
    p = D.shape[1]
    theta = np.zeros(p)
    loss = _ce_loss(D, t, theta, lam, d)
    loss_trace = [loss]
    norm_trace = [0.0]
    iterations = 0
    converged = False
    gnorm = np.inf
    for _ in range(budget.max_iter):
        grad, H = _ce_grad_hess(D, t, theta, lam, d)
        gnorm = float(np.max(np.abs(grad)))
        if gnorm < budget.tol:
            converged = True
            break
        try:
            step = np.linalg.solve(H, -grad)
            if not np.all(np.isfinite(step)):
                raise np.linalg.LinAlgError
        except np.linalg.LinAlgError:
            step = -grad
        improved = False
        for direction in (step, -grad):
            slope = float(grad @ direction)
            if slope >= 0:
                continue
            alpha = 1.0
            for _ in range(60):
                cand = theta + alpha * direction
                cand_loss = _ce_loss(D, t, cand, lam, d)
                if cand_loss <= loss + 1e-4 * alpha * slope:
                    theta, loss = cand, cand_loss
                    improved = True
                    break
                alpha *= 0.5
            if improved:
                break
        iterations += 1
        loss_trace.append(loss)
        norm_trace.append(float(np.linalg.norm(theta[:d])))
        if not improved:
            # no descent direction makes progress; stop at the best iterate
            break
    phi = theta[:d]
    b = float(theta[d]) if fit_intercept else 0.0
    diagnostics = {
        "final_loss": loss,
        "iterations": iterations,
        "non_converged": not converged,
        "grad_inf_norm": gnorm,
        "loss_trace": loss_trace,
        "coef_norm_trace": norm_trace,
    }
    return phi, b, diagnostics


def fit_ce_climax(
    s: SurrogateSet,
    target_class: int,
    lam: float = DEFAULT_LAMBDA["ce-climax"],
    budget: Budget = Budget(),
    fit_intercept: bool = True,
) -> Explanation:
    """Logistic fit to soft targets t_i = probs[i, target] by cross-entropy.

    Unweighted by design: this variant does not apply the proximity kernel.
    Non-convergence within the budget is flagged, not raised.
    """
    t = s.probs[:, target_class]
    phi, b, diag = _ce_minimize(s.Z, t, lam, budget, fit_intercept)
    if diag["non_converged"]:
        logger.info(
            "fit_ce_climax: stopped at grad inf-norm %.3g after %d iterations",
            diag["grad_inf_norm"],
            diag["iterations"],
        )
    c = int(target_class)
    return Explanation(
        phi=phi,
        intercept=b,
        top_features=_all_features_ranked(phi),
        target_class=c,
        contrast_classes=[j for j in range(s.n_classes) if j != c],
        method="ce-climax",
        config={"k": s.d, "lambda": lam, "max_iter": budget.max_iter, "tol": budget.tol},
        diagnostics=diag,
    )


def forward_select(
    s: SurrogateSet,
    target: np.ndarray,
    k: int,
    lam: float,
    fit_intercept: bool = True,
) -> list[int]:
    """Greedy forward selection by weighted ridge residual.

    Adds at each step the feature whose inclusion gives the smallest
    weighted squared residual on the restricted design; ties go to the
    lowest feature index. Returns indices in selection order.
    """
    d = s.d
    if not 1 <= k <= d:
        raise ValueError(f"need 1 <= k <= d, got k={k}, d={d}")
    target = np.asarray(target, dtype=float)
    selected: list[int] = []
    remaining = list(range(d))
    for _ in range(k):
        best_j = None
        best_res = np.inf
        for j in remaining:
            cols = selected + [j]
            Zr = s.Z[:, cols]
            n = Zr.shape[0]
            D = np.hstack([Zr, np.ones((n, 1))]) if fit_intercept else Zr
            A = D.T @ (s.weights[:, None] * D)
            A[np.arange(len(cols)), np.arange(len(cols))] += lam
            sol = np.linalg.solve(A, D.T @ (s.weights * target))
            resid = target - D @ sol
            res = float(np.sum(s.weights * resid**2))
            if res < best_res:
                best_res = res
                best_j = j
        selected.append(best_j)
        remaining.remove(best_j)
    return selected


def _top_features(phi, selected):
    order = sorted(selected, key=lambda j: (-abs(phi[j]), j))
    return [(j, float(phi[j])) for j in order]


def _build_surrogate(x, model, stats, cfg, kernel, perturb_ss):
    """Perturb and label, escalating the spread until two classes appear.

    The escalation schedule only runs when a balancer is requested; the
    plain pipeline keeps the base scale regardless of label diversity.
    """
    scales = SCALE_SCHEDULE if cfg.balancer != "none" else SCALE_SCHEDULE[:1]
    attempts = perturb_ss.spawn(len(scales))
    s = None
    scale_used = scales[0]
    for scale, attempt_ss in zip(scales, attempts):
        Z = perturb(x, stats, cfg.n_prime, scale=scale, seed=attempt_ss)
        s = label_with_blackbox(model, Z, x, kernel)
        scale_used = scale
        if cfg.balancer == "none" or len(s.class_counts()) >= 2:
            break
    else:
        raise SingleClassNeighborhood(
            "neighborhood stayed single-class after the full escalation schedule"
        )
    return s, scale_used


def explain_detailed(
    x: np.ndarray,
    model: ProbabilityModel,
    stats: FeatureStats,
    cfg: ExplainConfig,
) -> tuple[Explanation, dict]:
    """Full pipeline, also returning the intermediate surrogate sets.

    Stages: perturb (escalating spread) -> black-box labeling -> class
    balancing -> optional influence subsampling -> fit -> forward
    selection. The extras dict maps stage names ("raw", "balanced",
    "final") to SurrogateSets for downstream fidelity checks.
    """
    x = np.asarray(x, dtype=float)
    d = x.shape[0]
    if cfg.k > d:
        raise ConfigError(f"k={cfg.k} exceeds feature count d={d}")
    if stats.d != d:
        raise ConfigError(f"stats describe d={stats.d} features, index sample has {d}")
    # The kernel measures distance in train-set standard deviations unless the
    # caller pins an explicit scale; otherwise the 0.75*sqrt(d) default width
    # would mean something different on every dataset.
    kernel = cfg.kernel or KernelConfig(width=default_kernel_width(d))
    if kernel.scale is None:
        kernel = replace(kernel, scale=tuple(stats.std))
    lam = cfg.resolved_lambda

    px = predict_proba(model, x[None, :])[0]
    target = int(np.argmax(px))

    ss = np.random.SeedSequence(cfg.seed)
    perturb_ss, balance_ss, infl_ss = ss.spawn(3)

    s_raw, scale_used = _build_surrogate(x, model, stats, cfg, kernel, perturb_ss)
    diagnostics: dict = {
        "scale_used": scale_used,
        "n_raw": s_raw.n,
        "class_counts_raw": s_raw.class_counts(),
    }

    if cfg.balancer == "ros":
        from .surrogate import balance_ros

        s_bal = balance_ros(s_raw, seed=balance_ss)
    elif cfg.balancer == "gmm":
        from .gmm import balance_gmm, fit_gmm

        fit_ss, draw_ss = balance_ss.spawn(2)
        gmm = fit_gmm(s_raw, seed=fit_ss)
        gmm_stats: dict = {}
        s_bal = balance_gmm(s_raw, model, gmm, seed=draw_ss, stats_out=gmm_stats)
        diagnostics.update(gmm_stats)
    else:
        s_bal = s_raw
    diagnostics["n_balanced"] = s_bal.n
    diagnostics["class_counts_balanced"] = s_bal.class_counts()

    if cfg.influence:
        from .influence import (
            fit_full,
            influence_scores,
            sampling_probabilities,
            subsample_and_refit,
        )

        fit_ss, sub_ss = infl_ss.spawn(2)
        lam_infl = lam if cfg.method == "ce-climax" else DEFAULT_LAMBDA["ce-climax"]
        state = fit_full(s_bal, target, lam=lam_infl, seed=fit_ss)
        rho = influence_scores(state)
        psi = sampling_probabilities(rho)
        s_final, infl_result = subsample_and_refit(
            s_bal, state, rho, psi, q=cfg.keep_fraction, mode=cfg.influence_mode, seed=sub_ss
        )
        diagnostics["influence_kept"] = infl_result.kept_count
        diagnostics["val_loss_full"] = infl_result.val_loss_full
        diagnostics["val_loss_subset"] = infl_result.val_loss_subset
    else:
        s_final = s_bal
    diagnostics["n_final"] = s_final.n
    diagnostics["class_counts_final"] = s_final.class_counts()

    if cfg.method == "lime":
        fit = fit_lime(s_final, target, lam)
        sel = forward_select(s_final, s_final.probs[:, target], cfg.k, lam)
        phi, b = fit.phi, fit.intercept
        fit_diag = fit.diagnostics
    elif cfg.method == "l-climax":
        fit = fit_l_climax(s_final, target, lam, cfg.epsilon)
        ell = logit_transform(s_final.probs[:, target], cfg.epsilon)
        sel = forward_select(s_final, ell, cfg.k, lam)
        phi, b = fit.phi, fit.intercept
        fit_diag = fit.diagnostics
    else:
        # screen with a cheap ridge proxy on the log-odds, then run the CE
        # fit restricted to the selected columns
        ell = logit_transform(s_final.probs[:, target], cfg.epsilon)
        sel = forward_select(s_final, ell, cfg.k, SCREENING_LAMBDA)
        cols = sorted(sel)
        restricted = replace(s_final, Z=s_final.Z[:, cols])
        t = restricted.probs[:, target]
        phi_r, b, fit_diag = _ce_minimize(restricted.Z, t, lam, cfg.budget)
        phi = np.zeros(d)
        phi[cols] = phi_r

    diagnostics.update(
        {k: v for k, v in fit_diag.items() if k not in ("loss_trace", "coef_norm_trace")}
    )
    expl = Explanation(
        phi=phi,
        intercept=b,
        top_features=_top_features(phi, sel),
        target_class=target,
        contrast_classes=[j for j in range(s_final.n_classes) if j != target],
        method=cfg.method,
        config=cfg.echo(),
        diagnostics=diagnostics,
    )
    return expl, {"raw": s_raw, "balanced": s_bal, "final": s_final}


def explain(
    x: np.ndarray,
    model: ProbabilityModel,
    stats: FeatureStats,
    cfg: ExplainConfig,
) -> Explanation:
    """End-to-end pipeline returning just the Explanation."""
    expl, _ = explain_detailed(x, model, stats, cfg)
    return expl
