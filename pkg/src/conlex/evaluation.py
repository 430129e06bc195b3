"""Stability benchmarking and surrogate-fidelity reporting.

The stability protocol repeats each explanation with distinct derived
seeds and scores consistency as the mean pairwise Jaccard of the top-k
feature sets; the fidelity report checks how well a fitted explainer
reproduces the black box's own hard labels on the surrogate set.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from itertools import combinations

import numpy as np

from .blackbox import ExternalModelSpec, open_external
from .explainers import ExplainConfig, Explanation, config_token, explain

logger = logging.getLogger(__name__)

STABILITY_K = 5  # the protocol scores top-5 sets


def jaccard(a, b) -> float:
    """|a n b| / |a u b| for two nonempty feature-index sets."""
    a, b = set(a), set(b)
    if not a and not b:
        raise ValueError("jaccard of two empty sets is undefined")
    return len(a & b) / len(a | b)


@dataclass
class FidelityReport:
    macro_precision: float
    macro_recall: float
    per_class: dict          # collapsed binary split: "target" and "complement"
    confusion: dict          # tp, fp, fn, tn
    class_counts_raw: dict | None
    class_counts_balanced: dict | None
    class_counts_final: dict | None


def fidelity_report(s, e: Explanation) -> FidelityReport:
    """Macro precision/recall of the explainer vs the black-box labels.

    The explainer's hard prediction for row z is 1[sigma(phi.z + b) >= 0.5],
    i.e. the target class iff phi.z + b >= 0; hard labels collapse to the
    same target-vs-complement split. Degenerate denominators score 0.
    """
    if s.d != e.phi.shape[0]:
        raise ValueError("explanation and surrogate set disagree on d")
    u = s.Z @ e.phi + e.intercept
    pred = u >= 0.0
    truth = s.hard_labels == e.target_class
    tp = int(np.sum(pred & truth))
    fp = int(np.sum(pred & ~truth))
    fn = int(np.sum(~pred & truth))
    tn = int(np.sum(~pred & ~truth))

    def _ratio(num, den):
        return num / den if den else 0.0

    p1, r1 = _ratio(tp, tp + fp), _ratio(tp, tp + fn)
    p0, r0 = _ratio(tn, tn + fn), _ratio(tn, tn + fp)
    diag = e.diagnostics or {}
    return FidelityReport(
        macro_precision=(p0 + p1) / 2.0,
        macro_recall=(r0 + r1) / 2.0,
        per_class={
            "target": {"precision": p1, "recall": r1},
            "complement": {"precision": p0, "recall": r0},
        },
        confusion={"tp": tp, "fp": fp, "fn": fn, "tn": tn},
        class_counts_raw=diag.get("class_counts_raw"),
        class_counts_balanced=diag.get("class_counts_balanced"),
        class_counts_final=diag.get("class_counts_final"),
    )


@dataclass
class StabilityCell:
    """One (dataset, method, n') grid cell of the stability report."""

    dataset: str
    method: str
    n_prime: int
    index_ids: list[int]
    sets: dict[int, list[frozenset]]     # index id -> top-k set per successful repeat
    mean_jaccard: dict[int, float]       # index id -> mean over C(repeats, 2) pairs
    grand_mean: float                    # mean of per-index means, NaN if no pairs
    failures: list[tuple[int, int, str]]  # (index id, repeat, message)

    @property
    def complete(self) -> bool:
        return not self.failures


@dataclass
class StabilityReport:
    dataset: str
    methods: list[str]
    n_prime_grid: list[int]
    repeats: int
    index_ids: list[int]
    k: int
    master_seed: int
    cells: list[StabilityCell]

    def grand_mean(self, method: str, n_prime: int) -> float:
        for c in self.cells:
            if c.method == method and c.n_prime == n_prime:
                return c.grand_mean
        raise KeyError((method, n_prime))


def _derived_seed(master_seed: int, *key: int) -> int:
    ss = np.random.SeedSequence(master_seed, spawn_key=tuple(key))
    return int(ss.generate_state(1, np.uint64)[0])


def _mean_pairwise_jaccard(sets: list[frozenset]) -> float:
    if len(sets) < 2:
        return float("nan")
    vals = [jaccard(a, b) for a, b in combinations(sets, 2)]
    return float(sum(vals) / len(vals))


def _resolve_model(model_ref):
    """Accept a live model or an external-host spec (opened per call)."""
    if isinstance(model_ref, ExternalModelSpec):
        return open_external(model_ref), True
    return model_ref, False


def _run_cell(args):
    (
        dataset_name,
        model_ref,
        stats,
        rows,
        index_ids,
        base_cfg,
        n_prime,
        repeats,
        master_seed,
        method_pos,
        nprime_pos,
        explain_fn,
    ) = args
    fn = explain_fn if explain_fn is not None else explain
    model, owned = _resolve_model(model_ref)
    token = config_token(base_cfg)
    sets: dict[int, list[frozenset]] = {}
    means: dict[int, float] = {}
    failures: list[tuple[int, int, str]] = []
    try:
        for sample_pos, (idx, x) in enumerate(zip(index_ids, rows)):
            collected: list[frozenset] = []
            for rep in range(repeats):
                seed = _derived_seed(
                    master_seed, 1, method_pos, nprime_pos, sample_pos, rep
                )
                cfg = replace(base_cfg, n_prime=n_prime, k=STABILITY_K, seed=seed)
                try:
                    expl = fn(x, model, stats, cfg)
                    collected.append(frozenset(j for j, _ in expl.top_features))
                except Exception as exc:  # record and move on, per protocol
                    failures.append((idx, rep, f"{type(exc).__name__}: {exc}"))
            sets[idx] = collected
            means[idx] = _mean_pairwise_jaccard(collected)
    finally:
        if owned:
            model.close()
    valid = [v for v in means.values() if not math.isnan(v)]
    grand = float(sum(valid) / len(valid)) if valid else float("nan")
    return StabilityCell(
        dataset=dataset_name,
        method=token,
        n_prime=n_prime,
        index_ids=list(index_ids),
        sets=sets,
        mean_jaccard=means,
        grand_mean=grand,
        failures=failures,
    )


def stability_experiment(
    dataset,
    model_ref,
    methods: list[ExplainConfig],
    n_prime_grid: list[int],
    repeats: int = 20,
    index_count: int = 10,
    master_seed: int = 0,
    jobs: int = 1,
    explain_fn=None,
) -> StabilityReport:
    """Repeat explanations over a (method x n') grid and score consistency.

    Index samples come from the dataset's test split, drawn uniformly
    without replacement under the master seed. Every repeat gets its own
    deterministically derived seed, so the whole report is reproducible
    regardless of the jobs count. Single-explanation failures are logged
    into the cell and excluded from the means.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    test_idx = np.asarray(dataset.test_idx)
    if test_idx.shape[0] < index_count:
        raise ValueError(
            f"test split has {test_idx.shape[0]} rows, fewer than index_count={index_count}"
        )
    picker = np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(0,)))
    index_ids = [int(i) for i in picker.choice(test_idx, size=index_count, replace=False)]
    rows = [dataset.X[i] for i in index_ids]
    stats = dataset.stats()

    tasks = []
    for m_pos, base_cfg in enumerate(methods):
        for n_pos, n_prime in enumerate(n_prime_grid):
            tasks.append(
                (
                    dataset.name,
                    model_ref,
                    stats,
                    rows,
                    index_ids,
                    base_cfg,
                    int(n_prime),
                    repeats,
                    master_seed,
                    m_pos,
                    n_pos,
                    explain_fn,
                )
            )
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            cells = list(pool.map(_run_cell, tasks))
    else:
        cells = [_run_cell(t) for t in tasks]
    for cell in cells:
        for idx, rep, msg in cell.failures:
            logger.warning(
                "stability: %s n'=%d index %d repeat %d failed: %s",
                cell.method, cell.n_prime, idx, rep, msg,
            )
    return StabilityReport(
        dataset=dataset.name,
        methods=[config_token(c) for c in methods],
        n_prime_grid=[int(n) for n in n_prime_grid],
        repeats=repeats,
        index_ids=index_ids,
        k=STABILITY_K,
        master_seed=master_seed,
        cells=cells,
    )
