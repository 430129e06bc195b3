"""Framework-free request handlers shared by the HTTP service and the CLI.

Each handler ingests the dataset, resolves the black box (train the
reference forest or connect to an external host), runs the core pipeline
and returns plain dicts of results plus rendered artifacts. No FastAPI
imports here; the CLI calls these directly in local mode.
"""

from __future__ import annotations

import secrets

from ..blackbox import ExternalModel, ExternalModelSpec, open_external, train_forest
from ..data import TabularDataset, ingest_csv
from ..errors import ConfigError
from ..evaluation import stability_experiment
from ..explainers import ExplainConfig, explain_detailed, parse_token
from ..report import (
    stability_csv,
    stability_document,
    svg_bar_chart,
    svg_line_chart,
    write_explanation,
)
from ..surrogate import KernelConfig

DEFAULT_SPLIT_FRACTION = 0.8
FOREST_TREES = 100
FOREST_DEPTH = 8


def pick_seed(seed: int | None) -> tuple[int, bool]:
    """Resolve the run seed; a missing seed is drawn fresh and flagged."""
    if seed is None:
        return secrets.randbits(32), True
    return int(seed), False


def load_dataset(data_path, label, seed: int) -> TabularDataset:
    ds = ingest_csv(data_path, label, split_fraction=DEFAULT_SPLIT_FRACTION, seed=seed)
    ds.validate()
    return ds


def resolve_model(ds: TabularDataset, seed: int, blackbox_cmd: str | None):
    """Train the reference forest, or connect to an external host command.

    Returns (model_or_spec, live_model). For an external command the spec
    is returned alongside a live connection so callers that parallelize
    can hand workers the picklable spec instead.
    """
    if blackbox_cmd:
        spec = ExternalModelSpec(command=blackbox_cmd, n_classes=len(ds.label_values))
        return spec, open_external(spec)
    model = train_forest(
        ds.X[ds.train_idx],
        ds.y[ds.train_idx],
        n_trees=FOREST_TREES,
        max_depth=FOREST_DEPTH,
        seed=seed,
        feature_names=ds.feature_names,
    )
    return model, model


def build_config(
    method: str = "ce-climax",
    balance: str = "gmm",
    influence: bool = False,
    keep_fraction: float = 0.7,
    n_prime: int = 1000,
    k: int = 5,
    lam: float | None = None,
    kernel_width: float | None = None,
    seed: int = 0,
) -> ExplainConfig:
    kernel = KernelConfig(width=kernel_width) if kernel_width is not None else None
    return ExplainConfig(
        method=method,
        balancer=balance,
        influence=influence,
        keep_fraction=keep_fraction,
        n_prime=n_prime,
        k=k,
        lam=lam,
        kernel=kernel,
        seed=seed,
    )


def run_explain(
    data_path,
    label,
    index: int,
    method: str = "ce-climax",
    balance: str = "gmm",
    influence: bool = False,
    keep_fraction: float = 0.7,
    n_prime: int = 1000,
    k: int = 5,
    lam: float | None = None,
    kernel_width: float | None = None,
    seed: int | None = None,
    blackbox_cmd: str | None = None,
) -> dict:
    """Explain one dataset row end to end; returns document, SVG and fields."""
    seed, auto_seed = pick_seed(seed)
    ds = load_dataset(data_path, label, seed)
    if not 0 <= index < ds.n:
        raise ConfigError(f"index {index} out of range for {ds.n} rows")
    cfg = build_config(
        method, balance, influence, keep_fraction, n_prime, k, lam, kernel_width, seed
    )
    _, model = resolve_model(ds, seed, blackbox_cmd)
    try:
        expl, stages = explain_detailed(ds.X[index], model, ds.stats(), cfg)
    finally:
        if isinstance(model, ExternalModel):
            model.close()
    return {
        "explanation": expl,
        "surrogate_stages": stages,
        "document": write_explanation(expl, ds.feature_names),
        "svg": svg_bar_chart(expl, ds.feature_names),
        "dataset": ds,
        "seed": seed,
        "auto_seed": auto_seed,
    }


def run_stability(
    data_path,
    label,
    methods: list[str],
    n_prime_grid: list[int],
    repeats: int = 20,
    index_count: int = 10,
    seed: int | None = None,
    jobs: int = 1,
    blackbox_cmd: str | None = None,
) -> dict:
    """Run the repeated-explanation benchmark over a method x n' grid."""
    seed, auto_seed = pick_seed(seed)
    if not methods:
        raise ConfigError("at least one method token is required")
    if not n_prime_grid:
        raise ConfigError("at least one n' value is required")
    configs = [parse_token(t) for t in methods]
    ds = load_dataset(data_path, label, seed)
    model_ref, model = resolve_model(ds, seed, blackbox_cmd)
    try:
        if isinstance(model, ExternalModel) and jobs == 1:
            ref = model  # reuse the open connection
        else:
            ref = model_ref  # forest, or picklable spec for worker processes
        report = stability_experiment(
            ds,
            ref,
            configs,
            n_prime_grid,
            repeats=repeats,
            index_count=index_count,
            master_seed=seed,
            jobs=jobs,
        )
    finally:
        if isinstance(model, ExternalModel):
            model.close()
    return {
        "report": report,
        "csv": stability_csv([report]),
        "document": stability_document(report),
        "svg": svg_line_chart(report),
        "dataset": ds,
        "seed": seed,
        "auto_seed": auto_seed,
    }
