"""CSV ingestion into an in-memory tabular dataset with a seeded split."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InsufficientData, SchemaError
from .surrogate import FeatureStats

logger = logging.getLogger(__name__)

MIN_USABLE_ROWS = 10


@dataclass
class TabularDataset:
    name: str
    feature_names: list[str]
    X: np.ndarray              # (n, d) float
    y: np.ndarray              # (n,) class indices
    label_values: list[str]    # class index -> original label string
    train_idx: np.ndarray
    test_idx: np.ndarray

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def stats(self) -> FeatureStats:
        """Per-feature mean/std over the train split only."""
        return FeatureStats.from_matrix(self.X[self.train_idx])

    def validate(self):
        assert np.all(np.isfinite(self.X))
        assert len(set(self.y.tolist())) >= 2
        both = np.concatenate([self.train_idx, self.test_idx])
        assert sorted(both.tolist()) == list(range(self.n))


def _sorted_labels(values: set[str]) -> list[str]:
    # numeric sort when every label parses as a number, else lexicographic
    try:
        return sorted(values, key=lambda v: (float(v), v))
    except ValueError:
        return sorted(values)


def ingest_csv(
    path,
    label_column,
    split_fraction: float = 0.8,
    seed: int = 0,
) -> TabularDataset:
    """Parse a headered numeric CSV; drop bad rows; seeded shuffle split.

    The label column may be given by header name or by position. Rows
    with any missing or unparseable feature cell are dropped and counted
    in the log. Class indices follow the sorted order of distinct label
    values.
    """
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"no such file: {path}")
    if not 0.0 < split_fraction <= 1.0:
        raise SchemaError(f"split_fraction must lie in (0, 1], got {split_fraction}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path.name}: empty file, expected a header row") from None
        if isinstance(label_column, int):
            if not 0 <= label_column < len(header):
                raise SchemaError(
                    f"{path.name}: label index {label_column} out of range"
                )
            label_pos = label_column
        else:
            if label_column not in header:
                raise SchemaError(
                    f"{path.name}: no column named {label_column!r} in header"
                )
            label_pos = header.index(label_column)
        feature_names = [h for i, h in enumerate(header) if i != label_pos]

        rows: list[list[float]] = []
        labels: list[str] = []
        dropped = 0
        for rec in reader:
            if len(rec) != len(header):
                dropped += 1
                continue
            raw_label = rec[label_pos].strip()
            if not raw_label:
                dropped += 1
                continue
            try:
                feats = [
                    float(cell) for i, cell in enumerate(rec) if i != label_pos
                ]
            except ValueError:
                dropped += 1
                continue
            if not all(np.isfinite(feats)):
                dropped += 1
                continue
            rows.append(feats)
            labels.append(raw_label)
    if dropped:
        logger.info("ingest_csv: dropped %d unusable row(s) from %s", dropped, path.name)
    if len(rows) < MIN_USABLE_ROWS:
        raise InsufficientData(
            f"{path.name}: only {len(rows)} usable rows, need {MIN_USABLE_ROWS}"
        )
    label_values = _sorted_labels(set(labels))
    if len(label_values) < 2:
        raise InsufficientData(
            f"{path.name}: label column has a single distinct value"
        )
    index_of = {v: i for i, v in enumerate(label_values)}
    X = np.asarray(rows, dtype=float)
    y = np.asarray([index_of[v] for v in labels], dtype=int)

    n = X.shape[0]
    perm = np.random.default_rng(seed).permutation(n)
    n_train = min(n, max(1, int(round(split_fraction * n))))
    train_idx = np.sort(perm[:n_train])
    test_idx = np.sort(perm[n_train:])
    return TabularDataset(
        name=path.stem,
        feature_names=feature_names,
        X=X,
        y=y,
        label_values=label_values,
        train_idx=train_idx,
        test_idx=test_idx,
    )
