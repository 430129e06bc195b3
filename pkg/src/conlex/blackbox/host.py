"""Stdio model host: serve any ProbabilityModel over the line protocol.

Run as a module to host the built-in forest, either from a serialized model
file or trained on the spot from a CSV:

    python -m conlex.blackbox.host --model forest.json
    python -m conlex.blackbox.host --train data.csv --label target --seed 7
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .base import ProbabilityModel
from .external import response_line
from .forest import ForestModel, train_forest


def serve_stdio(model: ProbabilityModel, stdin=None, stdout=None) -> None:
    """Answer handshake and instance requests until stdin closes."""
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    for raw in stdin:
        raw = raw.strip()
        if not raw:
            continue
        msg = json.loads(raw)
        if msg.get("hello"):
            stdout.write('{"classes": %d}\n' % model.n_classes)
        else:
            X = np.asarray(msg["instances"], dtype=float)
            if X.size == 0:
                X = X.reshape(0, getattr(model, "n_features", 0) or 0)
            probs = model.predict_proba(X)
            stdout.write(response_line(int(msg["id"]), probs) + "\n")
        stdout.flush()


def _load_csv(path: str, label: str):
    # local import: keeps the host usable without pulling in service deps
    from ..data import ingest_csv

    ds = ingest_csv(path, label, split_fraction=1.0, seed=0)
    return ds.X, ds.y


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="conlex-host")
    group = parser.add_mutually_exclusive_group(required=True)
    group.add_argument("--model", help="path to a serialized forest (JSON)")
    group.add_argument("--train", help="CSV to train a forest on before serving")
    parser.add_argument("--label", help="label column for --train")
    parser.add_argument("--n-trees", type=int, default=100)
    parser.add_argument("--max-depth", type=int, default=8)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    if args.model:
        with open(args.model, "r", encoding="utf-8") as fh:
            model = ForestModel.from_json(fh.read())
    else:
        if not args.label:
            parser.error("--train requires --label")
        X, y = _load_csv(args.train, args.label)
        model = train_forest(X, y, n_trees=args.n_trees, max_depth=args.max_depth, seed=args.seed)
    serve_stdio(model)
    return 0


if __name__ == "__main__":
    sys.exit(main())
