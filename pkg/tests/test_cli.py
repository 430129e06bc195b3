"""Tests for the command-line surface and its exit-code contract."""

import subprocess
import sys
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from click.testing import CliRunner

from conlex import ingest_csv, train_forest
from conlex.cli import cli
from conlex.datasets import write_dataset_csv
from conlex.report import parse_explanation

from test_external import CONSTANT_HOST, _host_script

SEED = 11


@pytest.fixture(scope="module")
def csv_path(tmp_path_factory):
    rng = np.random.default_rng(4)
    X = rng.normal(size=(90, 6))
    logits = 2.5 * X[:, 0] - 2.0 * X[:, 2]
    y = (logits + rng.normal(scale=0.4, size=90) > 0).astype(int)
    names = [f"x{j}" for j in range(6)]
    return str(write_dataset_csv(tmp_path_factory.mktemp("cli") / "toy.csv", X, y, names))


def run_cli(*args):
    return CliRunner().invoke(cli, [str(a) for a in args])


def explain_args(csv_path, **overrides):
    opts = {
        "--data": csv_path,
        "--label": "label",
        "--index": 3,
        "--method": "lime",
        "--balance": "none",
        "--n-prime": 150,
        "--k": 2,
        "--seed": SEED,
    }
    opts.update(overrides)
    args = []
    for key, val in opts.items():
        if val is None:
            continue
        args.extend([key, str(val)])
    return args


class TestExplainCommand:
    def test_document_on_stdout(self, csv_path):
        res = run_cli("explain", *explain_args(csv_path))
        assert res.exit_code == 0
        doc = parse_explanation(res.stdout)
        assert doc["method"] == "lime"
        assert doc["seed"] == SEED
        assert len(doc["phi"]) == 6
        assert len(doc["top_features"]) == 2

    def test_k_sets_the_top_feature_count(self, csv_path):
        for k in (1, 4, 6):
            res = run_cli("explain", *explain_args(csv_path, **{"--k": k}))
            assert res.exit_code == 0
            assert len(parse_explanation(res.stdout)["top_features"]) == k

    def test_repeated_runs_are_byte_identical(self, csv_path):
        a = run_cli("explain", *explain_args(csv_path))
        b = run_cli("explain", *explain_args(csv_path))
        assert a.stdout == b.stdout

    def test_different_seeds_differ(self, csv_path):
        a = run_cli("explain", *explain_args(csv_path, **{"--seed": 1}))
        b = run_cli("explain", *explain_args(csv_path, **{"--seed": 2}))
        assert a.stdout != b.stdout

    def test_missing_seed_is_echoed_to_stderr(self, csv_path):
        args = explain_args(csv_path)
        at = args.index("--seed")
        del args[at : at + 2]
        res = run_cli("explain", *args)
        assert res.exit_code == 0
        assert "seed: " in res.stderr
        echoed = int(res.stderr.split("seed: ")[1].split()[0])
        assert parse_explanation(res.stdout)["seed"] == echoed

    def test_out_directory_receives_both_artifacts(self, csv_path, tmp_path):
        out = tmp_path / "artifacts"
        res = run_cli("explain", *explain_args(csv_path), "--out", out)
        assert res.exit_code == 0
        doc = (out / "explanation.txt").read_text()
        assert parse_explanation(doc)["seed"] == SEED
        ET.fromstring((out / "explanation.svg").read_text())

    def test_external_host_matches_in_process_bit_for_bit(self, csv_path, tmp_path):
        # the handler trains the forest with the run seed on the train split
        ds = ingest_csv(csv_path, "label", split_fraction=0.8, seed=SEED)
        forest = train_forest(
            ds.X[ds.train_idx], ds.y[ds.train_idx],
            n_trees=100, max_depth=8, seed=SEED, feature_names=ds.feature_names,
        )
        model_file = tmp_path / "forest.json"
        model_file.write_text(forest.to_json())
        cmd = f"{sys.executable} -m conlex.blackbox.host --model {model_file}"
        local = run_cli("explain", *explain_args(csv_path))
        hosted = run_cli("explain", *explain_args(csv_path, **{"--blackbox-cmd": cmd}))
        assert hosted.exit_code == 0
        assert hosted.stdout == local.stdout


class TestStabilityCommand:
    def test_csv_on_stdout_and_mirror_on_stderr(self, csv_path):
        res = run_cli(
            "stability", "--data", csv_path, "--label", "label",
            "--methods", "lime", "--n-prime", "60", "--repeats", "2",
            "--index-count", "2", "--seed", "3",
        )
        assert res.exit_code == 0
        lines = res.stdout.splitlines()
        assert lines[0] == "dataset,method,n_prime,index_id,mean_jaccard"
        assert "# summary" in lines
        assert "dataset: toy" in res.stderr

    def test_out_directory_files(self, csv_path, tmp_path):
        out = tmp_path / "stab"
        res = run_cli(
            "stability", "--data", csv_path, "--label", "label",
            "--methods", "lime", "--n-prime", "60", "--repeats", "2",
            "--index-count", "2", "--seed", "3", "--out", out,
        )
        assert res.exit_code == 0
        assert (out / "stability.csv").read_text().startswith("dataset,method")
        assert (out / "stability.txt").read_text().startswith("dataset: toy")
        ET.fromstring((out / "stability_toy.svg").read_text())

    def test_seeded_runs_are_identical(self, csv_path):
        args = (
            "stability", "--data", csv_path, "--label", "label",
            "--methods", "lime", "--n-prime", "60", "--repeats", "2",
            "--index-count", "2", "--seed", "8",
        )
        assert run_cli(*args).stdout == run_cli(*args).stdout

    def test_method_grid_covers_token_combinations(self, csv_path):
        res = run_cli(
            "stability", "--data", csv_path, "--label", "label",
            "--methods", "lime,l-climax-ros,ce-climax-gmm-if", "--n-prime", "60,90",
            "--repeats", "2", "--index-count", "2", "--seed", "5",
        )
        assert res.exit_code == 0
        summary = res.stdout.split("# summary\n")[1].splitlines()[1:]
        assert len(summary) == 6  # 3 methods x 2 grid points


def run_proc(*args):
    return subprocess.run(
        [sys.executable, "-m", "conlex.cli", *[str(a) for a in args]],
        capture_output=True, text=True, timeout=300,
    )


class TestExitCodes:
    def test_usage_error_is_2(self, csv_path):
        proc = run_proc("explain", *explain_args(csv_path, **{"--method": "bogus"}))
        assert proc.returncode == 2

    def test_config_error_is_2(self, csv_path):
        proc = run_proc("explain", *explain_args(csv_path, **{"--k": 99}))
        assert proc.returncode == 2
        assert "error:" in proc.stderr

    def test_data_error_is_3(self, tmp_path):
        proc = run_proc("explain", *explain_args(str(tmp_path / "absent.csv")))
        assert proc.returncode == 3

    def test_model_error_is_4(self, csv_path):
        proc = run_proc(
            "explain", *explain_args(csv_path, **{"--blackbox-cmd": "/no/such/host-bin"})
        )
        assert proc.returncode == 4

    def test_numerical_error_is_5(self, csv_path, tmp_path):
        cmd = _host_script(tmp_path, CONSTANT_HOST)
        proc = run_proc(
            "explain",
            *explain_args(csv_path, **{"--balance": "gmm", "--blackbox-cmd": cmd}),
        )
        assert proc.returncode == 5

    def test_success_is_0(self, csv_path):
        proc = run_proc("explain", *explain_args(csv_path))
        assert proc.returncode == 0
        assert proc.stdout.startswith("method: lime")


class TestHelp:
    def test_subcommands_are_listed(self):
        res = run_cli("--help")
        for name in ("explain", "stability", "serve"):
            assert name in res.stdout
