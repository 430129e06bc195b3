"""Tests for the HTTP service surface."""

import xml.etree.ElementTree as ET

import numpy as np
import pytest
from fastapi.testclient import TestClient

import conlex
from conlex.datasets import write_dataset_csv
from conlex.report import parse_explanation
from conlex.service import create_app

from test_external import CONSTANT_HOST, _host_script


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app(), raise_server_exceptions=False)


@pytest.fixture(scope="module")
def csv_path(tmp_path_factory):
    rng = np.random.default_rng(2)
    X = rng.normal(size=(80, 6))
    logits = 3.0 * X[:, 0] - 2.0 * X[:, 1]
    y = (logits + rng.normal(scale=0.5, size=80) > 0).astype(int)
    return str(
        write_dataset_csv(
            tmp_path_factory.mktemp("svc") / "toy.csv",
            X,
            y,
            ["alpha", "beta", "gamma", "delta", "eps", "zeta"],
        )
    )


def _explain_body(csv_path, **overrides):
    body = {
        "data_path": csv_path,
        "label": "label",
        "index": 0,
        "method": "lime",
        "balance": "none",
        "n_prime": 120,
        "k": 2,
        "seed": 5,
    }
    body.update(overrides)
    return body


class TestHealth:
    def test_healthz(self, client):
        r = client.get("/healthz")
        assert r.status_code == 200
        assert r.json() == {"status": "ok", "version": conlex.__version__}


class TestExplainEndpoint:
    def test_happy_path(self, client, csv_path):
        r = client.post("/explain", json=_explain_body(csv_path))
        assert r.status_code == 200
        out = r.json()
        assert out["method"] == "lime"
        assert out["seed"] == 5
        assert len(out["phi"]) == 6
        assert len(out["top_features"]) == 2
        names = {t["name"] for t in out["top_features"]}
        assert names <= {"alpha", "beta", "gamma", "delta", "eps", "zeta"}
        parsed = parse_explanation(out["document"])
        assert parsed["seed"] == 5
        np.testing.assert_allclose(parsed["phi"], out["phi"])
        ET.fromstring(out["svg"])

    def test_same_seed_same_answer(self, client, csv_path):
        a = client.post("/explain", json=_explain_body(csv_path)).json()
        b = client.post("/explain", json=_explain_body(csv_path)).json()
        assert a["document"] == b["document"]
        assert a["phi"] == b["phi"]

    def test_missing_seed_is_drawn_and_echoed(self, client, csv_path):
        body = _explain_body(csv_path)
        del body["seed"]
        r = client.post("/explain", json=body)
        assert r.status_code == 200
        assert isinstance(r.json()["seed"], int)

    def test_lambda_alias_reaches_the_fit(self, client, csv_path):
        base = client.post("/explain", json=_explain_body(csv_path)).json()
        shrunk = client.post(
            "/explain", json=_explain_body(csv_path, **{"lambda": 1e9})
        ).json()
        assert max(abs(v) for v in shrunk["phi"]) < 1e-6
        assert max(abs(v) for v in base["phi"]) > 1e-3

    def test_config_error_maps_to_422(self, client, csv_path):
        r = client.post("/explain", json=_explain_body(csv_path, k=99))
        assert r.status_code == 422
        out = r.json()
        assert out["error"] == "ConfigError"
        assert out["exit_code"] == 2

    def test_index_out_of_range_maps_to_422(self, client, csv_path):
        r = client.post("/explain", json=_explain_body(csv_path, index=10_000))
        assert r.status_code == 422

    def test_data_error_maps_to_400(self, client, tmp_path):
        r = client.post("/explain", json=_explain_body(str(tmp_path / "gone.csv")))
        assert r.status_code == 400
        out = r.json()
        assert out["error"] == "SchemaError"
        assert out["exit_code"] == 3

    def test_unlaunchable_blackbox_maps_to_502(self, client, csv_path):
        r = client.post(
            "/explain",
            json=_explain_body(csv_path, blackbox_cmd="/does/not/exist-xyz"),
        )
        assert r.status_code == 502
        out = r.json()
        assert out["error"] == "ModelUnavailable"
        assert out["exit_code"] == 4

    def test_numerical_error_maps_to_500(self, client, csv_path, tmp_path):
        # a constant black box leaves the neighborhood single-class, which
        # the escalation schedule cannot fix
        cmd = _host_script(tmp_path, CONSTANT_HOST)
        r = client.post(
            "/explain",
            json=_explain_body(csv_path, balance="gmm", blackbox_cmd=cmd),
        )
        assert r.status_code == 500
        out = r.json()
        assert out["error"] == "SingleClassNeighborhood"
        assert out["exit_code"] == 5

    def test_pydantic_validation_is_422(self, client):
        r = client.post("/explain", json={"label": "label", "index": 0})
        assert r.status_code == 422


class TestStabilityEndpoint:
    def test_happy_path(self, client, csv_path):
        r = client.post(
            "/stability",
            json={
                "data_path": csv_path,
                "label": "label",
                "methods": ["lime"],
                "n_prime": [60],
                "repeats": 2,
                "index_count": 2,
                "seed": 3,
            },
        )
        assert r.status_code == 200
        out = r.json()
        assert out["dataset"] == "toy"
        assert out["seed"] == 3
        (cell,) = out["cells"]
        assert cell["method"] == "lime"
        assert cell["n_prime"] == 60
        assert cell["failures"] == 0
        assert 0.0 <= cell["grand_mean_jaccard"] <= 1.0
        assert out["csv"].startswith("dataset,method,n_prime,index_id,mean_jaccard")
        assert "dataset: toy" in out["document"]
        ET.fromstring(out["svg"])

    def test_seeded_runs_are_identical(self, client, csv_path):
        body = {
            "data_path": csv_path,
            "label": "label",
            "methods": ["lime"],
            "n_prime": [60],
            "repeats": 2,
            "index_count": 2,
            "seed": 9,
        }
        a = client.post("/stability", json=body).json()
        b = client.post("/stability", json=body).json()
        assert a["csv"] == b["csv"]
        assert a["svg"] == b["svg"]

    def test_empty_methods_is_a_config_error(self, client, csv_path):
        r = client.post(
            "/stability",
            json={"data_path": csv_path, "label": "label", "methods": []},
        )
        assert r.status_code == 422
        assert r.json()["error"] == "ConfigError"

    def test_unknown_method_token_is_a_config_error(self, client, csv_path):
        r = client.post(
            "/stability",
            json={
                "data_path": csv_path,
                "label": "label",
                "methods": ["definitely-not-a-method"],
                "n_prime": [60],
                "repeats": 2,
                "index_count": 2,
                "seed": 1,
            },
        )
        assert r.status_code == 422
        assert r.json()["error"] == "ConfigError"
