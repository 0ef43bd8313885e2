"""HTTP service: endpoints, schemas, error mapping."""

import io
import warnings

import pytest

with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    from starlette.testclient import TestClient

from parbuck import __version__
from parbuck.config import bundled_scenario
from parbuck.schemas import CheckModel
from parbuck.service import app
from parbuck.trace import read_csv


@pytest.fixture(scope="module")
def client():
    with TestClient(app) as c:
        yield c


def short_exp2(duration=0.4):
    spec = bundled_scenario("exp2")
    spec.sim.duration = duration
    spec.sim.decimate = 20
    spec.events = []
    spec.checks = []
    return spec


class TestHealth:
    def test_health(self, client):
        resp = client.get("/health")
        assert resp.status_code == 200
        assert resp.json() == {"status": "ok", "version": __version__}


class TestRun:
    def test_run_returns_report_and_trace(self, client):
        payload = {"scenario": short_exp2().model_dump(mode="json")}
        resp = client.post("/run", json=payload)
        assert resp.status_code == 200
        body = resp.json()
        report = body["report"]
        assert report["scenario"] == "exp2"
        assert report["passed"] is True  # no checks declared
        assert report["n_records"] == 2001
        names, data = read_csv(io.StringIO(body["trace_csv"]))
        assert names == report["columns"]
        assert data.shape == (report["n_records"], len(names))

    def test_trace_can_be_omitted(self, client):
        payload = {"scenario": short_exp2().model_dump(mode="json"),
                   "include_trace": False}
        resp = client.post("/run", json=payload)
        assert resp.status_code == 200
        assert resp.json()["trace_csv"] is None

    def test_checks_evaluated(self, client):
        spec = short_exp2(duration=1.0)
        spec.checks = [CheckModel(type="charge_regulation", rel_tol=0.005)]
        resp = client.post("/run", json={"scenario": spec.model_dump(mode="json"),
                                         "include_trace": False})
        assert resp.status_code == 200
        report = resp.json()["report"]
        assert report["passed"] is True
        assert report["checks"][0]["name"] == "charge_regulation"
        assert report["checks"][0]["value"] < 0.005

    def test_domain_invalid_scenario_maps_to_400(self, client):
        spec = short_exp2().model_dump(mode="json")
        spec["bank"]["L"] = [2.83e-3, -1.3e-3]
        resp = client.post("/run", json={"scenario": spec})
        assert resp.status_code == 400
        assert "L" in resp.json()["detail"]

    def test_schema_invalid_payload_maps_to_422(self, client):
        resp = client.post("/run", json={"scenario": {"name": "x"}})
        assert resp.status_code == 422

    def test_diverging_run_maps_to_500(self, client):
        spec = short_exp2()
        spec.sim.duration = 20.0
        spec.sim.dt = 0.02
        resp = client.post("/run", json={"scenario": spec.model_dump(mode="json"),
                                         "include_trace": False})
        assert resp.status_code == 500
        assert "non-finite" in resp.json()["detail"]


class TestVerify:
    def test_small_suite(self, client):
        resp = client.post("/verify", json={"draws": 5, "seed": 7})
        assert resp.status_code == 200
        body = resp.json()
        assert body["passed"] is True
        assert len(body["checks"]) >= 10
        assert "residual" in body["table"]

    def test_bad_range(self, client):
        resp = client.post("/verify", json={"draws": 5, "m_min": 4, "m_max": 2})
        assert resp.status_code == 400


class TestSweep:
    def test_load_sweep(self, client):
        spec = short_exp2(duration=1.0)
        resp = client.post("/sweep", json={
            "scenario": spec.model_dump(mode="json"),
            "parameter": "R", "values": [10.0, 20.0]})
        assert resp.status_code == 200
        body = resp.json()
        assert body["passed"] is True
        assert [row["value"] for row in body["rows"]] == [10.0, 20.0]
        for row in body["rows"]:
            assert row["Q_rel_err"] < 0.01
        header = body["csv"].splitlines()[0].split(",")
        assert header[0] == "R"
        assert len(body["csv"].splitlines()) == 3

    def test_wrong_gain_for_controller_type(self, client):
        spec = short_exp2()
        resp = client.post("/sweep", json={
            "scenario": spec.model_dump(mode="json"),
            "parameter": "k_mu", "values": [1.0]})
        assert resp.status_code == 400

    def test_unknown_parameter_schema_rejected(self, client):
        spec = short_exp2()
        resp = client.post("/sweep", json={
            "scenario": spec.model_dump(mode="json"),
            "parameter": "C", "values": [1.0]})
        assert resp.status_code == 422
