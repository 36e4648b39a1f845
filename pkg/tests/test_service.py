import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

import itmor
from itmor.service.app import app

from .conftest import MODELS_DIR


@pytest.fixture(scope="module")
def client():
    return TestClient(app)


@pytest.fixture(scope="module")
def tt_doc():
    return json.load(open(MODELS_DIR / "two_timescale.json"))


@pytest.fixture(scope="module")
def four_doc():
    return json.load(open(MODELS_DIR / "four_state.json"))


def test_health(client):
    body = client.get("/health").json()
    assert body["status"] == "ok"
    assert body["version"] == itmor.__version__


def test_validate(client, tt_doc):
    res = client.post("/validate", json={"model": tt_doc})
    assert res.status_code == 200
    body = res.json()
    assert body["is_schur_stable"] and body["observable"] and body["controllable"]
    assert body["spectral_radius"] == pytest.approx(0.99)


def test_analyze_identity_is_zero(client, tt_doc):
    res = client.post("/analyze", json={"model": tt_doc, "frozen": [], "horizon": 6})
    assert res.status_code == 200
    rows = np.array(res.json()["tables"]["trajectory"]["rows"])
    assert np.all(rows[:, 1] == 0.0)


def test_analyze_exact_mode_matches_library(client, tt_doc, two_timescale, tt_params):
    res = client.post(
        "/analyze",
        json={"model": tt_doc, "frozen": [0], "horizon": 20, "mode": "exact"},
    )
    rows = np.array(res.json()["tables"]["trajectory"]["rows"])
    ref = itmor.nstep_kl_decoupled(tt_params, 0, 20)
    np.testing.assert_allclose(rows[:, 1], ref.values, atol=1e-12)


def test_crossing_endpoint(client, tt_doc):
    res = client.post("/crossing", json={"model": tt_doc, "horizon": 150})
    assert res.status_code == 200
    meta = res.json()["metadata"]
    assert meta["crossing_step"] == "106"
    assert float(meta["lower_bound"]) == pytest.approx(19.0696, abs=1e-3)
    assert float(meta["upper_bound"]) == pytest.approx(107.3598, abs=1e-3)
    assert meta["assumption1"] == "true"


def test_hankel_endpoint(client, four_doc, four_state):
    res = client.post("/hankel", json={"model": four_doc})
    rows = np.array(res.json()["tables"]["hankel"]["rows"])
    ref = itmor.hankel_singular_values(itmor.gramians(four_state)).values
    np.testing.assert_allclose(rows[:, 1], ref, atol=1e-10)


def test_reduce_endpoint(client, four_doc):
    res = client.post(
        "/reduce",
        json={"model": four_doc, "order": 2, "horizon": 30, "mode": "exact"},
    )
    assert res.status_code == 200
    meta = res.json()["metadata"]
    assert meta["candidates"] == "0+1,0+2,0+3,1+2,1+3,2+3"
    assert "best_at_horizon" in meta and "best_asymptotic" in meta


def test_compare_endpoint(client, tt_doc):
    res = client.post(
        "/compare",
        json={"model": tt_doc, "order": 1, "horizon": 150, "mode": "exact"},
    )
    assert res.status_code == 200
    table = res.json()["tables"]["comparison"]
    assert table["columns"][2] == "rank_at_horizon"


def test_pydantic_shape_errors(client, tt_doc):
    assert client.post("/analyze", json={"horizon": 3}).status_code == 422
    assert (
        client.post("/analyze", json={"model": tt_doc, "horizon": -1}).status_code == 422
    )
    extra = dict(tt_doc, unexpected=1)
    assert (
        client.post("/analyze", json={"model": extra, "horizon": 3}).status_code == 422
    )
    bad_mode = {"model": tt_doc, "horizon": 3, "mode": "wrong"}
    assert client.post("/analyze", json=bad_mode).status_code == 422


def test_parse_error_maps_to_400(client, tt_doc):
    ragged = dict(tt_doc, A=[[0.5, 0.1], [0.2]])
    res = client.post("/analyze", json={"model": ragged, "horizon": 3})
    assert res.status_code == 400
    assert res.json()["error"] == "parse"


def test_validation_error_maps_to_400(client, tt_doc):
    unstable = dict(tt_doc, A=[[1.2, 0.0], [0.0, 0.8]])
    res = client.post("/analyze", json={"model": unstable, "frozen": [0], "horizon": 3})
    assert res.status_code == 400
    body = res.json()
    assert body["error"] == "validation"
    assert "stable" in body["message"]


def test_numerical_error_maps_to_422(client):
    degenerate = {
        "name": "degenerate",
        "A": [[0.5, 0.0], [0.0, 0.5]],
        "B": [[0.0], [1.0]],
        "C": [[1.0, 0.0]],
        "sigma": 1.0,
    }
    res = client.post(
        "/analyze",
        json={"model": degenerate, "frozen": [0], "horizon": 3, "mode": "exact"},
    )
    assert res.status_code == 422
    assert res.json()["error"] == "numerical"
