import warnings

import pytest

with warnings.catch_warnings():
    # starlette's client-deprecation notice is not a DeprecationWarning
    warnings.simplefilter("ignore")
    from fastapi.testclient import TestClient

from glauberlab.service.app import app


@pytest.fixture(scope="module")
def client():
    return TestClient(app)


def test_health(client):
    r = client.get("/health")
    assert r.status_code == 200
    body = r.json()
    assert body["status"] == "ok"
    assert body["package"] == "glauberlab"


def test_simulate_deterministic(client):
    req = {"dim": 2, "side": 8, "p": 0.7, "horizon": 10.0, "seed": 11}
    a = client.post("/simulate", json=req)
    b = client.post("/simulate", json=req)
    assert a.status_code == 200
    assert a.json() == b.json()
    body = a.json()
    assert body["outcome"] in ("plus", "minus", "mixed")
    assert len(body["magnetization_trace"]) == 9
    assert None not in body["config"].values()


def test_simulate_schema_rejects_bad_density(client):
    r = client.post("/simulate", json={"dim": 2, "side": 8, "p": 1.5, "horizon": 1.0})
    assert r.status_code == 422


def test_simulate_rejects_unknown_field(client):
    r = client.post(
        "/simulate",
        json={"dim": 2, "side": 8, "p": 0.5, "horizon": 1.0, "extra": 1},
    )
    assert r.status_code == 422


def test_bootstrap_exact_rule_echo(client):
    req = {"dim": 2, "side": 6, "r": 3, "k": 2, "m": 0.3, "p": 0.2, "seed": 4}
    r = client.post("/bootstrap", json=req)
    assert r.status_code == 200
    body = r.json()
    assert body["config"]["r"] == 3
    assert body["config"]["m"] == "3/10"
    assert body["config"]["k"] == 2
    assert body["final_size"] >= body["initial_size"]
    assert body["stage_sizes"][-1] == body["final_size"]
    assert body["percolates"] == (body["final_size"] == body["n_vertices"])


def test_couple_torus_mode_resolves_horizons(client):
    req = {"dim": 3, "side": 5, "p": 0.8, "seed": 9, "replicas": 2}
    r = client.post("/couple", json=req)
    assert r.status_code == 200
    body = r.json()
    assert body["mode"] == "torus"
    assert body["config"]["time_d"] == 3.0
    assert body["config"]["horizon_end"] == 9.0
    assert body["config"]["eps"] == "3/10"
    assert len(body["results"]) == 2
    for res in body["results"]:
        # settled growth forbids a leak; settled growth and enlargement forbid escape
        if res["growth_settled"]:
            assert not res["leak"]
        if res["growth_settled"] and res["enlarged_settled"]:
            assert not res["escape"]


def test_couple_block_mode_resolves_layout(client):
    req = {"dim": 2, "inner_side": 9, "outer_side": 15, "p": 0.85, "T": 5.0, "seed": 2}
    r = client.post("/couple", json=req)
    assert r.status_code == 200
    body = r.json()
    assert body["mode"] == "block"
    assert body["config"]["T"] == 5.0
    assert body["config"]["outer_side"] == 15
    res = body["results"][0]
    assert res["good"] == ((not res["breach"]) and res["core_plus_at_end"])


def test_couple_conflicting_bias_is_400(client):
    req = {"dim": 2, "side": 6, "p": 0.9, "eps": "3/10", "seed": 0}
    r = client.post("/couple", json=req)
    assert r.status_code == 400
    assert "disagree" in r.json()["detail"]


def test_couple_torus_needs_side(client):
    r = client.post("/couple", json={"dim": 2, "p": 0.8})
    assert r.status_code == 400


def test_blocks_endpoint(client):
    req = {
        "dim": 2,
        "global_side": 27,
        "inner_side": 9,
        "outer_side": 15,
        "p": 0.85,
        "T": 5.0,
        "seed": 5,
        "separation_trials": 50,
    }
    a = client.post("/blocks", json=req)
    assert a.status_code == 200
    body = a.json()
    assert body["block_dims"] == [3, 3]
    assert body["n_blocks"] == 9
    assert body["provenance"] == "goodness"
    assert set(body["block_spins"]) <= {-1, 1}
    assert body["omega"] is not None
    assert body["config"]["T"] == 5.0
    # worker count must not alter the field
    b = client.post("/blocks", json={**req, "jobs": 3})
    assert b.json()["block_spins"] == body["block_spins"]
    assert "jobs" not in body["config"]


def test_blocks_indivisible_side_is_400(client):
    req = {"dim": 2, "global_side": 26, "inner_side": 9, "p": 0.85, "T": 5.0}
    r = client.post("/blocks", json=req)
    assert r.status_code == 400


def test_sweep_bootstrap(client):
    req = {
        "process": "bootstrap",
        "dim": 2,
        "side": 6,
        "ps": [0.1, 0.3],
        "r": 2,
        "replicas": 40,
        "seed": 7,
    }
    r = client.post("/sweep", json=req)
    assert r.status_code == 200
    records = r.json()["records"]
    assert [rec["params"]["p"] for rec in records] == [0.1, 0.3]
    assert records[0]["estimate"] <= records[1]["estimate"]
    assert all("wall_time" not in rec for rec in records)


def test_sweep_unknown_process_is_400(client):
    r = client.post(
        "/sweep", json={"process": "ballistic", "dim": 1, "side": 4, "ps": [0.5]}
    )
    assert r.status_code == 400


def test_sweep_glauber_needs_horizon(client):
    r = client.post(
        "/sweep", json={"process": "glauber", "dim": 1, "side": 4, "ps": [0.5]}
    )
    assert r.status_code == 400


def test_bisect_endpoint(client):
    req = {
        "process": "bootstrap",
        "dim": 2,
        "side": 6,
        "r": 2,
        "lo": 0.0,
        "hi": 1.0,
        "tol": 1 / 16,
        "replicas": 60,
        "seed": 3,
    }
    r = client.post("/bisect", json=req)
    assert r.status_code == 200
    body = r.json()
    lo, hi = body["bracket"]
    assert lo <= body["p_hat"] <= hi
    assert hi - lo <= 1 / 16 + 1e-12
    assert len(body["probes"]) >= 3


def test_verify_bounds_small_grid(client):
    r = client.post("/verify-bounds", json={"d_min": 5, "d_max": 30})
    assert r.status_code == 200
    body = r.json()
    assert body["all_hold"] is True
    assert body["failures"] == []
    assert body["checks"] is None
    assert set(body["by_family"]) == {
        "chernoff",
        "sparse_tail",
        "path_bound",
        "erlang_consistency",
    }
    detailed = client.post(
        "/verify-bounds", json={"d_min": 5, "d_max": 30, "detail": True}
    )
    assert detailed.json()["checks"]


def test_verify_bounds_bad_range_is_400(client):
    r = client.post("/verify-bounds", json={"d_min": 10, "d_max": 5})
    assert r.status_code == 400


def test_locality_growth_with_overrides(client):
    req = {
        "event": "growth",
        "trials": 3,
        "seed": 1,
        "dim": 2,
        "side": 20,
        "radius": 8,
    }
    r = client.post("/locality", json=req)
    assert r.status_code == 200
    body = r.json()
    assert body["changes"] == 0
    assert body["changed_trials"] == []
    assert body["config"]["radius"] == 8
    assert body["config"]["side"] == 20
    assert body["config"]["eps"] == "3/10"


def test_locality_tiny_radius_detects_changes(client):
    req = {
        "event": "growth",
        "trials": 6,
        "seed": 1,
        "dim": 2,
        "side": 20,
        "radius": 0,
    }
    r = client.post("/locality", json=req)
    assert r.json()["changes"] > 0


def test_locality_unknown_event_is_400(client):
    r = client.post("/locality", json={"event": "telepathy", "trials": 1})
    assert r.status_code == 400
