import pytest
from fastapi.testclient import TestClient

from src.api import main as service
from src.data.ingestion import load_split


@pytest.fixture
def client(monkeypatch):
    monkeypatch.delenv("DYNPOOL_CHECKPOINT", raising=False)
    monkeypatch.setattr(service, "_MODEL", None)
    monkeypatch.setattr(service, "_MODEL_PATH", None)
    return TestClient(service.app)


def test_health_and_presets(client):
    health = client.get("/health").json()
    assert health["status"] == "ok"
    assert health["checkpoint"] is None
    assert "osprey-mini-dynpool" in client.get("/presets").json()["presets"]

    preset = client.get("/presets/smoke")
    assert preset.status_code == 200
    assert preset.json()["name"] == "smoke"
    assert client.get("/presets/albatross").status_code == 404


def test_evaluate(client):
    payload = {
        "calls": {"a": "ACGT", "b": ""},
        "references": {"a": "ACGA", "b": "GG"},
        "speeds": {"a": 9.0, "b": 11.0},
        "length_factors": {"a": 0.3, "b": 0.35},
    }
    r = client.post("/evaluate", json=payload)
    assert r.status_code == 200
    body = r.json()
    assert body["n_reads"] == 2
    assert body["empty_calls"] == ["b"]
    assert body["median_accuracy"] == pytest.approx(0.375)
    assert body["speed_fit"]["r2"] == pytest.approx(1.0)
    assert [row["read_id"] for row in body["per_read"]] == ["a", "b"]

    orphan = client.post("/evaluate", json={"calls": {"x": "A"}, "references": {}})
    assert orphan.status_code == 422


def test_basecall_needs_a_checkpoint(client):
    r = client.post("/basecall", json={"signal": [0.0, 1.0, 2.0]})
    assert r.status_code == 503


def test_basecall_with_a_checkpoint(client, monkeypatch, smoke_run, dataset_dir):
    monkeypatch.setenv("DYNPOOL_CHECKPOINT", smoke_run["checkpoint"])
    read = load_split("test", dataset_dir)[0]
    r = client.post("/basecall", json={"read_id": read.read_id, "signal": read.signal.tolist()})
    assert r.status_code == 200
    body = r.json()
    assert body["read_id"] == read.read_id
    assert body["n_signals"] == read.n_signals
    assert len(body["sequence"]) == len(body["quality"])
    positions = body["pooled_positions"]
    assert positions and all(a <= b for a, b in zip(positions, positions[1:]))
    assert body["mean_length_factor"] > 0.0

    bad = client.post("/basecall", content='{"signal": [0.0, NaN]}', headers={"Content-Type": "application/json"})
    assert bad.status_code == 422
    assert client.post("/basecall", json={"signal": [0.0], "decoder": "viterbi"}).status_code == 422
