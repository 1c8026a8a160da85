"""HTTP service contract: endpoints, error codes, job lifecycle."""

import json
import random
import time

import pytest
from fastapi.testclient import TestClient

from nmtforge.config import config_from_dict
from nmtforge.pipeline import run_pipeline
from nmtforge.registry import ModelRegistry
from nmtforge.service import JOB_STATES, create_app

TINY = {
    "subword": {"kind": "bpe", "vocab_size": 14},
    "model": {"layers": 1, "heads": 2, "model_dim": 16, "ff_dim": 32, "max_len": 32},
    "optimizer": {"max_steps": 4, "valid_every": 2, "batch_tokens": 256},
}


def make_corpus(root, alphabet="abcde", prefix=""):
    rng = random.Random(0)
    lines = [" ".join(rng.choice(alphabet) for _ in range(rng.randint(3, 6)))
             for _ in range(60)]
    src, tgt = root / (prefix + "src.txt"), root / (prefix + "tgt.txt")
    src.write_text("".join(line + "\n" for line in lines))
    tgt.write_text("".join(line + "\n" for line in lines))
    return src, tgt


def build_doc(src, tgt, **extra):
    doc = dict(TINY)
    doc.update({"source": str(src), "target": str(tgt), "seed": 3})
    doc.update(extra)
    return doc


def wait_for(client, job_id, timeout=120.0):
    deadline = time.monotonic() + timeout
    seen_states = []
    while time.monotonic() < deadline:
        doc = client.get("/jobs/%s" % job_id).json()
        if not seen_states or seen_states[-1] != doc["state"]:
            seen_states.append(doc["state"])
        if doc["state"] in ("done", "failed"):
            return doc, seen_states
        time.sleep(0.02)
    raise AssertionError("job %s did not finish" % job_id)


@pytest.fixture(scope="module")
def stack(tmp_path_factory):
    """A registry with three models: two ensemble-compatible, one not."""
    root = tmp_path_factory.mktemp("service")
    src, tgt = make_corpus(root)
    registry = ModelRegistry(root / "registry")
    out = str(root / "registry" / "models")
    run_pipeline(config_from_dict(build_doc(src, tgt, name="base", out_dir=out)),
                 registry=registry)
    run_pipeline(config_from_dict(build_doc(src, tgt, name="twin", out_dir=out, seed=4)),
                 registry=registry)
    # a different alphabet gives a genuinely different subword vocabulary
    other_src, other_tgt = make_corpus(root, alphabet="fghij", prefix="other_")
    other = build_doc(other_src, other_tgt, name="othervocab", out_dir=out)
    run_pipeline(config_from_dict(other), registry=registry)
    app = create_app(root / "registry")
    return {"root": root, "src": src, "tgt": tgt,
            "client": TestClient(app), "app": app}


def test_health(stack):
    doc = stack["client"].get("/health").json()
    assert doc["status"] == "ok"
    assert doc["models"] == 3


def test_models_sorted_by_id(stack):
    doc = stack["client"].get("/models").json()
    assert [m["id"] for m in doc["models"]] == ["base", "othervocab", "twin"]
    entry = doc["models"][0]
    assert entry["deployed"] is True
    assert set(entry["metrics"]) == {"acc", "ppl", "xent"}


def test_translate_aligns_with_input(stack):
    resp = stack["client"].post("/translate", json={
        "model": "base", "sentences": ["a b c", "", "d e"], "mode": "greedy"})
    assert resp.status_code == 200
    doc = resp.json()
    assert len(doc["translations"]) == 3 and len(doc["logprobs"]) == 3
    assert doc["translations"][1] == "" and doc["logprobs"][1] == 0.0
    assert all(lp <= 0.0 for lp in doc["logprobs"])


def test_translate_is_deterministic(stack):
    body = {"model": "base", "sentences": ["a b c d", "e a b"], "beam_width": 3}
    first = stack["client"].post("/translate", json=body)
    second = stack["client"].post("/translate", json=body)
    assert first.content == second.content


def test_ensemble_of_compatible_models(stack):
    resp = stack["client"].post("/translate", json={
        "ensemble": ["base", "twin"], "sentences": ["a b c"]})
    assert resp.status_code == 200


def test_ensemble_of_one_equals_single_model(stack):
    body = {"sentences": ["a b c", "d e a"], "beam_width": 2}
    single = stack["client"].post("/translate", json=dict(body, model="base"))
    ensemble = stack["client"].post("/translate", json=dict(body, ensemble=["base"]))
    assert single.content == ensemble.content


def test_ensemble_vocab_mismatch_is_422(stack):
    resp = stack["client"].post("/translate", json={
        "ensemble": ["base", "othervocab"], "sentences": ["a b"]})
    assert resp.status_code == 422
    assert resp.json()["code"] == "vocab_mismatch"


def test_unknown_model_is_404(stack):
    resp = stack["client"].post("/translate", json={"model": "nope", "sentences": ["x"]})
    assert resp.status_code == 404
    assert resp.json()["code"] == "model_not_found"


def test_malformed_json_is_400(stack):
    resp = stack["client"].post("/translate", content=b"{oops",
                                headers={"content-type": "application/json"})
    assert resp.status_code == 400
    assert resp.json()["code"] == "malformed_json"
    arr = stack["client"].post("/translate", content=b"[1, 2]",
                               headers={"content-type": "application/json"})
    assert arr.status_code == 400


@pytest.mark.parametrize("body", [
    {"model": "base"},
    {"model": "base", "sentences": "not a list"},
    {"model": "base", "sentences": [1]},
    {"model": "base", "ensemble": ["base"], "sentences": ["x"]},
    {"sentences": ["x"]},
    {"ensemble": [], "sentences": ["x"]},
    {"model": "base", "sentences": ["x"], "beam_width": 0},
    {"model": "base", "sentences": ["x"], "beam_width": True},
    {"model": "base", "sentences": ["x"], "mode": "sampling"},
    {"model": "base", "sentences": ["x"], "temperature": 2.0},
])
def test_translate_request_validation(stack, body):
    resp = stack["client"].post("/translate", json=body)
    assert resp.status_code == 422
    assert resp.json()["code"] == "invalid_request"


def test_unknown_request_key_is_named(stack):
    resp = stack["client"].post("/translate", json={
        "model": "base", "sentences": ["x"], "temperature": 2.0})
    assert "temperature" in resp.json()["message"]


def test_build_rejects_bad_config_naming_keys(stack):
    resp = stack["client"].post("/build", json={"optimizer": {"learnign_rate": 2}})
    assert resp.status_code == 422
    doc = resp.json()
    assert doc["code"] == "invalid_config"
    assert "learnign_rate" in doc["message"]


def test_build_requires_corpus_paths(stack):
    resp = stack["client"].post("/build", json={})
    assert resp.status_code == 422
    assert "source" in resp.json()["message"]


def test_unknown_job_is_404(stack):
    resp = stack["client"].get("/jobs/job-999")
    assert resp.status_code == 404
    assert resp.json()["code"] == "job_not_found"


def test_build_job_runs_to_done_and_registers(tmp_path):
    src, tgt = make_corpus(tmp_path)
    client = TestClient(create_app(tmp_path / "registry"))
    resp = client.post("/build", json=build_doc(src, tgt, name="fresh"))
    assert resp.status_code == 200
    job_id = resp.json()["job_id"]
    doc, seen = wait_for(client, job_id)

    assert doc["state"] == "done" and doc["error"] is None
    assert doc["model_id"] == "fresh"
    # states may be missed between polls but never move backwards
    order = [JOB_STATES.index(s) for s in seen]
    assert order == sorted(order)

    steps = [r["step"] for r in doc["telemetry"]]
    assert steps == sorted(steps) and steps[-1] == 4
    assert doc["progress"] == {"step": doc["telemetry"][-1]["step"],
                               "accuracy": doc["telemetry"][-1]["acc"],
                               "ppl": doc["telemetry"][-1]["ppl"]}
    assert doc["latest"] == doc["telemetry"][-1]

    green = doc["green"]
    assert green["kgco2"] == pytest.approx(
        green["watts"] * green["hours"] * green["factor_g_per_kwh"] / 1e6)

    listed = client.get("/models").json()["models"]
    assert [m["id"] for m in listed] == ["fresh"]
    translated = client.post("/translate", json={"model": "fresh", "sentences": ["a b"]})
    assert translated.status_code == 200


def test_jobs_run_in_submission_order_one_at_a_time(tmp_path):
    src, tgt = make_corpus(tmp_path)
    app = create_app(tmp_path / "registry")
    client = TestClient(app)
    first = client.post("/build", json=build_doc(src, tgt, name="one")).json()["job_id"]
    second = client.post("/build", json=build_doc(src, tgt, name="two")).json()["job_id"]
    assert [first, second] == ["job-1", "job-2"]
    wait_for(client, first)
    wait_for(client, second)
    service = app.state.service
    job_one, job_two = service.get_job(first), service.get_job(second)
    assert job_one.state == "done" and job_two.state == "done"
    assert job_one.finished_at <= job_two.started_at


def test_duplicate_names_get_unique_registry_ids(tmp_path):
    src, tgt = make_corpus(tmp_path)
    client = TestClient(create_app(tmp_path / "registry"))
    doc = build_doc(src, tgt, name="dup")
    a = client.post("/build", json=doc).json()["job_id"]
    b = client.post("/build", json=doc).json()["job_id"]
    done_a, _ = wait_for(client, a)
    done_b, _ = wait_for(client, b)
    assert done_a["model_id"] == "dup"
    assert done_b["model_id"] == "dup-2"
    ids = [m["id"] for m in client.get("/models").json()["models"]]
    assert ids == ["dup", "dup-2"]


def test_failed_build_reports_the_cause(tmp_path):
    client = TestClient(create_app(tmp_path / "registry"))
    doc = dict(TINY)
    doc.update({"source": str(tmp_path / "missing.src"),
                "target": str(tmp_path / "missing.tgt")})
    job_id = client.post("/build", json=doc).json()["job_id"]
    done, _ = wait_for(client, job_id)
    assert done["state"] == "failed"
    assert "missing.src" in done["error"]
    assert client.get("/models").json()["models"] == []


def test_restart_reproduces_the_model_list(stack):
    fresh = TestClient(create_app(stack["root"] / "registry"))
    assert fresh.get("/models").json() == stack["client"].get("/models").json()
    resp = fresh.post("/translate", json={"model": "base", "sentences": ["a b"]})
    assert resp.status_code == 200


def test_ui_mounts_only_when_the_bundle_exists(tmp_path):
    bare = TestClient(create_app(tmp_path / "r1", ui_dir=tmp_path / "nowhere"))
    assert bare.get("/ui/").status_code == 404

    dist = tmp_path / "dist"
    dist.mkdir()
    (dist / "index.html").write_text("<!doctype html><title>console</title>")
    ui = TestClient(create_app(tmp_path / "r2", ui_dir=dist))
    resp = ui.get("/ui/")
    assert resp.status_code == 200
    assert "console" in resp.text
