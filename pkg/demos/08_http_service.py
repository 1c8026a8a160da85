"""
Driving the HTTP service
========================

The service wraps the pipeline behind three verbs: POST /build queues a
training job, GET /jobs/{id} reports its progress, POST /translate runs
a registered model. This drives the app in process; `nmtforge serve`
exposes the same thing over a real socket.
"""

import random
import tempfile
import time
from pathlib import Path

from fastapi.testclient import TestClient

from nmtforge.service import create_app

scratch = Path(tempfile.mkdtemp(prefix="forge-svc-"))
rng = random.Random(0)
lines = [" ".join(rng.choice("abcde") for _ in range(rng.randint(3, 6)))
         for _ in range(40)]
(scratch / "toy.src").write_text("\n".join(lines) + "\n")
(scratch / "toy.tgt").write_text("\n".join(lines) + "\n")

app = create_app(scratch / "registry")

with TestClient(app) as client:
    print("health:", client.get("/health").json())

    job = client.post("/build", json={
        "source": str(scratch / "toy.src"),
        "target": str(scratch / "toy.tgt"),
        "name": "demo",
        "subword": {"kind": "bpe", "vocab_size": 16},
        "model": {"layers": 1, "heads": 2, "model_dim": 16, "ff_dim": 32,
                  "dropout": 0.0, "attention_dropout": 0.0, "max_len": 32},
        "optimizer": {"warmup_steps": 100, "batch_tokens": 256,
                      "max_steps": 30, "valid_every": 10},
    }).json()
    print("queued:", job)

    # poll until the worker finishes; a UI would chart the telemetry
    while True:
        status = client.get("/jobs/%s" % job["job_id"]).json()
        if status["state"] in ("done", "failed"):
            break
        time.sleep(0.05)
    print("state:", status["state"], " model:", status["model_id"])
    print("last validation:", status["latest"])
    print("emissions so far: %.2e kg" % status["green"]["kgco2"])

    # the finished model is registered and immediately servable
    print("models:", [m["id"] for m in client.get("/models").json()["models"]])
    answer = client.post("/translate", json={
        "model": status["model_id"],
        "sentences": ["a b c", "", "e d"],
        "mode": "greedy",
    }).json()
    for line, score in zip(answer["translations"], answer["logprobs"]):
        print("  %-10r  %.3f" % (line, score))
