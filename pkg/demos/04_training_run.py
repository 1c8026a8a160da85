"""
One training run, end to end
============================

autobuild chains the whole pipeline: split the corpus, train a shared
subword model, train the network, checkpoint, and file a green report.
A tiny copy task keeps this quick; real corpora just take longer.
"""

import json
import random
import tempfile
from pathlib import Path

from nmtforge.config import PipelineConfig, config_from_dict
from nmtforge.pipeline import autobuild

scratch = Path(tempfile.mkdtemp(prefix="forge-demo-"))

# forty sentences of letter soup; the target just reverses the source
rng = random.Random(0)
lines = [" ".join(rng.choice("abcde") for _ in range(rng.randint(3, 6)))
         for _ in range(40)]
(scratch / "toy.src").write_text("\n".join(lines) + "\n")
(scratch / "toy.tgt").write_text(
    "\n".join(" ".join(reversed(l.split())) for l in lines) + "\n")

# defaults suit a real run; a demo wants something that finishes in
# seconds, so shrink everything
config = config_from_dict({
    "subword": {"kind": "bpe", "vocab_size": 16},
    "model": {"layers": 1, "heads": 2, "model_dim": 16, "ff_dim": 32,
              "dropout": 0.0, "attention_dropout": 0.0, "max_len": 32},
    "optimizer": {"warmup_steps": 100, "batch_tokens": 256,
                  "max_steps": 40, "valid_every": 10},
})
print("defaults in play:", PipelineConfig().model.heads, "heads,",
      PipelineConfig().optimizer.warmup_steps, "warmup steps")

result = autobuild(scratch / "toy.src", scratch / "toy.tgt",
                   out_dir=scratch / "runs", name="demo", seed=1,
                   config=config)

print("model directory:", result.model_dir.name)
print("stopped by:", result.run.stopped, "after", result.run.steps_completed, "steps")
print("best validation accuracy: %.3f" % result.run.best_accuracy)

# telemetry is json-lines, one record per validation
for line in (result.model_dir / "telemetry.jsonl").read_text().splitlines()[:3]:
    record = json.loads(line)
    print("  step %4d  xent %.3f  acc %.3f" % (record["step"], record["xent"], record["acc"]))

# the green report prices the run in energy and emissions
print("green:", json.loads((result.model_dir / "green.json").read_text()))
