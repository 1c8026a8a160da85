"""Regenerate tests/fixtures/default_config.json from the installed package.

The console hardcodes the same defaults in src/config.ts; the fixture is
what the contract tests compare against, so the two cannot drift apart
silently. Run via `npm run fixtures` whenever the server defaults change.
"""

import json
from pathlib import Path

from nmtforge.config import PipelineConfig

out = Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "default_config.json"
out.parent.mkdir(parents=True, exist_ok=True)
out.write_text(
    json.dumps(PipelineConfig().to_dict(), indent=2, sort_keys=True) + "\n",
    encoding="utf-8",
)
print("wrote", out)
