"""Energy and carbon accounting for training runs.

Consumption is nameplate watts times wall hours; no hardware sampling.
kgco2 is computed as watts*hours*factor/1e6 in one division so the
worked figures come out exact in binary floating point.
"""

import json
from dataclasses import asdict, dataclass
from pathlib import Path

from .errors import ConfigError

DEFAULT_FACTOR_G_PER_KWH = 324.0
DEFAULT_REGION = "IE"


@dataclass(frozen=True)
class GreenReport:
    watts: float
    hours: float
    kwh: float
    factor_g_per_kwh: float
    kgco2: float
    region: str

    def to_dict(self):
        return asdict(self)


def green_report(hours, watts, factor_g_per_kwh=DEFAULT_FACTOR_G_PER_KWH, region=DEFAULT_REGION):
    """Consumption and emissions for a run of the given duration."""
    if watts <= 0:
        raise ConfigError("watts must be positive, got %r" % watts)
    if hours < 0 or factor_g_per_kwh < 0:
        raise ConfigError("hours and emission factor must be non-negative")
    return GreenReport(
        watts=float(watts),
        hours=float(hours),
        kwh=watts * hours / 1000.0,
        factor_g_per_kwh=float(factor_g_per_kwh),
        kgco2=watts * hours * factor_g_per_kwh / 1e6,
        region=region,
    )


def generate_green_report(run, watts, factor_g_per_kwh=DEFAULT_FACTOR_G_PER_KWH, region=DEFAULT_REGION):
    """Report for a finished TrainingRun, using its recorded wall hours."""
    return green_report(run.wall_hours, watts, factor_g_per_kwh, region)


def write_green_report(report, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return path
