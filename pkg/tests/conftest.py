from __future__ import annotations

import time
from dataclasses import dataclass

import pytest

from smartcharge.config import SynthParams
from smartcharge.domain import validate_window
from smartcharge.moer import hourly_average
from smartcharge.pipeline import evaluate_fleet
from smartcharge.synth import SyntheticFleet, generate_synthetic_fleet

FLEET_SEED = 20230101


@dataclass
class EvaluatedFleet:
    fleet: SyntheticFleet
    windows: list
    hourly: dict
    evaluations: dict
    seconds: float


@pytest.fixture(scope="session")
def evaluated_fleet() -> EvaluatedFleet:
    """200 seeded synthetic vehicles, validated and evaluated under both scenarios."""
    t0 = time.perf_counter()
    fleet = generate_synthetic_fleet(SynthParams(vehicles=200, seed=FLEET_SEED))
    windows = [validate_window(w, fleet.catalog) for w in fleet.windows]
    hourly = {s.region_id: hourly_average(s) for s in fleet.moer}
    evaluations = evaluate_fleet(windows, fleet.catalog, fleet.tariffs, hourly, 900,
                                 ("constrained", "unconstrained"))
    return EvaluatedFleet(fleet, windows, hourly, evaluations, time.perf_counter() - t0)


@pytest.fixture
def synth_inputs(tmp_path):
    """A small synthetic fleet written to disk in the input file formats."""
    fleet = generate_synthetic_fleet(SynthParams(vehicles=12, seed=7, days=60))
    return fleet, fleet.write(tmp_path / "in")
