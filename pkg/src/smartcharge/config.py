"""Run and generator configuration."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime, timedelta
from pathlib import Path

from smartcharge.domain import parse_timestamp
from smartcharge.tariff import parse_clock

SCENARIO_CHOICES = ("constrained", "unconstrained", "both")


@dataclass
class RunConfig:
    sessions: str = "sessions.csv"
    tariffs: str = "tariffs.json"
    moer: str = "moer.csv"
    catalog: str = "catalog.json"
    out_dir: str = "out"
    scenario: str = "both"
    slot_len_minutes: float = 15
    immediate_threshold_minutes: float = 15
    peak_start: str = "16:00"
    peak_end: str = "21:00"
    annualize_threshold_days: float = 90
    min_customers: int = 100
    study_start: str | None = None
    study_end: str | None = None
    # stamped into reports instead of the wall clock
    generated_at: str | None = None
    seed: int | None = None
    workers: int = 1

    def __post_init__(self) -> None:
        if self.scenario not in SCENARIO_CHOICES:
            raise ValueError(f"scenario must be one of {SCENARIO_CHOICES}, got {self.scenario!r}")
        if not 0 < self.slot_len_minutes <= 60 or 60 % self.slot_len_minutes:
            raise ValueError("slot_len_minutes must divide 60")
        parse_clock(self.peak_start), parse_clock(self.peak_end)

    @property
    def scenarios(self) -> tuple[str, ...]:
        return ("constrained", "unconstrained") if self.scenario == "both" else (self.scenario,)

    @property
    def slot_len_seconds(self) -> float:
        return self.slot_len_minutes * 60.0

    @property
    def immediate_threshold(self) -> timedelta:
        return timedelta(minutes=self.immediate_threshold_minutes)

    @property
    def peak(self) -> tuple[int, int]:
        return parse_clock(self.peak_start), parse_clock(self.peak_end)

    @property
    def study_period(self) -> tuple[datetime, datetime] | None:
        if self.study_start and self.study_end:
            return parse_timestamp(self.study_start), parse_timestamp(self.study_end)
        return None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> RunConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path: str | Path) -> RunConfig:
        """Load JSON config; relative input paths resolve against the config's directory."""
        path = Path(path)
        cfg = cls.from_dict(json.loads(path.read_text()))
        base = path.parent
        for name in ("sessions", "tariffs", "moer", "catalog", "out_dir"):
            value = getattr(cfg, name)
            if value and not Path(value).is_absolute():
                setattr(cfg, name, str(base / value))
        return cfg


@dataclass
class SynthParams:
    vehicles: int = 200
    mean_sessions_per_vehicle: float = 138.0
    # gamma shape of the per-vehicle session count; 4 puts the median near 126
    sessions_shape: float = 4.0
    mean_daily_energy_kwh: float = 10.9
    daily_energy_shape: float = 6.0
    plug_duration_mean_hours: float = 11.2
    plug_duration_sd_hours: float = 4.5
    immediate_start_share: float = 0.72
    peak_start_share: float = 0.31
    multi_interval_share: float = 0.08
    utility_mix: dict[str, float] = field(
        default_factory=lambda: {"pge": 0.35, "sce": 0.25, "aps": 0.2, "ameren": 0.2}
    )
    year: int = 2023
    days: int = 365
    seed: int = 0

    def __post_init__(self) -> None:
        positive = (
            "vehicles", "mean_sessions_per_vehicle", "sessions_shape", "mean_daily_energy_kwh",
            "daily_energy_shape", "plug_duration_mean_hours", "plug_duration_sd_hours", "days",
        )
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("immediate_start_share", "peak_start_share", "multi_interval_share"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in [0, 1]")
        if abs(sum(self.utility_mix.values()) - 1.0) > 1e-9 or min(self.utility_mix.values()) < 0:
            raise ValueError("utility_mix weights must be non-negative and sum to 1")
