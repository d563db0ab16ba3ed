"""Exception hierarchy shared across the package."""

from __future__ import annotations


class SmartChargeError(Exception):
    """Base class for every error raised by smartcharge."""


class ValidationError(SmartChargeError):
    """A plug-in window violates a domain invariant."""

    def __init__(self, window_id: str, field: str, message: str) -> None:
        self.window_id = window_id
        self.field = field
        super().__init__(f"window {window_id!r}, field {field!r}: {message}")


class OverlappingIntervals(ValidationError):
    pass


class IntervalOutsideWindow(ValidationError):
    pass


class NonPositiveEnergy(ValidationError):
    pass


class UnknownUtility(ValidationError):
    pass


class UnknownRegion(ValidationError):
    pass


class PowerExceedsRating(ValidationError):
    pass


class InvalidWindow(ValidationError):
    """plug_in is not strictly before plug_out, or the window has no intervals."""


class MissingTariffDefinition(SmartChargeError):
    def __init__(self, tariff_id: str) -> None:
        self.tariff_id = tariff_id
        super().__init__(f"tariff {tariff_id!r} is referenced but not loaded")


class TariffError(SmartChargeError):
    """A tariff document breaks coverage or partition rules."""


class MoerCoverageGap(SmartChargeError):
    def __init__(self, region_id: str, hour_start: float) -> None:
        from datetime import datetime, timezone

        self.region_id = region_id
        self.hour_start = hour_start
        stamp = datetime.fromtimestamp(hour_start, tz=timezone.utc).isoformat()
        super().__init__(f"no MOER data for region {region_id!r} in hour starting {stamp}")


class ZeroVariance(SmartChargeError):
    pass


class InsufficientCoverage(SmartChargeError):
    pass


class InfeasibleDemand(SmartChargeError):
    def __init__(self, demand: float, total_capacity: float) -> None:
        self.demand = demand
        self.total_capacity = total_capacity
        super().__init__(
            f"demand {demand:.6f} kWh exceeds total slot capacity {total_capacity:.6f} kWh"
        )


class TooManySlots(SmartChargeError):
    pass


class ZeroBaseline(SmartChargeError):
    pass


class EmptyOutcomeList(SmartChargeError):
    pass


class MalformedRow(SmartChargeError):
    def __init__(self, line: int, column: str, reason: str) -> None:
        self.line = line
        self.column = column
        self.reason = reason
        super().__init__(f"line {line}, column {column!r}: {reason}")


class SchemaViolation(SmartChargeError):
    def __init__(self, path: str, reason: str) -> None:
        self.path = path
        self.reason = reason
        super().__init__(f"{path}: {reason}")


class UnitMissing(SchemaViolation):
    pass


class EmptyValidSet(SmartChargeError):
    """No window survived loading, validation and MOER coverage checks."""

    def __init__(self, reasons: dict[str, int]) -> None:
        self.reasons = reasons
        detail = ", ".join(f"{k}: {v}" for k, v in sorted(reasons.items())) or "no input windows"
        super().__init__(f"no valid windows to optimize ({detail})")
