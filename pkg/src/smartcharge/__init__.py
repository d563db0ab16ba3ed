"""Smart EV home-charging optimizer: baseline accounting, lexicographic
cost-then-emissions rescheduling, and fleet-level savings reports."""

from smartcharge.kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
