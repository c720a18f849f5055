"""Three-photon field states interacting with a two-level quantum dot in a cavity."""

__version__ = "0.1.0"

from .dynamics import SystemConfig, TimeGrid, evolve, evolve_exact_closed, steady_state  # noqa: E402
from .measures import linear_entropy, negativity  # noqa: E402

__all__ = [
    "SystemConfig",
    "TimeGrid",
    "evolve",
    "evolve_exact_closed",
    "steady_state",
    "negativity",
    "linear_entropy",
]
