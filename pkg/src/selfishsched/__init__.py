"""Selfish bag-of-tasks schedulers on master-worker platforms.

Closed-form Nash equilibrium (:mod:`.equilibrium`), cooperative reference
allocations and inefficiency measures (:mod:`.allocations`), a fluid
simulator of the flooding strategy (:mod:`.fluidsim`) and a command-line
front end (:mod:`.cli`).
"""

from importlib import resources

from .model import AllocationMatrix, Application, System, Worker, load_system, validate_system
from .equilibrium import system_equilibrium, worker_equilibrium

__version__ = "0.1.0"

BUNDLED_INSTANCES = ("example-2x2", "smk", "fig-degradation", "mixed-1x2")


def bundled_instance_path(name: str):
    """Path of a bundled instance file (``example-2x2``, ``smk``, ...)."""
    name = name.removesuffix(".json")
    if name not in BUNDLED_INSTANCES:
        raise KeyError(f"no bundled instance named {name!r}")
    return resources.files(__package__).joinpath("data", f"{name}.json")


def load_bundled(name: str) -> System:
    return load_system(bundled_instance_path(name))


__all__ = [
    "AllocationMatrix",
    "Application",
    "System",
    "Worker",
    "load_system",
    "validate_system",
    "system_equilibrium",
    "worker_equilibrium",
    "load_bundled",
    "bundled_instance_path",
    "BUNDLED_INSTANCES",
]
