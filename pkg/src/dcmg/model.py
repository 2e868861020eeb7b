"""Plain data shared by the controller, simulator and scenario loader."""
from dataclasses import dataclass, field

import numpy as np

from .errors import DanglingReference, GraphNotConnected, ModelValidationError, NonpositiveParameter
from .topology import CommGraph, NodePartition, is_connected

MODES = ("uniform", "critical")
EVENT_KINDS = ("set_theta", "set_omega", "unplug_dg", "plug_dg", "set_load")


@dataclass(frozen=True)
class MicrogridModel:
    net: object
    ratings: object
    graph: CommGraph
    partition: NodePartition

    def __post_init__(self):
        n = self.net.n_bus
        if self.ratings.current_capacity.size != n:
            raise ModelValidationError("ratings do not match the bus count")
        if self.graph.n != n:
            raise ModelValidationError("communication graph does not match the bus count")
        if self.partition.n != n:
            raise ModelValidationError("partition does not match the bus count")
        if not is_connected(self.graph):
            raise GraphNotConnected("communication graph is not connected")

    @property
    def n(self):
        return self.net.n_bus

    @property
    def v_rat(self):
        return self.ratings.rated_voltage


@dataclass(frozen=True)
class Event:
    kind: str
    node: int = None
    value: float = None
    relay: bool = True

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise ModelValidationError(f"unknown event kind {self.kind!r}")
        if self.kind in ("unplug_dg", "plug_dg", "set_load") and self.node is None:
            raise ModelValidationError(f"{self.kind} needs a node")
        if self.kind in ("set_theta", "set_omega", "set_load") and self.value is None:
            raise ModelValidationError(f"{self.kind} needs a value")
        if self.kind == "set_load" and not self.value > 0:
            raise NonpositiveParameter("set_load resistance must be positive (inf removes the load)")


@dataclass(frozen=True)
class ScenarioSpec:
    model: MicrogridModel
    mode: str
    theta: float
    omega: float
    timeline: tuple = ()
    duration: float = 5.0
    dt: float = 1e-6
    sample_interval: float = 1e-3
    startup: float = 0.0
    name: str = ""
    description: str = ""
    gamma_v: float = None
    settle_window: float = 0.2
    settle_tol: float = 1e-6
    droop: dict = field(default_factory=lambda: {"policy": "rating_inverse", "ratio": 0.05})

    def __post_init__(self):
        if self.mode not in MODES:
            raise ModelValidationError(f"unknown mode {self.mode!r}")
        if not 0 <= self.theta <= 1:
            raise ModelValidationError("theta must lie in [0, 1]")
        if self.omega <= 0:
            raise ModelValidationError("omega must be positive")
        if self.duration <= 0 or self.dt <= 0 or self.sample_interval <= 0:
            raise ModelValidationError("duration, dt and sample_interval must be positive")
        if self.startup < 0:
            raise ModelValidationError("startup must be nonnegative")
        if self.dt > self.sample_interval:
            raise ModelValidationError("dt must not exceed sample_interval")
        times = [t for t, _ in self.timeline]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ModelValidationError("event times must be strictly increasing")
        if times and (times[0] <= 0 or times[-1] >= self.duration):
            raise ModelValidationError("event times must lie strictly inside (0, duration)")
        for _, ev in self.timeline:
            if ev.node is not None and not 0 <= ev.node < self.model.n:
                raise DanglingReference(f"event references unknown node {ev.node}")
