"""Steady-state analysis and closed-loop simulation of DC microgrids under
distributed voltage-current compromised control."""
from .model import Event, MicrogridModel, ScenarioSpec
from .plant import DGRatings, ElectricalNetwork
from .scenario import parse_scenario
from .sim import run, settle
from .topology import CommGraph, NodePartition

__all__ = [
    "CommGraph",
    "DGRatings",
    "ElectricalNetwork",
    "Event",
    "MicrogridModel",
    "NodePartition",
    "ScenarioSpec",
    "parse_scenario",
    "run",
    "settle",
]
