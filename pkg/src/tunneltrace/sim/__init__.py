"""Deterministic MPLS forwarding simulator.

The simulator executes scenario files describing small provider topologies
(LDP, RSVP-TE and L3VPN label switching with per-OS TTL processing quirks)
and answers probes exactly like a live network would, which makes it both an
offline backend for the tracer and the test bench for the classifier.
"""

from tunneltrace.sim.forwarding import Simulation, SimulatorSession
from tunneltrace.sim.model import (
    BindingMode,
    Router,
    RouterOS,
    ScenarioError,
    Topology,
)
from tunneltrace.sim.parser import parse_scenario
from tunneltrace.sim.scenarios import (
    builtin_scenario_names,
    load_builtin,
    load_scenario,
)

__all__ = [
    "BindingMode",
    "Router",
    "RouterOS",
    "ScenarioError",
    "Simulation",
    "SimulatorSession",
    "Topology",
    "builtin_scenario_names",
    "load_builtin",
    "load_scenario",
    "parse_scenario",
]
