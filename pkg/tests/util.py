"""Helpers shared by the test modules."""

from __future__ import annotations

from pathlib import Path

from tunneltrace.engine import TraceEngine, config_from_overrides
from tunneltrace.model import (
    EngineConfig,
    IndicatorCode,
    RevelationState,
    TunnelClass,
)
from tunneltrace.sim import SimulatorSession, builtin_scenario_names, load_builtin

GOLDEN_DIR = Path(__file__).parent / "golden"

# label -> (scenario, target override); the extra run points the trace at
# the VPN egress PE itself, which leaves only a one-hop return LSP.
GOLDEN_RUNS: dict[str, tuple[str, str | None]] = {
    **{name: (name, None) for name in builtin_scenario_names()},
    "juniper-vpn-pe": ("juniper-vpn", "192.168.2.1"),
}

# label -> (tunnel class, indicator code, revelation state, length estimate)
# for the single annotation of each transcript; None when nothing fires.
EXPECTED_ANNOTATIONS: dict[str, tuple | None] = {
    "cisco-vpn-php": (TunnelClass.OPAQUE, IndicatorCode.LSE_TTL,
                      RevelationState.NOTHING_TO_REVEAL, 3),
    "cisco-vpn-uhp": (TunnelClass.EXPLICIT, IndicatorCode.LSE,
                      RevelationState.NOT_ATTEMPTED, 1),
    "cisco124-explicit-uhp": (TunnelClass.EXPLICIT, IndicatorCode.LSE,
                              RevelationState.NOT_ATTEMPTED, 4),
    "cisco152-explicit-jump": (TunnelClass.EXPLICIT, IndicatorCode.LSE,
                               RevelationState.NOT_ATTEMPTED, 3),
    "cisco152-explicit-php": (TunnelClass.EXPLICIT, IndicatorCode.LSE,
                              RevelationState.NOT_ATTEMPTED, 3),
    "cisco152-explicit-uhp": (TunnelClass.EXPLICIT, IndicatorCode.LSE,
                              RevelationState.NOT_ATTEMPTED, 3),
    "cisco152-invisible-php": (TunnelClass.INVISIBLE, IndicatorCode.FRPLA,
                               RevelationState.BRPR, 3),
    "cisco152-invisible-uhp": (TunnelClass.INVISIBLE, IndicatorCode.DUP_IP,
                               RevelationState.BRPR, 1),
    "cisco152-invisible-uhp-host-routes": (
        TunnelClass.INVISIBLE, IndicatorCode.DUP_IP, RevelationState.DPR, 1),
    "cisco152-opaque-php": (TunnelClass.OPAQUE, IndicatorCode.LSE_TTL,
                            RevelationState.BRPR, 3),
    "cisco152-rsvp-php": (TunnelClass.INVISIBLE, IndicatorCode.FRPLA,
                          RevelationState.BRPR, 3),
    "cisco152-rsvp-uhp": (TunnelClass.INVISIBLE, IndicatorCode.DUP_IP,
                          RevelationState.MIX, 3),
    "cisco152-rsvp-uhp-ldp-twin": (TunnelClass.INVISIBLE, IndicatorCode.DUP_IP,
                                   RevelationState.MIX, 3),
    "cisco152-uhp-prefix-acl": (TunnelClass.INVISIBLE, IndicatorCode.DUP_IP,
                                RevelationState.BRPR, 3),
    "juniper-rsvp-php": (TunnelClass.INVISIBLE, IndicatorCode.RTLA,
                         RevelationState.DPR, 3),
    "juniper-rsvp-php-ldp-twin": (TunnelClass.INVISIBLE, IndicatorCode.RTLA,
                                  RevelationState.DPR, 3),
    "juniper-rsvp-uhp": (TunnelClass.INVISIBLE, IndicatorCode.RTLA,
                         RevelationState.DPR, 3),
    "juniper-rsvp-uhp-ldp-twin": (TunnelClass.INVISIBLE, IndicatorCode.RTLA,
                                  RevelationState.DPR, 3),
    "juniper-vpn": (TunnelClass.INVISIBLE, IndicatorCode.RTLA,
                    RevelationState.ONE_HOP_LSP, 3),
    "juniper-vpn-pe": (TunnelClass.INVISIBLE, IndicatorCode.RTLA,
                       RevelationState.ONE_HOP_LSP, 3),
    "olive-explicit-jump": (TunnelClass.EXPLICIT, IndicatorCode.LSE,
                            RevelationState.NOT_ATTEMPTED, 3),
    "olive-invisible-jump": None,
    "olive-invisible-php": (TunnelClass.INVISIBLE, IndicatorCode.FRPLA,
                            RevelationState.DPR, 1),
    "vmx-explicit-php": (TunnelClass.EXPLICIT, IndicatorCode.LSE,
                         RevelationState.NOT_ATTEMPTED, 3),
    "vmx-explicit-php-icmp": (TunnelClass.EXPLICIT, IndicatorCode.LSE,
                              RevelationState.NOT_ATTEMPTED, 3),
    "vmx-invisible-php": (TunnelClass.INVISIBLE, IndicatorCode.RTLA,
                          RevelationState.DPR, 3),
}


def sim_config(topology) -> EngineConfig:
    """Engine configuration for simulated testbeds (probe from TTL 1)."""
    return config_from_overrides(topology.engine_overrides,
                                 EngineConfig(starting_ttl=1))


def run_label(label: str) -> tuple[TraceEngine, "AnnotatedTrace"]:
    """Run one golden suite entry, returning the engine and its trace."""
    scenario, target = GOLDEN_RUNS[label]
    topology = load_builtin(scenario)
    session = SimulatorSession(topology, target=target)
    engine = TraceEngine(session, sim_config(topology))
    return engine, engine.run()
