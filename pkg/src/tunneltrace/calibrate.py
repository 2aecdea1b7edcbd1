"""Threshold calibration for the trigger-based tunnel indicators.

Hidden tunnels leave only statistical traces behind: a forward/return
path length asymmetry (FRPLA) or a nonzero return tunnel length (RTLA).
Both quantities can also be produced by ordinary routing asymmetries, so
the trigger thresholds trade recall against false alarms.  This module
builds a labelled corpus of simulated traces, establishes ground truth
with brute-force revelation (which probes every hop pair and therefore
does not depend on the thresholds under test) and sweeps the threshold
grid to produce ROC points.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from tunneltrace.engine import run_trace
from tunneltrace.model import (
    AnnotatedTrace,
    EngineConfig,
    RevelationState,
    Thresholds,
)
from tunneltrace.sim import SimulatorSession, Topology
from tunneltrace.sim.scenarios import (
    invisible_chain_scenario,
    plain_chain_scenario,
)

# Thresholds so large that no trigger can ever fire; used for the
# brute-force ground-truth runs so detection is purely revelation-driven.
_NEVER = 10 ** 6

# Simulated testbeds are probed from TTL 1: the vantage point sits on the
# first link, there is no access infrastructure to skip.
_BASE = EngineConfig(starting_ttl=1)


@dataclass(frozen=True)
class CalibrationCase:
    """One labelled corpus entry: a topology plus its ground truth."""

    name: str
    topology: Topology
    hides_tunnel: bool


@dataclass(frozen=True)
class RocPoint:
    """Detection counts for one threshold pair over a corpus."""

    t_frpla: int
    t_rtla: int
    true_positives: int
    false_positives: int
    positives: int
    negatives: int

    @property
    def tpr(self) -> float:
        """True positive rate (recall)."""
        return self.true_positives / self.positives if self.positives else 0.0

    @property
    def fpr(self) -> float:
        """False positive rate."""
        return (self.false_positives / self.negatives
                if self.negatives else 0.0)

    def dominates(self, other: "RocPoint") -> bool:
        """True when this operating point is at least as good on both axes."""
        return self.tpr >= other.tpr and self.fpr <= other.fpr


def _trace(topology: Topology, config: EngineConfig) -> AnnotatedTrace:
    session = SimulatorSession(topology)
    return run_trace(session, config)


def ground_truth(topology: Topology) -> bool:
    """Whether brute-force revelation uncovers hidden routers.

    The engine runs with every trigger disabled and ``brute_force`` set,
    so it attempts revelation between each pair of consecutive hops; the
    topology hides a tunnel exactly when some attempt reveals at least
    one address that the plain trace never showed.
    """
    config = replace(
        _BASE, brute_force=True,
        thresholds=Thresholds(frpla=_NEVER, rtla=_NEVER, uturn=_NEVER),
    )
    trace = _trace(topology, config)
    return any(annotation.revealed for annotation in trace.tunnels)


def detected(topology: Topology, config: EngineConfig) -> bool:
    """Whether a normal (trigger-driven) run flags a hidden tunnel.

    A trace counts as flagged when any annotation attempted revelation:
    triggers are precisely the decision to spend revelation probes, so
    an attempt on a tunnel-free path is a false alarm even if it then
    reveals nothing.
    """
    trace = _trace(topology, config)
    return any(annotation.state != RevelationState.NOT_ATTEMPTED
               for annotation in trace.tunnels)


def calibration_corpus(
    noise: tuple[int, float, int] | None = None,
) -> list[CalibrationCase]:
    """Build the labelled corpus used for threshold calibration.

    Positives hide chains of 3..5 routers behind an IOS-style ingress
    (detectable through FRPLA only) and chains of 1..3 routers behind a
    Juniper-style ingress (detectable through RTLA at shorter lengths
    than FRPLA can reach).  Negatives are label-free chains of the same
    operating systems.  ``noise`` is ``(seed, fraction, max_delta)``:
    a deterministic per-address reply detour that inflates the apparent
    return path length, which is how false alarms arise in the wild.

    Every label is established by :func:`ground_truth` rather than
    trusted from construction.
    """
    cases: list[CalibrationCase] = []
    for hidden in (3, 4, 5):
        topo = invisible_chain_scenario(hidden, "cisco152", noise=noise)
        cases.append(CalibrationCase(topo.name, topo, ground_truth(topo)))
    for hidden in (1, 2, 3):
        topo = invisible_chain_scenario(hidden, "vmx", noise=noise)
        cases.append(CalibrationCase(topo.name, topo, ground_truth(topo)))
    for length in (4, 5, 6):
        for os_name in ("cisco152", "vmx"):
            topo = plain_chain_scenario(length, os_name, noise=noise)
            cases.append(CalibrationCase(topo.name, topo, ground_truth(topo)))
    return cases


def evaluate(corpus: list[CalibrationCase], t_frpla: int, t_rtla: int,
             base: EngineConfig | None = None) -> RocPoint:
    """Grade one threshold pair over the corpus."""
    base = base if base is not None else _BASE
    config = replace(
        base,
        thresholds=replace(base.thresholds, frpla=t_frpla, rtla=t_rtla),
    )
    true_positives = false_positives = positives = negatives = 0
    for case in corpus:
        flagged = detected(case.topology, config)
        if case.hides_tunnel:
            positives += 1
            true_positives += flagged
        else:
            negatives += 1
            false_positives += flagged
    return RocPoint(t_frpla, t_rtla, true_positives, false_positives,
                    positives, negatives)


def roc_sweep(corpus: list[CalibrationCase],
              frpla_grid: range = range(0, 5),
              rtla_grid: range = range(0, 5),
              base: EngineConfig | None = None) -> list[RocPoint]:
    """Evaluate every threshold pair on the grid."""
    return [evaluate(corpus, t_frpla, t_rtla, base)
            for t_frpla in frpla_grid
            for t_rtla in rtla_grid]
