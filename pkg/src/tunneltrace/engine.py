"""Trace orchestration: probing, measurement, annotation, revelation.

The engine drives a probing session (simulated or live) hop by hop,
fingerprints every responding address with one cached echo probe, computes
the path-asymmetry measurements, and then annotates the trace:

* label-quoting hops become Explicit or Opaque tunnel spans;
* a quoted IP TTL above 1 marks an Implicit span;
* trigger checks run one hop late (a hop is judged once its successor is
  known, because the duplicate-address trigger needs it);
* a fired trigger or an Opaque hop launches revelation toward the first
  address past the suspected ingress;
* after any revelation attempt, a shadow suppresses further checks over
  the hops the tunnel already explains.

Every probe lands in exactly one accounting bucket, so the cost identity
``original + revealed + failed + inconclusive == total`` holds by
construction.
"""

from __future__ import annotations

from tunneltrace.classifier import (
    check_triggers,
    classify_indicator,
    frpla_value,
    rtl_value,
    trigger_estimate,
    uturn_value,
)
from tunneltrace.model import (
    AnnotatedTrace,
    EngineConfig,
    HopRecord,
    IndicatorCode,
    LabelStackEntry,
    ProbeAccounting,
    RevelationState,
    Thresholds,
    TunnelClass,
    TunnelAnnotation,
)
from tunneltrace.revelation import RevealOutcome, Revealer

TTL_EXCEEDED = "ttl-exceeded"
DEST_UNREACH = "dest-unreach"


def config_from_overrides(overrides: dict[str, int],
                          base: EngineConfig | None = None) -> EngineConfig:
    """Build an engine configuration from scenario override keys.

    Recognized keys: ``t_frpla``, ``t_rtla``, ``t_lse_ttl``, ``t_uturn``
    for thresholds; ``starting_ttl``, ``max_ttl``, ``gap_limit``,
    ``flow_id`` for the engine itself. Unknown keys raise.
    """
    base = base or EngineConfig()
    thresholds = Thresholds(base.thresholds.frpla, base.thresholds.rtla,
                            base.thresholds.lse_ttl, base.thresholds.uturn)
    config = EngineConfig(base.starting_ttl, base.max_ttl, base.gap_limit,
                          base.flow_id, base.brute_force, thresholds)
    for key, value in overrides.items():
        if key == "t_frpla":
            thresholds.frpla = value
        elif key == "t_rtla":
            thresholds.rtla = value
        elif key == "t_lse_ttl":
            thresholds.lse_ttl = value
        elif key == "t_uturn":
            thresholds.uturn = value
        elif key in ("starting_ttl", "max_ttl", "gap_limit", "flow_id"):
            setattr(config, key, value)
        else:
            raise ValueError(f"unknown engine override: {key}")
    return config


class TraceEngine:
    """Runs one annotated trace over a probing session.

    The session must expose ``trace_probe(ttl, target=None, flow_id=0)``,
    ``echo(target)``, ``udp(target, ttl=64)``, ``rtt(address, ttl)``,
    ``name_of(address)`` and ``target``/``vantage`` attributes.
    """

    def __init__(self, session, config: EngineConfig | None = None) -> None:
        self.session = session
        self.config = config or EngineConfig()
        self.accounting = ProbeAccounting()
        self._echo_cache: dict[str, int | None] = {}
        self._phase = "original"

    # -- accounted probing --------------------------------------------------

    def _tally(self, answered: bool) -> None:
        if not answered:
            self.accounting.failed += 1
        elif self._phase == "original":
            self.accounting.original += 1
        else:
            self.accounting.revealed += 1

    def probe_trace(self, ttl: int, target: str | None = None):
        reply = self.session.trace_probe(ttl, target=target,
                                         flow_id=self.config.flow_id)
        self._tally(reply is not None)
        return reply

    def probe_udp(self, target: str):
        """High-TTL UDP probe used to confirm buddy addresses."""
        reply = self.session.udp(target)
        if reply is None:
            self.accounting.failed += 1
        elif reply.kind == DEST_UNREACH:
            self.accounting.revealed += 1
        else:
            # Answered, but not by the port-unreachable we asked for.
            self.accounting.inconclusive += 1
        return reply

    def probe_echo(self, address: str) -> int | None:
        """Echo arrival TTL for an address, cached (one ping per address)."""
        if address not in self._echo_cache:
            reply = self.session.echo(address)
            self._tally(reply is not None)
            self._echo_cache[address] = reply.ttl if reply is not None else None
        return self._echo_cache[address]

    # -- the main trace ------------------------------------------------------

    def run(self) -> AnnotatedTrace:
        hops: list[HopRecord] = []
        gap = 0
        ttl = self.config.starting_ttl
        while ttl <= self.config.max_ttl:
            reply = self.probe_trace(ttl)
            if reply is None:
                gap += 1
                if gap >= self.config.gap_limit:
                    break
                ttl += 1
                continue
            gap = 0
            hops.append(self._make_hop(ttl, reply))
            if reply.kind != TTL_EXCEEDED:
                break  # terminal answer from the destination
            ttl += 1
        trace = AnnotatedTrace(
            target=str(self.session.target),
            vantage=str(self.session.vantage),
            hops=hops,
            starting_ttl=self.config.starting_ttl,
            thresholds=self.config.thresholds,
        )
        self._annotate(trace)
        trace.accounting = self.accounting
        return trace

    def _make_hop(self, ttl: int, reply) -> HopRecord:
        address = str(reply.source)
        stack = tuple(
            LabelStackEntry(label, lse_ttl, bottom=index == len(reply.stack) - 1)
            for index, (label, lse_ttl) in enumerate(reply.stack)
        )
        hop = HopRecord(
            probe_ttl=ttl,
            address=address,
            reply_kind=reply.kind,
            te_ttl=reply.ttl,
            er_ttl=self.probe_echo(address),
            qttl=reply.qttl if reply.qttl is not None else 1,
            stack=stack,
            rtt_ms=self.session.rtt(address, ttl),
            name=self.session.name_of(address),
        )
        hop.frpla = frpla_value(hop)
        hop.rtl = rtl_value(hop)
        hop.uturn = uturn_value(hop)
        if hop.reply_kind == TTL_EXCEEDED:
            hop.code, _ = classify_indicator(hop, self.config.thresholds)
        return hop

    # -- annotation ----------------------------------------------------------

    def _annotate(self, trace: AnnotatedTrace) -> None:
        hops = trace.hops
        thresholds = self.config.thresholds
        known = {hop.address for hop in hops}
        shadow_until = -1
        index = 0
        while index < len(hops):
            cur = hops[index]
            if cur.reply_kind != TTL_EXCEEDED or cur.probe_ttl <= shadow_until:
                index += 1
                continue
            prev = hops[index - 1] if index > 0 else None
            nxt = hops[index + 1] if index + 1 < len(hops) else None

            if cur.stack:
                span_end = index
                while (span_end + 1 < len(hops) and hops[span_end + 1].stack
                       and hops[span_end + 1].reply_kind == TTL_EXCEEDED):
                    span_end += 1
                if span_end == index and cur.code == IndicatorCode.LSE_TTL:
                    annotation = TunnelAnnotation(
                        IndicatorCode.LSE_TTL, TunnelClass.OPAQUE,
                        ingress_index=index,
                        estimate=trigger_estimate(IndicatorCode.LSE_TTL, cur),
                    )
                    if prev is not None:
                        outcome = self._reveal(prev, cur, known, invisible=False)
                        self._attach(annotation, outcome, cur)
                        shadow_until = prev.probe_ttl + max(
                            annotation.estimate, len(annotation.revealed)) + 1
                else:
                    annotation = TunnelAnnotation(
                        IndicatorCode.LSE, TunnelClass.EXPLICIT,
                        ingress_index=index,
                        estimate=span_end - index + 1,
                    )
                trace.tunnels.append(annotation)
                index = span_end + 1
                continue

            if cur.qttl > 1:
                span_end = index
                while (span_end + 1 < len(hops)
                       and hops[span_end + 1].reply_kind == TTL_EXCEEDED
                       and not hops[span_end + 1].stack
                       and hops[span_end + 1].qttl > 1):
                    span_end += 1
                estimate = max(hops[k].qttl for k in range(index, span_end + 1))
                trace.tunnels.append(TunnelAnnotation(
                    IndicatorCode.QTTL, TunnelClass.IMPLICIT,
                    ingress_index=index, estimate=estimate,
                ))
                index = span_end + 1
                continue

            code = check_triggers(prev, cur, nxt, thresholds)
            if code != IndicatorCode.NONE and prev is not None:
                annotation = TunnelAnnotation(
                    code, TunnelClass.INVISIBLE, ingress_index=index,
                    estimate=trigger_estimate(code, cur),
                )
                outcome = self._reveal(prev, cur, known, invisible=True)
                self._attach(annotation, outcome, cur)
                if (code == IndicatorCode.RTLA
                        and outcome.state == RevelationState.NOTHING_TO_REVEAL):
                    # A return LSP alone explains the asymmetry: implicit.
                    annotation.code = IndicatorCode.UTURN
                    annotation.tunnel_class = TunnelClass.IMPLICIT
                trace.tunnels.append(annotation)
                shadow_until = prev.probe_ttl + max(
                    annotation.estimate, len(annotation.revealed)) + 1
                index += 1
                continue

            if (prev is not None and nxt is not None
                    and nxt.reply_kind == TTL_EXCEEDED and not nxt.stack
                    and cur.qttl == 1 and prev.address != cur.address
                    and cur.uturn > thresholds.uturn
                    and nxt.uturn > thresholds.uturn
                    and cur.uturn + nxt.uturn >= 3):
                trace.tunnels.append(TunnelAnnotation(
                    IndicatorCode.UTURN, TunnelClass.IMPLICIT,
                    ingress_index=index, estimate=cur.uturn,
                ))
                while (index + 1 < len(hops)
                       and hops[index].uturn > thresholds.uturn):
                    index += 1
                continue

            if (self.config.brute_force and prev is not None
                    and prev.address != cur.address):
                outcome = self._reveal(prev, cur, known, invisible=True)
                if outcome.finds:
                    annotation = TunnelAnnotation(
                        IndicatorCode.NONE, TunnelClass.INVISIBLE,
                        ingress_index=index, estimate=0,
                    )
                    self._attach(annotation, outcome, cur)
                    trace.tunnels.append(annotation)
                    shadow_until = prev.probe_ttl + len(annotation.revealed) + 1

            index += 1

    # -- revelation plumbing -------------------------------------------------

    def _reveal(self, ingress: HopRecord, cur: HopRecord, known: set[str],
                invisible: bool) -> RevealOutcome:
        self._phase = "revealed"
        try:
            revealer = Revealer(self, ingress.address, ingress.probe_ttl,
                                cur.address, known, invisible)
            return revealer.run()
        finally:
            self._phase = "original"

    def _attach(self, annotation: TunnelAnnotation, outcome: RevealOutcome,
                cur: HopRecord) -> None:
        annotation.state = outcome.state
        annotation.egress_display = outcome.first_found or cur.address
        self._phase = "revealed"
        try:
            for find in outcome.display_order:
                hop = HopRecord(
                    probe_ttl=find.probe_ttl,
                    address=find.address,
                    reply_kind=find.kind,
                    te_ttl=find.arrival_ttl,
                    er_ttl=self.probe_echo(find.address),
                    qttl=find.qttl,
                    rtt_ms=self.session.rtt(find.address, find.probe_ttl),
                    name=self.session.name_of(find.address),
                    revealed=True,
                    step=find.slot,
                    buddy_used=find.buddy,
                )
                annotation.revealed.append(hop)
        finally:
            self._phase = "original"


def run_trace(session, config: EngineConfig | None = None) -> AnnotatedTrace:
    """Convenience wrapper: one engine, one annotated trace."""
    return TraceEngine(session, config).run()
