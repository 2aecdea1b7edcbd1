"""Trace rendering and serialization.

``dump_trace`` renders the canonical text transcript: one line per hop with
the arrival-TTL pair, the path-asymmetry bracket group and any quoted label
stack entries, plus an indented revelation block under each tunnel ingress.
``record_dict``/``parse_record`` serialize a trace to a flat JSON object
(one per line in record files) and back, without loss.
"""

from __future__ import annotations

import json
from typing import IO, Iterable

from tunneltrace.fingerprint import is_junos
from tunneltrace.model import (
    AnnotatedTrace,
    HopRecord,
    IndicatorCode,
    LabelStackEntry,
    ProbeAccounting,
    RevelationState,
    Thresholds,
    TunnelAnnotation,
    TunnelClass,
)

RECORD_FORMAT = "tunneltrace/1"


# -- text transcript ---------------------------------------------------------

def _stack_suffix(hop: HopRecord) -> str:
    if not hop.stack:
        return ""
    parts = "".join(
        f" | Label : {entry.label} | LSE-TTL : {entry.ttl}" for entry in hop.stack
    )
    return f" [MPLS LSE{parts}]"


def _ttl_pair(hop: HopRecord) -> str:
    er = "*" if hop.er_ttl is None else str(hop.er_ttl)
    return f"<{hop.te_ttl},{er}>"


def _shows_rtl(hop: HopRecord) -> bool:
    return (not hop.revealed and not hop.stack and hop.rtl is not None
            and hop.rtl > 0 and is_junos(hop.te_ttl, hop.er_ttl))


def _hop_line(index: int, hop: HopRecord, last_rtl: int,
              include_rtt: bool) -> tuple[str, int]:
    brackets = f"[frpla = {hop.frpla}]"
    if _shows_rtl(hop):
        assert hop.rtl is not None
        brackets += f"[rtl = {hop.rtl}({hop.rtl - last_rtl})]"
        last_rtl = hop.rtl
    brackets += f"[qttl = {hop.qttl}][uturn = {hop.uturn}]"
    line = (f"{index:>3}  {hop.display_name} ({hop.address})  "
            f"{_ttl_pair(hop)} {brackets}{_stack_suffix(hop)}")
    if include_rtt:
        line += f" {hop.rtt_ms:.3f} ms"
    return line, last_rtl


def _block_header(annotation: TunnelAnnotation) -> str:
    code = annotation.code
    if code == IndicatorCode.FRPLA:
        label = "FRPLA"
    elif code == IndicatorCode.RTLA:
        label = "RTLA"
    elif code == IndicatorCode.LSE_TTL:
        label = "OPAQUE"
    elif code == IndicatorCode.DUP_IP:
        label = f"Duplicate IP (Egress : {annotation.egress_display})"
    elif code == IndicatorCode.NONE:
        label = "REVEALED"
    else:
        label = code.name
    return (f"    {label} | Length estimation : {annotation.estimate}"
            f" | Revealed : {len(annotation.revealed)}"
            f" (difference : {annotation.difference})")


def _revealed_line(anchor: int, position: int, hop: HopRecord,
                   include_rtt: bool) -> str:
    line = (f"     {anchor}.{position} [REVEALED] {hop.display_name}"
            f" ({hop.address})  {_ttl_pair(hop)} [frpla = {hop.frpla}]"
            f"[qttl = {hop.qttl}][uturn = {hop.uturn}] - step {hop.step}")
    if hop.buddy_used:
        line += " (Buddy used)"
    if include_rtt:
        line += f" {hop.rtt_ms:.3f} ms"
    return line


def dump_trace(trace: AnnotatedTrace, include_rtt: bool = True) -> str:
    """Render the canonical transcript for one annotated trace."""
    lines = [f"Launching trace: {trace.target} ({trace.target})", ""]
    blocks = {
        ann.ingress_index: ann
        for ann in trace.tunnels
        if ann.state != RevelationState.NOT_ATTEMPTED
    }
    last_rtl = 0
    for position, hop in enumerate(trace.hops, start=1):
        annotation = blocks.get(position - 1)
        if annotation is not None:
            # The block sits between its ingress and the hop that fired.
            lines.append("")
            lines.append(_block_header(annotation))
            for sub, revealed in enumerate(annotation.revealed, start=1):
                lines.append(_revealed_line(position - 1, sub, revealed,
                                            include_rtt))
            lines.append("")
        line, last_rtl = _hop_line(position, hop, last_rtl, include_rtt)
        lines.append(line)
    return "\n".join(lines) + "\n"


# -- record serialization ------------------------------------------------------

def _hop_dict(hop: HopRecord) -> dict:
    return {
        "probe_ttl": hop.probe_ttl,
        "address": hop.address,
        "reply_kind": hop.reply_kind,
        "te_ttl": hop.te_ttl,
        "er_ttl": hop.er_ttl,
        "qttl": hop.qttl,
        "stack": [[e.label, e.ttl, e.tc, e.bottom] for e in hop.stack],
        "rtt_ms": hop.rtt_ms,
        "name": hop.name,
        "frpla": hop.frpla,
        "rtl": hop.rtl,
        "uturn": hop.uturn,
        "code": int(hop.code),
        "revealed": hop.revealed,
        "step": hop.step,
        "buddy_used": hop.buddy_used,
    }


def _hop_from_dict(data: dict) -> HopRecord:
    return HopRecord(
        probe_ttl=data["probe_ttl"],
        address=data["address"],
        reply_kind=data["reply_kind"],
        te_ttl=data["te_ttl"],
        er_ttl=data["er_ttl"],
        qttl=data["qttl"],
        stack=tuple(
            LabelStackEntry(label, ttl, tc=tc, bottom=bottom)
            for label, ttl, tc, bottom in data["stack"]
        ),
        rtt_ms=data["rtt_ms"],
        name=data["name"],
        frpla=data["frpla"],
        rtl=data["rtl"],
        uturn=data["uturn"],
        code=IndicatorCode(data["code"]),
        revealed=data["revealed"],
        step=data["step"],
        buddy_used=data["buddy_used"],
    )


def record_dict(trace: AnnotatedTrace) -> dict:
    """Flatten one annotated trace to a JSON-serializable record."""
    return {
        "format": RECORD_FORMAT,
        "target": trace.target,
        "vantage": trace.vantage,
        "starting_ttl": trace.starting_ttl,
        "thresholds": {
            "frpla": trace.thresholds.frpla,
            "rtla": trace.thresholds.rtla,
            "lse_ttl": trace.thresholds.lse_ttl,
            "uturn": trace.thresholds.uturn,
        },
        "hops": [_hop_dict(hop) for hop in trace.hops],
        "tunnels": [
            {
                "code": int(ann.code),
                "class": ann.tunnel_class.value,
                "ingress_index": ann.ingress_index,
                "estimate": ann.estimate,
                "state": ann.state.value,
                "egress_display": ann.egress_display,
                "revealed": [_hop_dict(hop) for hop in ann.revealed],
            }
            for ann in trace.tunnels
        ],
        "accounting": {
            "original": trace.accounting.original,
            "revealed": trace.accounting.revealed,
            "failed": trace.accounting.failed,
            "inconclusive": trace.accounting.inconclusive,
        },
    }


def parse_record(line: str | dict) -> AnnotatedTrace:
    """Rebuild an annotated trace from one serialized record."""
    data = json.loads(line) if isinstance(line, str) else line
    if data.get("format") != RECORD_FORMAT:
        raise ValueError(f"unsupported record format: {data.get('format')!r}")
    thresholds = Thresholds(**data["thresholds"])
    accounting = ProbeAccounting(**data["accounting"])
    tunnels = [
        TunnelAnnotation(
            code=IndicatorCode(item["code"]),
            tunnel_class=TunnelClass(item["class"]),
            ingress_index=item["ingress_index"],
            estimate=item["estimate"],
            state=RevelationState(item["state"]),
            egress_display=item["egress_display"],
            revealed=[_hop_from_dict(hop) for hop in item["revealed"]],
        )
        for item in data["tunnels"]
    ]
    return AnnotatedTrace(
        target=data["target"],
        vantage=data["vantage"],
        hops=[_hop_from_dict(hop) for hop in data["hops"]],
        tunnels=tunnels,
        accounting=accounting,
        starting_ttl=data["starting_ttl"],
        thresholds=thresholds,
    )


def dump_records(traces: Iterable[AnnotatedTrace], stream: IO[str]) -> None:
    """Write one JSON record per line."""
    for trace in traces:
        stream.write(json.dumps(record_dict(trace), sort_keys=True) + "\n")


def load_records(stream: IO[str]) -> list[AnnotatedTrace]:
    """Read a record-per-line stream back into annotated traces."""
    return [parse_record(line) for line in stream if line.strip()]


# -- aggregate statistics -------------------------------------------------------

def summarize(traces: Iterable[AnnotatedTrace]) -> dict:
    """Aggregate tunnel and probe-cost statistics over a trace corpus."""
    traces = list(traces)
    classes: dict[str, int] = {}
    codes: dict[str, int] = {}
    states: dict[str, int] = {}
    differences: list[int] = []
    cost = ProbeAccounting()
    hops = 0
    for trace in traces:
        hops += len(trace.hops)
        cost.original += trace.accounting.original
        cost.revealed += trace.accounting.revealed
        cost.failed += trace.accounting.failed
        cost.inconclusive += trace.accounting.inconclusive
        for ann in trace.tunnels:
            classes[ann.tunnel_class.value] = classes.get(ann.tunnel_class.value, 0) + 1
            codes[ann.code.name] = codes.get(ann.code.name, 0) + 1
            states[ann.state.value] = states.get(ann.state.value, 0) + 1
            if ann.state not in (RevelationState.NOT_ATTEMPTED,
                                 RevelationState.ING_NOT_FOUND,
                                 RevelationState.TARGET_NOT_REACHED):
                differences.append(ann.difference)
    return {
        "traces": len(traces),
        "hops": hops,
        "tunnels": sum(classes.values()),
        "classes": dict(sorted(classes.items())),
        "codes": dict(sorted(codes.items())),
        "states": dict(sorted(states.items())),
        "mean_difference": (sum(differences) / len(differences)) if differences else 0.0,
        "probes": {
            "original": cost.original,
            "revealed": cost.revealed,
            "failed": cost.failed,
            "inconclusive": cost.inconclusive,
            "total": cost.total,
        },
    }


# Matrix rows: tunnel classes refined by the indicator that found them.
MATRIX_ROWS = (
    "Explicit",
    "Implicit(qTTL)",
    "Implicit(UTURN)",
    "Opaque",
    "InvisiblePHP(RTLA)",
    "InvisiblePHP(FRPLA)",
    "InvisibleUHP",
)

# Matrix columns: revelation techniques that actually uncovered hops.
MATRIX_COLS = ("Dpr", "Brpr", "OneHopLsp", "Mix")


def _matrix_row(annotation: TunnelAnnotation) -> str | None:
    cls = annotation.tunnel_class
    code = annotation.code
    if cls == TunnelClass.EXPLICIT:
        return "Explicit"
    if cls == TunnelClass.IMPLICIT:
        return "Implicit(qTTL)" if code == IndicatorCode.QTTL else "Implicit(UTURN)"
    if cls == TunnelClass.OPAQUE:
        return "Opaque"
    if cls == TunnelClass.INVISIBLE:
        if code == IndicatorCode.RTLA:
            return "InvisiblePHP(RTLA)"
        if code == IndicatorCode.FRPLA:
            return "InvisiblePHP(FRPLA)"
        if code == IndicatorCode.DUP_IP:
            return "InvisibleUHP"
    # Brute-force finds carry no classifying indicator: not bucketed.
    return None


def classify_stats(traces: Iterable[AnnotatedTrace]) -> dict:
    """Tunnel-class by revelation-technique counts plus probe counters.

    Every row is always present (an empty corpus yields an all-zero
    matrix); ``total`` counts all tunnels in the row while the technique
    columns count only the ones whose revelation ended in that state.
    """
    matrix = {row: {"total": 0, **{col: 0 for col in MATRIX_COLS}}
              for row in MATRIX_ROWS}
    cost = ProbeAccounting()
    for trace in traces:
        cost.original += trace.accounting.original
        cost.revealed += trace.accounting.revealed
        cost.failed += trace.accounting.failed
        cost.inconclusive += trace.accounting.inconclusive
        for annotation in trace.tunnels:
            row = _matrix_row(annotation)
            if row is None:
                continue
            matrix[row]["total"] += 1
            if annotation.state.value in MATRIX_COLS:
                matrix[row][annotation.state.value] += 1
    return {
        "matrix": matrix,
        "probes": {
            "original": cost.original,
            "revealed": cost.revealed,
            "failed": cost.failed,
            "inconclusive": cost.inconclusive,
            "total": cost.total,
        },
    }
