"""Tunnel indicators and triggers.

Indicators are passive: they classify a hop from what its own replies quote
(label stack entries, quoted TTL, u-turn). Triggers are the active side:
they compare path-length measurements across consecutive hops and decide
whether a hidden-tunnel revelation should be launched.

Indicator priority on a hop that quotes a label stack: the hop is part of a
visible tunnel, so no trigger is ever evaluated on it. The quoted LSE-TTL
separates Explicit from Opaque: an LSE-TTL strictly inside
``(t_lse_ttl, 255)`` means the entry TTL was never refreshed along a hidden
stack (Opaque LSR); 255 itself is a freshly set TTL and stays Explicit.
"""

from __future__ import annotations

from tunneltrace.fingerprint import is_junos, path_len
from tunneltrace.model import HopRecord, IndicatorCode, Thresholds, TunnelClass


def frpla_value(hop: HopRecord) -> int:
    """Forward/return path length asymmetry: te path length minus probe TTL.

    Positive when the TTL-exceeded reply travelled more hops than the probe,
    i.e. when the forward path hides decrements that the return path shows.
    Negative values occur on asymmetric routes and are kept (they never
    trigger).
    """
    return path_len(hop.te_ttl) - hop.probe_ttl


def rtl_value(hop: HopRecord) -> int | None:
    """Return tunnel length: te path length minus er path length.

    None when the address never answered a ping. On JunOS responders a
    positive value counts the labelled hops of the return LSP (the
    TTL-exceeded reply rides it with a pipe TTL while the echo reply is
    clamped); on other platforms the same quantity is read as the u-turn.
    """
    if hop.er_ttl is None:
        return None
    return path_len(hop.te_ttl) - path_len(hop.er_ttl)


def uturn_value(hop: HopRecord) -> int:
    """U-turn indicator: same measurement as :func:`rtl_value`, 0 if unknown."""
    rtl = rtl_value(hop)
    return 0 if rtl is None else rtl


def uturn_expected(position: int, length: int, icmp_tunneling: bool = False) -> int:
    """Expected u-turn at LSR ``position`` (1-based) of a ``length``-LSR tunnel.

    The TTL-exceeded reply of an LSR deep inside a tunnel first rides the
    LSP to its end before returning, so it travels the remaining tunnel
    hops twice: ``2 * (length - position + 1)``. JunOS icmp-tunneling adds
    one decrement for the re-injected reply.
    """
    value = 2 * (length - position + 1)
    return value + 1 if icmp_tunneling else value


def classify_indicator(
    hop: HopRecord, thresholds: Thresholds
) -> tuple[IndicatorCode, TunnelClass]:
    """Passive indicator for one hop.

    Returns (NONE, NONE) when nothing is visible; the u-turn indicator is
    not decided here because it needs the cumulated-window rule applied by
    the engine across consecutive hops.
    """
    if hop.stack:
        quoted = hop.stack[0].ttl
        if thresholds.lse_ttl < quoted < 255:
            return IndicatorCode.LSE_TTL, TunnelClass.OPAQUE
        return IndicatorCode.LSE, TunnelClass.EXPLICIT
    if hop.qttl > 1:
        return IndicatorCode.QTTL, TunnelClass.IMPLICIT
    return IndicatorCode.NONE, TunnelClass.NONE


def check_triggers(
    prev: HopRecord | None,
    cur: HopRecord,
    nxt: HopRecord | None,
    thresholds: Thresholds,
) -> IndicatorCode:
    """Active trigger decision for ``cur``, the suspected first post-tunnel hop.

    ``prev`` is the suspected ingress, ``nxt`` the following hop (needed for
    the duplicate-address check). Order matters: DUP_IP dominates, then RTLA
    on JunOS responders (a missing echo measurement falls through), then
    FRPLA.
    """
    if prev is None or prev.address == cur.address:
        return IndicatorCode.NONE
    if nxt is not None and cur.address == nxt.address:
        return IndicatorCode.DUP_IP
    if is_junos(cur.te_ttl, cur.er_ttl):
        rtl = rtl_value(cur)
        if rtl is not None and rtl >= thresholds.rtla:
            return IndicatorCode.RTLA
    if frpla_value(cur) >= thresholds.frpla:
        return IndicatorCode.FRPLA
    return IndicatorCode.NONE


def trigger_estimate(code: IndicatorCode, cur: HopRecord) -> int:
    """Tunnel length estimate associated with a fired trigger or indicator."""
    if code == IndicatorCode.RTLA:
        rtl = rtl_value(cur)
        return rtl if rtl is not None else 0
    if code == IndicatorCode.LSE_TTL:
        return 255 - cur.stack[0].ttl
    # FRPLA and DUP_IP both estimate from the forward/return asymmetry.
    return frpla_value(cur)
