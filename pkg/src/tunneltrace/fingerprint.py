"""Router OS fingerprinting from reply initial TTLs.

Routers set characteristic initial TTLs on the replies they originate. The
pair (TTL-exceeded initial, echo-reply initial) separates the major router
OS families:

====================  =========================
(te, er) initials     brand
====================  =========================
(255, 255)            CiscoLike (IOS, IOS XR)
(255, 64)             JuniperJunOS
(128, 128)            JuniperJunosE
(64, 64)              UnixLike
anything else         Unknown
====================  =========================

The initial TTL of a reply is not observed directly; it is recovered as the
smallest of {64, 128, 255} that is >= the received TTL, and the reply path
length is ``initial - received + 1``.
"""

from __future__ import annotations

from tunneltrace.model import RouterBrand

INITIAL_TTLS = (64, 128, 255)

_SIGNATURES = {
    (255, 255): RouterBrand.CISCO_LIKE,
    (255, 64): RouterBrand.JUNIPER_JUNOS,
    (128, 128): RouterBrand.JUNIPER_JUNOSE,
    (64, 64): RouterBrand.UNIX_LIKE,
}


def initial_ttl_for(received: int) -> int:
    """Smallest plausible initial TTL for a reply received with ``received``."""
    if not 1 <= received <= 255:
        raise ValueError(f"received TTL out of range: {received}")
    for initial in INITIAL_TTLS:
        if received <= initial:
            return initial
    raise AssertionError("unreachable")


def path_len(received: int) -> int:
    """Reply path length in hops implied by a received TTL."""
    return initial_ttl_for(received) - received + 1


def signature(te_ttl: int, er_ttl: int | None) -> RouterBrand:
    """Classify a responder from its TTL-exceeded and echo-reply TTLs."""
    if er_ttl is None:
        return RouterBrand.UNKNOWN
    pair = (initial_ttl_for(te_ttl), initial_ttl_for(er_ttl))
    return _SIGNATURES.get(pair, RouterBrand.UNKNOWN)


def is_junos(te_ttl: int, er_ttl: int | None) -> bool:
    """True when the responder carries the JunOS (255, 64) signature."""
    return signature(te_ttl, er_ttl) is RouterBrand.JUNIPER_JUNOS
