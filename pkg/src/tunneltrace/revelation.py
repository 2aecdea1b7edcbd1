"""Hidden LSP revelation by direct and backward recursive probing.

Given a tunnel ingress candidate and the first address seen past it, the
revealer traces toward that address.  When intermediate routers answer, the
whole hidden segment falls out of a single trace (direct revelation: every
find carries step 0).  When probes ride the LSP without expiring, the
revealer walks backward instead: it retargets the closest hop found so far,
peeling one router per mini trace (backward recursive revelation, one step
per mini).  A mini that stalls retries through the target's point-to-point
buddy address, which forces the egress to answer from its own side of the
link.

Guards keep the walk honest: a reply sourced by the ingress means the
backward walk is complete and everything stops; a reply sourced by the
original candidate adds nothing (the probe rode the tunnel again), except
in the buddy twist where a time exceeded reply from the stalled address
proves that address really sits one label switched hop away.
"""

from __future__ import annotations

import ipaddress
from dataclasses import dataclass, field

from tunneltrace.model import RevelationState

TTL_EXCEEDED = "ttl-exceeded"
DEST_UNREACH = "dest-unreach"

SLOT_CAP = 16
MINI_GAP_CAP = 2
MINI_SPAN = 24


@dataclass
class RevealedFind:
    """One address surfaced by revelation probing."""

    address: str
    probe_ttl: int
    arrival_ttl: int
    qttl: int
    slot: int
    buddy: bool
    kind: str


@dataclass
class RevealOutcome:
    state: RevelationState
    finds: list[RevealedFind] = field(default_factory=list)
    first_found: str | None = None

    @property
    def display_order(self) -> list[RevealedFind]:
        """Path order: latest backward step first, ties by distance."""
        return sorted(self.finds, key=lambda f: (-f.slot, f.probe_ttl))


def buddy_of(address: str) -> str:
    """The other usable address of a point-to-point /30, or the /31 peer."""
    value = int(ipaddress.IPv4Address(address))
    if value & 3 in (1, 2):
        return str(ipaddress.IPv4Address(value ^ 3))
    return str(ipaddress.IPv4Address(value ^ 1))


class Revealer:
    """Runs the revelation state machine over a prober.

    The prober must expose ``probe_trace(ttl, target) -> reply | None`` and
    ``probe_udp(target) -> reply | None`` where replies carry ``source``,
    ``kind``, ``ttl`` and ``qttl`` attributes.
    """

    def __init__(self, prober, ingress_address: str, ingress_ttl: int,
                 candidate: str, known: set[str], invisible: bool) -> None:
        self.prober = prober
        self.ingress_address = ingress_address
        self.ingress_ttl = ingress_ttl
        self.candidate = candidate
        self.known = set(known)
        self.invisible = invisible
        self.finds: list[RevealedFind] = []
        self._candidate_answered = False

    # -- one mini trace ----------------------------------------------------

    def _mini(self, target: str, slot: int, *, bootstrap: bool,
              buddy_mode: bool, prior_target: str | None) -> tuple[str, list[RevealedFind]]:
        start = max(1, self.ingress_ttl - 2) if bootstrap else self.ingress_ttl + 1
        new: list[RevealedFind] = []
        revealed_addrs = {f.address for f in self.finds}
        gap = 0
        last_source: str | None = None
        for ttl in range(start, self.ingress_ttl + MINI_SPAN):
            reply = self.prober.probe_trace(ttl, target)
            if reply is None:
                gap += 1
                if gap >= MINI_GAP_CAP:
                    return "stall", new
                continue
            gap = 0
            source = str(reply.source)
            if bootstrap and ttl < self.ingress_ttl:
                continue
            if bootstrap and ttl == self.ingress_ttl:
                if source != self.ingress_address:
                    return "ingress-missing", new
                continue
            if source == self.ingress_address:
                return "ingress", new
            if source == self.candidate:
                self._candidate_answered = True
            if (buddy_mode and prior_target is not None and source == prior_target
                    and source != target and reply.kind == TTL_EXCEEDED
                    and self.invisible):
                # Buddy twist: the stalled address answered with a time
                # exceeded, so it really is one hidden hop further out.
                new.append(RevealedFind(source, ttl, reply.ttl, reply.qttl or 1,
                                        slot, True, reply.kind))
                return "twist", new
            if source == self.candidate and source != target:
                return "candidate", new
            if source == target:
                return "reached", new
            if source in self.known or source in revealed_addrs:
                if source == last_source:
                    return "stall", new
                last_source = source
                continue
            find = RevealedFind(source, ttl, reply.ttl, reply.qttl or 1,
                                slot, buddy_mode, reply.kind)
            new.append(find)
            revealed_addrs.add(source)
            if reply.kind == DEST_UNREACH:
                return "reached", new
            last_source = source
        return "exhausted", new

    # -- the full walk ------------------------------------------------------

    def run(self) -> RevealOutcome:
        target = self.candidate
        prior_target: str | None = None
        buddy_mode = False
        bootstrap = True
        next_slot = 0
        ended_by_twist = False

        while next_slot < SLOT_CAP:
            status, new = self._mini(target, next_slot, bootstrap=bootstrap,
                                     buddy_mode=buddy_mode, prior_target=prior_target)
            self.finds.extend(new)
            if status == "ingress-missing":
                return self._outcome(RevelationState.ING_NOT_FOUND)
            if bootstrap:
                next_slot = 1  # the bootstrap always consumes step 0
                if status in ("stall", "exhausted") and not new \
                        and not self._candidate_answered:
                    return self._outcome(RevelationState.TARGET_NOT_REACHED)
            elif new:
                next_slot += 1
            bootstrap = False
            if status in ("ingress", "twist"):
                ended_by_twist = status == "twist"
                break
            if new:
                target = min(new, key=lambda f: f.probe_ttl).address
                prior_target = None
                buddy_mode = False
                continue
            if buddy_mode:
                break  # the buddy retry also came up empty
            buddy = buddy_of(target)
            if buddy == target:
                break
            confirm = self.prober.probe_udp(buddy)
            if confirm is None or confirm.kind != DEST_UNREACH:
                break
            if str(confirm.source) == self.ingress_address:
                break  # the link before the buddy is the ingress itself
            prior_target = target
            target = buddy
            buddy_mode = True

        del ended_by_twist
        return self._outcome(None)

    def _outcome(self, forced: RevelationState | None) -> RevealOutcome:
        first = self.finds[0].address if self.finds else None
        if forced is not None:
            return RevealOutcome(forced, self.finds, first)
        count = len(self.finds)
        if count == 0:
            state = RevelationState.NOTHING_TO_REVEAL
        elif count == 1:
            state = RevelationState.ONE_HOP_LSP
        elif all(f.slot == 0 for f in self.finds):
            state = RevelationState.DPR
        else:
            kinds = {f.buddy for f in self.finds}
            state = RevelationState.MIX if len(kinds) == 2 else RevelationState.BRPR
        return RevealOutcome(state, self.finds, first)
