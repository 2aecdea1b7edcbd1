"""Revelation helpers: buddy addresses, display ordering, revealed sets."""

import ipaddress

import pytest
from hypothesis import given
from hypothesis import strategies as st

from tunneltrace.model import RevelationState
from tunneltrace.revelation import (
    MINI_GAP_CAP,
    SLOT_CAP,
    RevealedFind,
    RevealOutcome,
    buddy_of,
)
from util import run_label


class TestBuddyOf:
    @pytest.mark.parametrize(
        "address,buddy",
        [
            # /30 point-to-point: hosts .1 and .2 share the link.
            ("10.0.0.1", "10.0.0.2"),
            ("10.0.0.2", "10.0.0.1"),
            ("10.0.0.5", "10.0.0.6"),
            ("192.168.1.97", "192.168.1.98"),
            # /31 style endings pair with the adjacent address.
            ("10.0.0.0", "10.0.0.1"),
            ("10.0.0.3", "10.0.0.2"),
        ],
    )
    def test_point_to_point_peers(self, address, buddy):
        assert buddy_of(address) == buddy

    @given(st.integers(min_value=0, max_value=2**32 - 1))
    def test_buddy_differs_and_shares_the_link(self, value):
        address = str(ipaddress.IPv4Address(value))
        buddy = buddy_of(address)
        assert buddy != address
        # Both addresses always fall inside the same /30.
        assert int(ipaddress.IPv4Address(buddy)) >> 2 == value >> 2

    @given(st.integers(min_value=0, max_value=2**30 - 1))
    def test_involution_on_usable_host_addresses(self, network):
        # For the two usable /30 hosts the mapping is its own inverse.
        for offset in (1, 2):
            address = str(ipaddress.IPv4Address((network << 2) | offset))
            assert buddy_of(buddy_of(address)) == address


class TestDisplayOrder:
    def find(self, address, probe_ttl, slot):
        return RevealedFind(
            address=address,
            probe_ttl=probe_ttl,
            arrival_ttl=253,
            qttl=1,
            slot=slot,
            buddy=False,
            kind="ttl-exceeded",
        )

    def test_latest_backward_step_first(self):
        outcome = RevealOutcome(
            state=RevelationState.BRPR,
            finds=[
                self.find("10.0.0.1", 4, 0),
                self.find("10.0.0.2", 4, 2),
                self.find("10.0.0.3", 4, 1),
            ],
        )
        assert [f.address for f in outcome.display_order] == [
            "10.0.0.2",
            "10.0.0.3",
            "10.0.0.1",
        ]

    def test_ties_break_by_probe_distance(self):
        outcome = RevealOutcome(
            state=RevelationState.DPR,
            finds=[
                self.find("10.0.0.9", 6, 0),
                self.find("10.0.0.8", 5, 0),
                self.find("10.0.0.7", 4, 0),
            ],
        )
        assert [f.address for f in outcome.display_order] == [
            "10.0.0.7",
            "10.0.0.8",
            "10.0.0.9",
        ]

    def test_caps_are_sane(self):
        assert SLOT_CAP >= 1
        assert MINI_GAP_CAP >= 1


class TestRevealedSets:
    def test_backward_walk_surfaces_every_hidden_hop(self):
        # Three hidden label switching routers between ingress and egress;
        # the backward recursive walk must name each of them once.
        _, trace = run_label("cisco152-invisible-php")
        (annotation,) = trace.tunnels
        addresses = [h.address for h in annotation.revealed]
        assert len(addresses) == len(set(addresses)) == 3
        assert all(h.revealed for h in annotation.revealed)
        assert annotation.state == RevelationState.BRPR

    def test_direct_walk_keeps_probe_order(self):
        _, trace = run_label("juniper-rsvp-php")
        (annotation,) = trace.tunnels
        assert annotation.state == RevelationState.DPR
        ttls = [h.probe_ttl for h in annotation.revealed]
        assert ttls == sorted(ttls)

    def test_buddy_flag_marks_assisted_finds(self):
        _, trace = run_label("cisco152-invisible-uhp")
        (annotation,) = trace.tunnels
        assert annotation.revealed
        assert all(h.buddy_used for h in annotation.revealed)

    def test_plain_walk_never_sets_buddy_flag(self):
        _, trace = run_label("cisco152-invisible-uhp-host-routes")
        (annotation,) = trace.tunnels
        assert annotation.revealed
        assert not any(h.buddy_used for h in annotation.revealed)
