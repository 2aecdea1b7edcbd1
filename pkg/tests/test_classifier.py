"""Indicator classification and trigger decisions on constructed hops."""

import pytest
from hypothesis import given
from hypothesis import strategies as st

from tunneltrace.classifier import (
    check_triggers,
    classify_indicator,
    frpla_value,
    rtl_value,
    trigger_estimate,
    uturn_expected,
    uturn_value,
)
from tunneltrace.model import (
    HopRecord,
    IndicatorCode,
    LabelStackEntry,
    Thresholds,
    TunnelClass,
)


def hop(probe_ttl, address="10.0.0.1", te=255, er=255, qttl=1, stack=()):
    """Shorthand hop with arrival TTLs chosen directly."""
    return HopRecord(
        probe_ttl=probe_ttl,
        address=address,
        te_ttl=te,
        er_ttl=er,
        qttl=qttl,
        stack=tuple(stack),
    )


class TestPathAsymmetries:
    def test_frpla_counts_hidden_decrements(self):
        # Probe TTL 3 but the reply's 250 arrival TTL implies a six-hop
        # return path: three decrements happened out of sight.
        assert frpla_value(hop(3, te=250)) == 3

    def test_frpla_zero_on_symmetric_paths(self):
        assert frpla_value(hop(3, te=253)) == 0

    def test_frpla_can_go_negative(self):
        assert frpla_value(hop(4, te=253)) == -1

    def test_rtl_contrasts_the_two_reply_kinds(self):
        # TTL-exceeded arrived at 250 (six hops), echo reply at 62 (three
        # hops): the exceeded reply rode a three-hop return LSP.
        assert rtl_value(hop(3, te=250, er=62)) == 3

    def test_rtl_none_without_echo_reply(self):
        assert rtl_value(hop(3, te=250, er=None)) is None

    def test_uturn_defaults_missing_to_zero(self):
        assert uturn_value(hop(3, te=250, er=None)) == 0
        assert uturn_value(hop(3, te=250, er=62)) == 3


class TestUturnExpected:
    @pytest.mark.parametrize(
        "position,length,icmp,expected",
        [
            # Hand-walked three-LSR tunnel: the reply from LSR i travels
            # forward to the egress (length - i + 1 links) and back again.
            (1, 3, False, 6),
            (2, 3, False, 4),
            (3, 3, False, 2),
            (1, 3, True, 7),
            (3, 3, True, 3),
            (1, 1, False, 2),
        ],
    )
    def test_hand_walked_values(self, position, length, icmp, expected):
        assert uturn_expected(position, length, icmp) == expected

    @given(
        length=st.integers(min_value=1, max_value=8),
        icmp=st.booleans(),
    )
    def test_steps_down_by_two_per_position(self, length, icmp):
        values = [uturn_expected(i, length, icmp) for i in range(1, length + 1)]
        assert values[-1] == 2 + (1 if icmp else 0)
        for left, right in zip(values, values[1:]):
            assert left - right == 2


class TestClassifyIndicator:
    def setup_method(self):
        self.thresholds = Thresholds()

    def labelled(self, quoted_ttl):
        return hop(3, stack=[LabelStackEntry(label=16005, ttl=quoted_ttl)])

    def test_fresh_lse_ttl_is_explicit(self):
        assert classify_indicator(self.labelled(255), self.thresholds) == (
            IndicatorCode.LSE,
            TunnelClass.EXPLICIT,
        )

    @pytest.mark.parametrize("quoted", [254, 252, 237])
    def test_aged_lse_ttl_is_opaque(self, quoted):
        assert classify_indicator(self.labelled(quoted), self.thresholds) == (
            IndicatorCode.LSE_TTL,
            TunnelClass.OPAQUE,
        )

    @pytest.mark.parametrize("quoted", [236, 200, 1])
    def test_band_floor_is_exclusive(self, quoted):
        # At or below the threshold the quoted TTL no longer reads as an
        # aged 255; treat the stack as a plain explicit tunnel.
        assert classify_indicator(self.labelled(quoted), self.thresholds) == (
            IndicatorCode.LSE,
            TunnelClass.EXPLICIT,
        )

    def test_quoted_ip_ttl_above_one_is_implicit(self):
        assert classify_indicator(hop(3, qttl=4), self.thresholds) == (
            IndicatorCode.QTTL,
            TunnelClass.IMPLICIT,
        )

    def test_plain_hop_has_no_indicator(self):
        assert classify_indicator(hop(3), self.thresholds) == (
            IndicatorCode.NONE,
            TunnelClass.NONE,
        )

    def test_stack_wins_over_quoted_ttl(self):
        labelled = hop(3, qttl=4, stack=[LabelStackEntry(16005, 255)])
        code, _ = classify_indicator(labelled, self.thresholds)
        assert code == IndicatorCode.LSE


class TestCheckTriggers:
    def setup_method(self):
        self.thresholds = Thresholds()

    def test_needs_a_distinct_previous_hop(self):
        cur = hop(3, te=250)
        assert check_triggers(None, cur, None, self.thresholds) == IndicatorCode.NONE
        same = hop(2, address=cur.address)
        assert check_triggers(same, cur, None, self.thresholds) == IndicatorCode.NONE

    def test_duplicate_next_address_fires_first(self):
        prev = hop(2, address="10.0.0.9")
        cur = hop(3, address="10.0.0.1", te=250, er=62)  # JunOS, rtl 3
        nxt = hop(4, address="10.0.0.1")
        assert check_triggers(prev, cur, nxt, self.thresholds) == IndicatorCode.DUP_IP

    def test_rtla_on_junos_responder(self):
        prev = hop(2, address="10.0.0.9")
        cur = hop(3, te=250, er=62)
        nxt = hop(4, address="10.0.0.2")
        assert check_triggers(prev, cur, nxt, self.thresholds) == IndicatorCode.RTLA

    def test_rtla_threshold_is_inclusive(self):
        prev = hop(2, address="10.0.0.9")
        cur = hop(5, te=250, er=60)  # rtl exactly 1 (te len 6, er len 5)
        assert rtl_value(cur) == 1
        assert check_triggers(prev, cur, None, self.thresholds) == IndicatorCode.RTLA

    def test_junos_zero_rtl_falls_through_to_frpla(self):
        prev = hop(2, address="10.0.0.9")
        cur = hop(3, te=250, er=58)  # JunOS buckets, but rtl 6 - 7 < 1
        assert rtl_value(cur) < 1
        assert check_triggers(prev, cur, None, self.thresholds) == IndicatorCode.FRPLA

    def test_missing_echo_reply_falls_through_to_frpla(self):
        prev = hop(2, address="10.0.0.9")
        cur = hop(3, te=250, er=None)
        assert check_triggers(prev, cur, None, self.thresholds) == IndicatorCode.FRPLA

    def test_frpla_on_symmetric_initial_ttls(self):
        prev = hop(2, address="10.0.0.9")
        cur = hop(3, te=250, er=250)  # Cisco-like: same bucket both ways
        assert check_triggers(prev, cur, None, self.thresholds) == IndicatorCode.FRPLA

    def test_frpla_below_threshold_stays_quiet(self):
        prev = hop(2, address="10.0.0.9")
        cur = hop(4, te=250, er=250)  # frpla 2 < 3
        assert check_triggers(prev, cur, None, self.thresholds) == IndicatorCode.NONE

    def test_thresholds_are_honoured(self):
        prev = hop(2, address="10.0.0.9")
        cur = hop(4, te=250, er=250)
        eager = Thresholds(frpla=2)
        assert check_triggers(prev, cur, None, eager) == IndicatorCode.FRPLA


class TestTriggerEstimate:
    def test_rtla_uses_return_tunnel_length(self):
        cur = hop(3, te=250, er=62)
        assert trigger_estimate(IndicatorCode.RTLA, cur) == 3

    def test_lse_ttl_counts_the_aging(self):
        cur = hop(3, stack=[LabelStackEntry(16005, 252)])
        assert trigger_estimate(IndicatorCode.LSE_TTL, cur) == 3

    def test_frpla_and_dup_ip_use_the_asymmetry(self):
        cur = hop(3, te=250, er=250)
        assert trigger_estimate(IndicatorCode.FRPLA, cur) == 3
        assert trigger_estimate(IndicatorCode.DUP_IP, cur) == 3
