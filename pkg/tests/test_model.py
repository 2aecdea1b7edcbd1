"""Core data model: wire encoding, derived properties, config validation."""

import struct

import pytest
from hypothesis import given
from hypothesis import strategies as st

from tunneltrace.model import (
    LABEL_IMPLICIT_NULL,
    LABEL_IPV4_EXPLICIT_NULL,
    LABEL_IPV6_EXPLICIT_NULL,
    MAX_LABEL,
    EngineConfig,
    HopRecord,
    IndicatorCode,
    LabelStackEntry,
    ProbeAccounting,
    Thresholds,
    TunnelAnnotation,
    TunnelClass,
)


class TestLabelStackEntry:
    def test_pack_layout(self):
        # Hand-assembled word: label 16005 in the top 20 bits, TC 0,
        # bottom-of-stack bit set, TTL 252 in the low byte.
        entry = LabelStackEntry(label=16005, ttl=252)
        word = (16005 << 12) | (0 << 9) | (1 << 8) | 252
        assert entry.pack() == struct.pack("!I", word)

    def test_pack_fields_spread(self):
        entry = LabelStackEntry(label=0xABCDE, ttl=0x7F, tc=5, bottom=False)
        word = (0xABCDE << 12) | (5 << 9) | (0 << 8) | 0x7F
        assert entry.pack() == word.to_bytes(4, "big")

    def test_unpack_known_word(self):
        # 0x03E85_1_FC: label 16005, tc 0, bottom 1, ttl 252.
        data = bytes([0x03, 0xE8, 0x51, 0xFC])
        entry = LabelStackEntry.unpack(data)
        assert entry.label == 16005
        assert entry.tc == 0
        assert entry.bottom is True
        assert entry.ttl == 252

    @given(
        label=st.integers(min_value=0, max_value=MAX_LABEL),
        ttl=st.integers(min_value=0, max_value=255),
        tc=st.integers(min_value=0, max_value=7),
        bottom=st.booleans(),
    )
    def test_pack_unpack_roundtrip(self, label, ttl, tc, bottom):
        entry = LabelStackEntry(label=label, ttl=ttl, tc=tc, bottom=bottom)
        packed = entry.pack()
        assert len(packed) == 4
        assert LabelStackEntry.unpack(packed) == entry

    @pytest.mark.parametrize("label", [-1, MAX_LABEL + 1])
    def test_label_out_of_range(self, label):
        with pytest.raises(ValueError):
            LabelStackEntry(label=label, ttl=1)

    @pytest.mark.parametrize("ttl", [-1, 256])
    def test_ttl_out_of_range(self, ttl):
        with pytest.raises(ValueError):
            LabelStackEntry(label=1, ttl=ttl)

    @pytest.mark.parametrize("tc", [-1, 8])
    def test_tc_out_of_range(self, tc):
        with pytest.raises(ValueError):
            LabelStackEntry(label=1, ttl=1, tc=tc)

    def test_unpack_needs_four_bytes(self):
        with pytest.raises(ValueError):
            LabelStackEntry.unpack(b"\x00\x00\x00")

    def test_reserved_labels(self):
        assert LabelStackEntry(LABEL_IPV4_EXPLICIT_NULL, 1).is_explicit_null
        assert LabelStackEntry(LABEL_IPV6_EXPLICIT_NULL, 1).is_explicit_null
        assert LabelStackEntry(LABEL_IMPLICIT_NULL, 1).is_implicit_null
        routine = LabelStackEntry(16005, 252)
        assert not routine.is_explicit_null
        assert not routine.is_implicit_null


class TestHopRecord:
    def test_display_name_prefers_name(self):
        hop = HopRecord(probe_ttl=1, address="10.0.0.1", name="PE1")
        assert hop.display_name == "PE1"

    def test_display_name_falls_back_to_address(self):
        hop = HopRecord(probe_ttl=1, address="10.0.0.1")
        assert hop.display_name == "10.0.0.1"


class TestTunnelAnnotation:
    def test_difference_is_absolute(self):
        revealed = [HopRecord(probe_ttl=4, address="10.0.0.9", revealed=True)]
        ann = TunnelAnnotation(
            code=IndicatorCode.FRPLA,
            tunnel_class=TunnelClass.INVISIBLE,
            ingress_index=3,
            estimate=3,
            revealed=revealed,
        )
        assert ann.difference == 2
        ann.estimate = 0
        assert ann.difference == 1


class TestProbeAccounting:
    def test_total_sums_all_buckets(self):
        acct = ProbeAccounting(original=10, revealed=4, failed=2, inconclusive=1)
        assert acct.total == 17

    def test_total_starts_at_zero(self):
        assert ProbeAccounting().total == 0


class TestEngineConfig:
    def test_defaults(self):
        config = EngineConfig()
        assert config.starting_ttl == 3
        assert config.max_ttl == 32
        assert config.gap_limit == 5
        assert config.flow_id == 0
        assert config.brute_force is False

    @pytest.mark.parametrize("ttl", [0, -1])
    def test_starting_ttl_must_be_positive(self, ttl):
        with pytest.raises(ValueError):
            EngineConfig(starting_ttl=ttl)

    def test_gap_limit_must_be_positive(self):
        with pytest.raises(ValueError):
            EngineConfig(gap_limit=0)


class TestThresholds:
    def test_calibrated_defaults(self):
        thresholds = Thresholds()
        assert thresholds.frpla == 3
        assert thresholds.rtla == 1
        assert thresholds.lse_ttl == 236
        assert thresholds.uturn == 0


class TestIndicatorCode:
    def test_record_values_are_stable(self):
        # Serialized records store these integers; renumbering would
        # silently corrupt archived data.
        assert IndicatorCode.NONE == 0
        assert IndicatorCode.LSE == 1
        assert IndicatorCode.QTTL == 2
        assert IndicatorCode.UTURN == 3
        assert IndicatorCode.LSE_TTL == 4
        assert IndicatorCode.FRPLA == 5
        assert IndicatorCode.RTLA == 6
        assert IndicatorCode.DUP_IP == 7
