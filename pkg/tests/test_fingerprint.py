"""Reply TTL fingerprinting: initial TTL buckets, path lengths, brands."""

import pytest
from hypothesis import given
from hypothesis import strategies as st

from tunneltrace.fingerprint import (
    INITIAL_TTLS,
    initial_ttl_for,
    is_junos,
    path_len,
    signature,
)
from tunneltrace.model import RouterBrand


class TestInitialTtlFor:
    @pytest.mark.parametrize(
        "received,expected",
        [
            (1, 64),
            (63, 64),
            (64, 64),
            (65, 128),
            (128, 128),
            (129, 255),
            (254, 255),
            (255, 255),
        ],
    )
    def test_bucket_boundaries(self, received, expected):
        assert initial_ttl_for(received) == expected

    @pytest.mark.parametrize("received", [0, -5, 256, 1000])
    def test_rejects_impossible_ttls(self, received):
        with pytest.raises(ValueError):
            initial_ttl_for(received)

    def test_buckets_match_module_constant(self):
        assert INITIAL_TTLS == (64, 128, 255)


class TestPathLen:
    @pytest.mark.parametrize(
        "received,expected",
        [
            # A reply that left with TTL 255 and arrived at 250 crossed
            # five links; the sender is the sixth hop on the return path.
            (250, 6),
            (253, 3),
            (62, 3),
            (120, 9),
            (64, 1),
            (128, 1),
            (255, 1),
            # 65 is just above the 64 bucket, so the inferred initial is
            # 128 and the return path looks 64 hops long.
            (65, 64),
        ],
    )
    def test_hand_computed_lengths(self, received, expected):
        assert path_len(received) == expected

    @given(
        initial=st.sampled_from(INITIAL_TTLS),
        hops=st.integers(min_value=0, max_value=63),
    )
    def test_inverts_ttl_decrement(self, initial, hops):
        # Simulate a reply emitted with a known initial TTL that crossed
        # `hops` links; path_len must recover the hop count plus one.
        # Keeping hops below 64 keeps every bucket unambiguous.
        assert path_len(initial - hops) == hops + 1


class TestSignature:
    @pytest.mark.parametrize(
        "te,er,brand",
        [
            (255, 255, RouterBrand.CISCO_LIKE),
            (255, 64, RouterBrand.JUNIPER_JUNOS),
            (128, 128, RouterBrand.JUNIPER_JUNOSE),
            (64, 64, RouterBrand.UNIX_LIKE),
        ],
    )
    def test_initial_pairs(self, te, er, brand):
        assert signature(te, er) == brand

    def test_arrival_ttls_are_bucketed_first(self):
        # te arrived at 250 (initial 255), er at 60 (initial 64): the
        # distinctive JunOS split.
        assert signature(250, 60) == RouterBrand.JUNIPER_JUNOS

    def test_missing_echo_reply_is_unknown(self):
        assert signature(250, None) == RouterBrand.UNKNOWN

    def test_unmapped_pair_is_unknown(self):
        # (64, 128) is not a known OS signature.
        assert signature(60, 120) == RouterBrand.UNKNOWN

    def test_is_junos(self):
        assert is_junos(250, 60)
        assert not is_junos(250, 250)
        assert not is_junos(250, None)
