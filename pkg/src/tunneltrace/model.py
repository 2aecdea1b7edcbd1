"""Core data model: label stack entries, hop records, tunnel annotations.

Everything the engine measures or derives is kept in plain dataclasses so
that traces can be serialized to line-delimited JSON records and parsed back
without loss (see :mod:`tunneltrace.report`).
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field

# Reserved MPLS label values (RFC 3032).
LABEL_IPV4_EXPLICIT_NULL = 0
LABEL_ROUTER_ALERT = 1
LABEL_IPV6_EXPLICIT_NULL = 2
LABEL_IMPLICIT_NULL = 3

MAX_LABEL = (1 << 20) - 1


class RouterBrand(enum.Enum):
    """Router OS family inferred from reply initial TTL pairs."""

    CISCO_LIKE = "CiscoLike"
    JUNIPER_JUNOS = "JuniperJunOS"
    JUNIPER_JUNOSE = "JuniperJunosE"
    UNIX_LIKE = "UnixLike"
    UNKNOWN = "Unknown"


class IndicatorCode(enum.IntEnum):
    """Why a hop was flagged: passive indicators and active triggers.

    Values are stable and ordered by increasing diagnostic strength within
    each group; records store the integer.
    """

    NONE = 0
    LSE = 1        # label stack entry quoted: explicit tunnel
    QTTL = 2       # quoted IP TTL > 1: implicit tunnel
    UTURN = 3      # te/er path length mismatch: implicit tunnel
    LSE_TTL = 4    # quoted LSE-TTL in the opaque band: opaque tunnel
    FRPLA = 5      # forward/return path length asymmetry: trigger
    RTLA = 6       # return tunnel length asymmetry (JunOS): trigger
    DUP_IP = 7     # duplicate address on consecutive hops: trigger


class TunnelClass(enum.Enum):
    """Tunnel interpretation attached to an annotation."""

    NONE = "None"
    EXPLICIT = "Explicit"
    IMPLICIT = "Implicit"
    OPAQUE = "Opaque"
    INVISIBLE = "Invisible"


class RevelationState(enum.Enum):
    """Outcome of a hidden-LSR revelation attempt."""

    NOT_ATTEMPTED = "NotAttempted"
    TARGET_NOT_REACHED = "TargetNotReached"
    ING_NOT_FOUND = "IngNotFound"
    DPR = "Dpr"                      # direct path revelation (plain trace)
    BRPR = "Brpr"                    # backward-recursive path revelation
    NOTHING_TO_REVEAL = "NothingToReveal"
    ONE_HOP_LSP = "OneHopLsp"
    MIX = "Mix"                      # both buddy-assisted and plain pushes


@dataclass(frozen=True)
class LabelStackEntry:
    """One 32-bit MPLS label stack entry: 20-bit label, 3-bit TC, bottom
    bit, 8-bit TTL."""

    label: int
    ttl: int
    tc: int = 0
    bottom: bool = True

    def __post_init__(self) -> None:
        if not 0 <= self.label <= MAX_LABEL:
            raise ValueError(f"label out of range: {self.label}")
        if not 0 <= self.ttl <= 255:
            raise ValueError(f"LSE-TTL out of range: {self.ttl}")
        if not 0 <= self.tc <= 7:
            raise ValueError(f"TC out of range: {self.tc}")

    def pack(self) -> bytes:
        """Encode to the 4-byte wire format."""
        word = (self.label << 12) | (self.tc << 9) | (int(self.bottom) << 8) | self.ttl
        return struct.pack("!I", word)

    @classmethod
    def unpack(cls, data: bytes) -> "LabelStackEntry":
        """Decode one entry from 4 bytes."""
        if len(data) != 4:
            raise ValueError(f"need 4 bytes, got {len(data)}")
        (word,) = struct.unpack("!I", data)
        return cls(
            label=word >> 12,
            tc=(word >> 9) & 0x7,
            bottom=bool((word >> 8) & 0x1),
            ttl=word & 0xFF,
        )

    @property
    def is_explicit_null(self) -> bool:
        return self.label in (LABEL_IPV4_EXPLICIT_NULL, LABEL_IPV6_EXPLICIT_NULL)

    @property
    def is_implicit_null(self) -> bool:
        return self.label == LABEL_IMPLICIT_NULL


@dataclass
class HopRecord:
    """One responding hop of a trace, with measurements and annotations.

    ``te_ttl`` is the arrival TTL of the TTL-exceeded (or terminal) reply,
    ``er_ttl`` the arrival TTL of the echo reply for the same address (None
    when the address never answered a ping). ``qttl`` is the IP TTL quoted
    inside the reply, ``stack`` the quoted label stack entries, outermost
    first.
    """

    probe_ttl: int
    address: str
    reply_kind: str = "ttl-exceeded"  # ttl-exceeded | dest-unreach | echo-reply
    te_ttl: int = 0
    er_ttl: int | None = None
    qttl: int = 1
    stack: tuple[LabelStackEntry, ...] = ()
    rtt_ms: float = 0.0
    name: str | None = None
    # Derived annotations, filled by the engine.
    frpla: int = 0
    rtl: int | None = None
    uturn: int = 0
    code: IndicatorCode = IndicatorCode.NONE
    # Revelation bookkeeping (revealed hops only).
    revealed: bool = False
    step: int = 0
    buddy_used: bool = False

    @property
    def display_name(self) -> str:
        return self.name if self.name is not None else self.address


@dataclass
class TunnelAnnotation:
    """A detected tunnel: trigger/indicator, estimate and revelation result.

    ``ingress_index`` is the 1-based display index of the hop preceding the
    tunnel (revealed hops are numbered ``ingress_index.1``, ``.2``, ... in
    dumps).
    """

    code: IndicatorCode
    tunnel_class: TunnelClass
    ingress_index: int
    estimate: int = 0
    state: RevelationState = RevelationState.NOT_ATTEMPTED
    egress_display: str | None = None
    revealed: list[HopRecord] = field(default_factory=list)

    @property
    def difference(self) -> int:
        return abs(self.estimate - len(self.revealed))


@dataclass
class Thresholds:
    """Trigger/indicator thresholds.

    Defaults follow the calibrated operating point: FRPLA fires at >= 3,
    RTLA at >= 1, the opaque LSE-TTL band is (236, 255) exclusive, and
    u-turn values must exceed 0 (with two consecutive hops cumulating to
    >= 3 before an implicit tunnel is declared).
    """

    frpla: int = 3
    rtla: int = 1
    lse_ttl: int = 236
    uturn: int = 0


@dataclass
class ProbeAccounting:
    """Probe cost decomposition.

    Every issued probe is counted in exactly one bucket: ``original`` for
    the main trace (including echo probes for hop addresses), ``revealed``
    for revelation probing (bootstrap, mini-traces, buddy checks and echo
    probes for revealed addresses), ``failed`` for probes that got no
    answer, ``inconclusive`` for answers that could not be attributed.
    """

    original: int = 0
    revealed: int = 0
    failed: int = 0
    inconclusive: int = 0

    @property
    def total(self) -> int:
        return self.original + self.revealed + self.failed + self.inconclusive


@dataclass
class EngineConfig:
    """Probe engine configuration.

    ``starting_ttl`` defaults to 3: the first hops of a wide-area trace
    are access infrastructure that cannot open a tunnel. Simulated
    testbeds probe from TTL 1 instead (the vantage sits at the edge), so
    scenario runners pass ``starting_ttl=1`` explicitly.
    """

    starting_ttl: int = 3
    max_ttl: int = 32
    gap_limit: int = 5
    flow_id: int = 0
    brute_force: bool = False
    thresholds: Thresholds = field(default_factory=Thresholds)

    def __post_init__(self) -> None:
        if self.starting_ttl < 1:
            raise ValueError(f"starting_ttl must be >= 1: {self.starting_ttl}")
        if self.gap_limit < 1:
            raise ValueError(f"gap_limit must be >= 1: {self.gap_limit}")


@dataclass
class AnnotatedTrace:
    """A complete annotated trace toward one target."""

    target: str
    vantage: str | None = None
    hops: list[HopRecord] = field(default_factory=list)
    tunnels: list[TunnelAnnotation] = field(default_factory=list)
    accounting: ProbeAccounting = field(default_factory=ProbeAccounting)
    starting_ttl: int = 1
    thresholds: Thresholds = field(default_factory=Thresholds)

    def annotation_at(self, ingress_index: int) -> TunnelAnnotation | None:
        for ann in self.tunnels:
            if ann.ingress_index == ingress_index:
                return ann
        return None
