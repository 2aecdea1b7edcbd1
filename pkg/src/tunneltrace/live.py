"""Raw-socket IPv4 probing backend.

Exposes the same probe surface as the simulator session: ICMP echo trace
probes with a load-balancer-stable flow identifier, echo requests for
return-path measurement, and UDP probes for buddy confirmation.  Replies
are parsed from raw ICMP, including the extension objects that quote the
expired MPLS label stack (extension class 1, c-type 1; each entry is the
usual 32-bit word of 20-bit label, traffic class, bottom bit and TTL).

Raw ICMP sockets need CAP_NET_RAW (typically root).  This backend exists
to run the tracer against real networks; correctness validation happens
on the simulator backend.
"""

from __future__ import annotations

import os
import select
import socket
import struct
import time
from dataclasses import dataclass

from tunneltrace.model import LabelStackEntry

ICMP_ECHO_REPLY = 0
ICMP_DEST_UNREACH = 3
ICMP_ECHO_REQUEST = 8
ICMP_TIME_EXCEEDED = 11

# Payload bytes after the 2-byte checksum-balancing word; 24 bytes total
# keeps quoted probes comfortably inside every router's quota.
_FILLER = b"tunneltrace".ljust(22, b".")


@dataclass(frozen=True)
class LiveReply:
    """One parsed reply, shaped exactly like the simulator's replies."""

    source: str
    kind: str  # ttl-exceeded | dest-unreach | echo-reply
    ttl: int
    qttl: int | None = None
    stack: tuple[tuple[int, int], ...] = ()


def _checksum(data: bytes) -> int:
    """RFC 1071 ones'-complement checksum."""
    if len(data) % 2:
        data += b"\x00"
    total = sum(struct.unpack(f"!{len(data) // 2}H", data))
    while total >> 16:
        total = (total & 0xFFFF) + (total >> 16)
    return ~total & 0xFFFF


def _ones_complement_sub(a: int, b: int) -> int:
    """``a - b`` in ones'-complement 16-bit arithmetic."""
    result = a + (~b & 0xFFFF)
    while result >> 16:
        result = (result & 0xFFFF) + (result >> 16)
    return result & 0xFFFF


def _echo_request(ident: int, seq: int, flow_id: int) -> bytes:
    """Build an echo request whose checksum depends only on ``flow_id``.

    Load balancers hash the ICMP checksum, so keeping it constant per
    flow makes every probe of a trace follow one path.  The first two
    payload bytes are a balancing word chosen so the final checksum
    equals a fixed per-flow value regardless of the sequence number.
    """
    target_sum = 0x8000 | (flow_id & 0x7FFF)
    header = struct.pack("!BBHHH", ICMP_ECHO_REQUEST, 0, 0, ident, seq)
    base = _checksum(header + b"\x00\x00" + _FILLER)
    # checksum(packet) = ~ (sum(base fields) + balance); solve for balance.
    balance = _ones_complement_sub(~target_sum & 0xFFFF, ~base & 0xFFFF)
    packet = header + struct.pack("!H", balance) + _FILLER
    return (packet[:2] + struct.pack("!H", _checksum(packet)) + packet[4:])


def _parse_lse_extension(icmp: bytes) -> tuple[tuple[int, int], ...]:
    """Extract the quoted label stack from an ICMP error's extensions."""
    words = icmp[5] if len(icmp) > 5 else 0
    offset = 8 + (words * 4 if words else 128)
    if len(icmp) < offset + 4 or icmp[offset] >> 4 != 2:
        return ()
    position = offset + 4
    stack: list[tuple[int, int]] = []
    while position + 4 <= len(icmp):
        obj_len, obj_class, c_type = struct.unpack_from("!HBB", icmp, position)
        if obj_len < 4:
            break
        if obj_class == 1 and c_type == 1:
            for at in range(position + 4,
                            min(position + obj_len, len(icmp)) - 3, 4):
                entry = LabelStackEntry.unpack(icmp[at:at + 4])
                stack.append((entry.label, entry.ttl))
                if entry.bottom:
                    break
        position += obj_len
    return tuple(stack)


class LiveSession:
    """Probe session over raw sockets toward one target."""

    def __init__(self, target: str, timeout: float = 2.0, retries: int = 2,
                 spacing: float = 0.020, resolve_names: bool = False) -> None:
        self._target = socket.gethostbyname(target)
        self.timeout = timeout
        self.retries = retries
        self.spacing = spacing
        self.resolve_names = resolve_names
        self.probes_sent = 0
        self._ident = os.getpid() & 0xFFFF
        self._seq = 0
        self._last_send = 0.0
        self._rtt: dict[str, float] = {}
        self._icmp = socket.socket(socket.AF_INET, socket.SOCK_RAW,
                                   socket.IPPROTO_ICMP)
        self._icmp.setblocking(False)
        probe = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        try:
            probe.connect((self._target, 33434))
            self._vantage = probe.getsockname()[0]
        except OSError:
            self._vantage = "0.0.0.0"
        finally:
            probe.close()

    @property
    def target(self) -> str:
        return self._target

    @property
    def vantage(self) -> str:
        return self._vantage

    def close(self) -> None:
        self._icmp.close()

    # -- sending --------------------------------------------------------------

    def _pace(self) -> None:
        wait = self._last_send + self.spacing - time.monotonic()
        if wait > 0:
            time.sleep(wait)
        self._last_send = time.monotonic()

    def _send_echo(self, dst: str, ttl: int, flow_id: int) -> tuple[int, float]:
        self._pace()
        self._seq = (self._seq + 1) & 0xFFFF
        packet = _echo_request(self._ident, self._seq, flow_id)
        self._icmp.setsockopt(socket.IPPROTO_IP, socket.IP_TTL, ttl)
        self._icmp.sendto(packet, (dst, 0))
        self.probes_sent += 1
        return self._seq, time.monotonic()

    # -- receiving ------------------------------------------------------------

    def _match_echo(self, datagram: bytes, seq: int) -> LiveReply | None:
        """Parse one raw datagram, returning a reply to our probe ``seq``."""
        header_len = (datagram[0] & 0x0F) * 4
        outer_ttl = datagram[8]
        source = socket.inet_ntoa(datagram[12:16])
        icmp = datagram[header_len:]
        if len(icmp) < 8:
            return None
        icmp_type = icmp[0]
        if icmp_type == ICMP_ECHO_REPLY:
            ident, got_seq = struct.unpack_from("!HH", icmp, 4)
            if ident == self._ident and got_seq == seq:
                return LiveReply(source, "echo-reply", outer_ttl)
            return None
        if icmp_type not in (ICMP_TIME_EXCEEDED, ICMP_DEST_UNREACH):
            return None
        inner = icmp[8:]
        if len(inner) < 20 or inner[9] != socket.IPPROTO_ICMP:
            return None
        inner_icmp = inner[(inner[0] & 0x0F) * 4:]
        if len(inner_icmp) < 8:
            return None
        ident, got_seq = struct.unpack_from("!HH", inner_icmp, 4)
        if ident != self._ident or got_seq != seq:
            return None
        kind = ("ttl-exceeded" if icmp_type == ICMP_TIME_EXCEEDED
                else "dest-unreach")
        return LiveReply(source, kind, outer_ttl, qttl=inner[8],
                         stack=_parse_lse_extension(icmp))

    def _wait(self, matcher, sent_at: float) -> LiveReply | None:
        deadline = sent_at + self.timeout
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                return None
            readable, _, _ = select.select([self._icmp], [], [], remaining)
            if not readable:
                return None
            try:
                datagram = self._icmp.recv(4096)
            except OSError:
                continue
            reply = matcher(datagram)
            if reply is not None:
                self._rtt[reply.source] = round(
                    (time.monotonic() - sent_at) * 1000.0, 3)
                return reply

    # -- the session protocol --------------------------------------------------

    def trace_probe(self, ttl: int, target: str | None = None,
                    flow_id: int = 0) -> LiveReply | None:
        dst = target if target is not None else self._target
        for _ in range(1 + self.retries):
            seq, sent_at = self._send_echo(dst, ttl, flow_id)
            reply = self._wait(lambda d: self._match_echo(d, seq), sent_at)
            if reply is not None:
                return reply
        return None

    def echo(self, target: str) -> LiveReply | None:
        for _ in range(1 + self.retries):
            seq, sent_at = self._send_echo(target, 64, 0)
            reply = self._wait(lambda d: self._match_echo(d, seq), sent_at)
            if reply is not None and reply.kind == "echo-reply":
                return reply
        return None

    def udp(self, target: str, ttl: int = 64) -> LiveReply | None:
        """High-port UDP probe; the goal is a port-unreachable reply."""
        self._pace()
        out = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        out.setsockopt(socket.IPPROTO_IP, socket.IP_TTL, ttl)
        try:
            out.bind((self._vantage, 0))
            src_port = out.getsockname()[1]
            dst_port = 33434 + (self._seq % 64)
            out.sendto(b"tunneltrace", (target, dst_port))
        except OSError:
            out.close()
            return None
        out.close()
        self.probes_sent += 1
        sent_at = time.monotonic()

        def matcher(datagram: bytes) -> LiveReply | None:
            header_len = (datagram[0] & 0x0F) * 4
            icmp = datagram[header_len:]
            if len(icmp) < 8 or icmp[0] not in (ICMP_DEST_UNREACH,
                                                ICMP_TIME_EXCEEDED):
                return None
            inner = icmp[8:]
            if len(inner) < 20 or inner[9] != socket.IPPROTO_UDP:
                return None
            ports = inner[(inner[0] & 0x0F) * 4:]
            if len(ports) < 4:
                return None
            sport, dport = struct.unpack_from("!HH", ports, 0)
            if sport != src_port or dport != dst_port:
                return None
            kind = ("dest-unreach" if icmp[0] == ICMP_DEST_UNREACH
                    else "ttl-exceeded")
            return LiveReply(socket.inet_ntoa(datagram[12:16]), kind,
                             datagram[8], qttl=inner[8])

        return self._wait(matcher, sent_at)

    def rtt(self, address: str, ttl: int) -> float:
        return self._rtt.get(str(address), 0.0)

    def name_of(self, address: str) -> str | None:
        if not self.resolve_names:
            return None
        try:
            return socket.gethostbyaddr(str(address))[0]
        except OSError:
            return None
