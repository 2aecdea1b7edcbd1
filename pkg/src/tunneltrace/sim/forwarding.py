"""Deterministic packet walker for scenario topologies.

The walker models exactly the parts of a label switched core that matter to
TTL-based measurements:

- per-OS initial TTLs and ICMP quoting (including the IOS habit of quoting
  one less than the received TTL in destination unreachable messages),
- label pushes with either TTL copying (``propagate_ttl``) or a fixed 255,
- penultimate and ultimate hop popping with the per-OS synchronisation of
  the IP TTL against the label TTL (min on IOS 12.4/vMX, label-wins on
  IOS 15.2 with propagation, decrement-with-floor on 15.2 without, and the
  Olive variants),
- IOS relaunching of TTL exceeded replies along the remainder of the LSP,
  and the Junos equivalent when RFC 4950 style tunneling is enabled,
- L3VPN double label stacks with blind forwarding on Junos egresses,
- deterministic label allocation (pins override a per-router counter).

Every reply is itself a packet walked back to the vantage point, so return
path asymmetries and label shortcuts emerge naturally instead of being
scripted per scenario.
"""

from __future__ import annotations

import ipaddress
import zlib
from collections import deque
from dataclasses import dataclass, field, replace
from ipaddress import IPv4Address, IPv4Network

from tunneltrace.sim.model import (
    BindingMode,
    Popping,
    Router,
    RouterOS,
    ScenarioError,
    Topology,
    Tunnel,
)

TTL_EXCEEDED = "ttl-exceeded"
DEST_UNREACH = "dest-unreach"
ECHO_REPLY = "echo-reply"

_WALK_LIMIT = 128
_RESOLVE_LIMIT = 4

_CISCO_LABEL_BASE = 16
_JUNOS_LABEL_BASE = 299776
_JUNOS_LABEL_STEP = 16


def _as_addr(value: IPv4Address | str) -> IPv4Address:
    return value if isinstance(value, IPv4Address) else ipaddress.IPv4Address(value)


@dataclass
class LSE:
    """A label stack entry carried by a simulated packet."""

    label: int
    ttl: int


@dataclass
class SimReply:
    """What the vantage point receives in answer to one probe."""

    source: IPv4Address
    kind: str
    ttl: int
    qttl: int | None = None
    stack: tuple[tuple[int, int], ...] = ()


@dataclass
class _Packet:
    dst: IPv4Address
    ttl: int
    stack: list[LSE] = field(default_factory=list)
    is_echo: bool = False
    vrf: bool = False


@dataclass
class _Response:
    """A locally generated reply, before it is routed back."""

    router: Router
    source: IPv4Address
    kind: str
    qttl: int | None
    stack: tuple[tuple[int, int], ...]
    vrf: bool = False
    relaunch: "_Relaunch | None" = None


@dataclass
class _Relaunch:
    """State for replies re-injected into the LSP by the expiring router."""

    packet: _Packet
    router: str
    in_addr: IPv4Address


@dataclass
class _LfibEntry:
    action: str  # "swap" | "swap0" | "pop-php" | "pop-untagged"
    out_label: int | None
    next_router: str
    in_addr: IPv4Address


@dataclass
class _RouteInfo:
    next_router: str
    in_addr: IPv4Address
    fec: IPv4Network | None
    pushes: list[tuple[int, str]] = field(default_factory=list)  # (label, mode)


class Simulation:
    """Compiled forwarding state for one :class:`Topology`."""

    def __init__(self, topology: Topology) -> None:
        topology.validate()
        self.topology = topology
        self._owner: dict[IPv4Address, str] = {}
        self._subnets: dict[IPv4Network, list[str]] = {}
        self._neighbors: dict[str, list[tuple[str, IPv4Address, IPv4Network]]] = {}
        self._compile_links()
        self._dist = self._all_pairs_distances()
        self._igp: list[IPv4Network] = self._collect_igp()
        self._labels: dict[tuple[str, object], int] = {}
        self._counters: dict[str, int] = {}
        self._tunnel_paths: list[list[str]] = [
            self._shortest_path(t.head, t.tail) for t in topology.tunnels
        ]
        self._assign_labels()
        self._lfib: dict[str, dict[int, _LfibEntry]] = {}
        self._build_lfibs()
        self._route_cache: dict[tuple[str, IPv4Address, bool], _RouteInfo | None] = {}

    # ------------------------------------------------------------------
    # compilation

    def _compile_links(self) -> None:
        for router in self.topology.routers.values():
            for iface in router.interfaces:
                self._owner[iface.ip] = router.name
                self._subnets.setdefault(iface.network, []).append(router.name)
            for lo in router.loopbacks:
                self._owner.setdefault(lo, router.name)
        for router in self.topology.routers.values():
            peers: list[tuple[str, IPv4Address, IPv4Network]] = []
            for iface in router.interfaces:
                for other_name in self._subnets.get(iface.network, []):
                    if other_name == router.name:
                        continue
                    other = self.topology.routers[other_name]
                    addr = other.interface_on(iface.network)
                    if addr is not None:
                        peers.append((other_name, addr, iface.network))
            self._neighbors[router.name] = sorted(set(peers), key=lambda p: (p[0], int(p[1])))

    def _all_pairs_distances(self) -> dict[tuple[str, str], int]:
        dist: dict[tuple[str, str], int] = {}
        for start in self.topology.routers:
            dist[(start, start)] = 0
            queue = deque([start])
            while queue:
                here = queue.popleft()
                for peer, _, _ in self._neighbors[here]:
                    if (start, peer) not in dist:
                        dist[(start, peer)] = dist[(start, here)] + 1
                        queue.append(peer)
        return dist

    def _collect_igp(self) -> list[IPv4Network]:
        prefixes = list(self.topology.igp_prefixes)
        for router in self.topology.routers.values():
            if not router.igp:
                continue
            for lo in router.loopbacks:
                host = ipaddress.IPv4Network(f"{lo}/32")
                if host not in prefixes:
                    prefixes.append(host)
        return sorted(set(prefixes), key=lambda n: (int(n.network_address), n.prefixlen))

    def _prefix_owners(self, prefix: IPv4Network) -> list[str]:
        owners = []
        for router in self.topology.routers.values():
            if any(i.ip in prefix for i in router.interfaces) or any(
                lo in prefix for lo in router.loopbacks
            ):
                owners.append(router.name)
        return owners

    def _shortest_path(self, start: str, goal: str) -> list[str]:
        previous: dict[str, str] = {}
        queue = deque([start])
        seen = {start}
        while queue:
            here = queue.popleft()
            if here == goal:
                break
            for peer, _, _ in self._neighbors[here]:
                if peer not in seen:
                    seen.add(peer)
                    previous[peer] = here
                    queue.append(peer)
        if goal not in seen:
            raise ScenarioError(f"no path from {start} to {goal}")
        path = [goal]
        while path[-1] != start:
            path.append(previous[path[-1]])
        path.reverse()
        return path

    def _bfs_next(self, start: str, prefix: IPv4Network) -> tuple[str, IPv4Address] | None:
        owners = self._prefix_owners(prefix)
        if not owners:
            return None
        best: tuple[int, str, IPv4Address] | None = None
        for peer, addr, _ in self._neighbors[start]:
            reach = [self._dist[(peer, o)] for o in owners if (peer, o) in self._dist]
            if not reach:
                continue
            score = min(reach)
            if best is None or (score, peer) < (best[0], best[1]):
                best = (score, peer, addr)
        if best is None:
            return None
        here = [self._dist[(start, o)] for o in owners if (start, o) in self._dist]
        if here and min(here) <= best[0]:
            return None  # we are as close as any neighbor; prefix is local-ish
        return best[1], best[2]

    # -- label allocation ------------------------------------------------

    def _fresh_label(self, router: Router) -> int:
        if router.os.is_juniper:
            base, step = _JUNOS_LABEL_BASE, _JUNOS_LABEL_STEP
        else:
            base, step = _CISCO_LABEL_BASE, 1
        pinned = {
            label for (name, _), label in self.topology.label_pins.items()
            if name == router.name
        }
        while True:
            count = self._counters.get(router.name, 0)
            self._counters[router.name] = count + 1
            label = base + step * count
            if label not in pinned:
                return label

    def _binds(self, router: Router, fec: IPv4Network) -> bool:
        if not router.ldp:
            return False
        if router.binding == BindingMode.NONE:
            return False
        if router.binding == BindingMode.ALL_IGP:
            return fec in self._igp
        if router.binding == BindingMode.LOOPBACK_ONLY:
            return fec.prefixlen == 32 and any(
                fec.network_address in r.loopbacks for r in self.topology.routers.values()
            )
        if router.binding == BindingMode.HOST_ROUTES:
            return fec.prefixlen == 32 and fec in self._igp
        if router.binding == BindingMode.SCOPED:
            return fec in self.topology.scoped_fecs
        return False

    def _owns_fec(self, router: Router, fec: IPv4Network) -> bool:
        return any(i.ip in fec for i in router.interfaces) or any(
            lo in fec for lo in router.loopbacks
        )

    def _assign_labels(self) -> None:
        # Deterministic: walk routers and FECs in sorted order, honoring pins.
        for name in sorted(self.topology.routers):
            router = self.topology.routers[name]
            for fec in self._igp:
                if not self._binds(router, fec) or self._owns_fec(router, fec):
                    continue
                pin = self.topology.label_pins.get((name, fec))
                self._labels[(name, fec)] = pin if pin is not None else self._fresh_label(router)
            for index, tunnel in enumerate(self.topology.tunnels):
                path = self._tunnel_paths[index]
                if name in path[1:-1] or (name == path[-1] and tunnel.popping == Popping.UHP):
                    key = (name, ("tunnel", index))
                    self._labels[key] = self._fresh_label(router)

    def advert(self, router_name: str, fec: IPv4Network) -> object:
        """What ``router_name`` advertises for ``fec``.

        Returns ``"implicit"`` or ``"explicit"`` null from the FEC owner,
        an integer label from a transit binding, or ``None``.
        """
        router = self.topology.routers[router_name]
        if not router.ldp or not self._binds(router, fec):
            return None
        if self._owns_fec(router, fec):
            uhp = router.popping == Popping.UHP or fec in router.uhp_acl
            return "explicit" if uhp else "implicit"
        return self._labels.get((router_name, fec))

    def _build_lfibs(self) -> None:
        for name in self.topology.routers:
            self._lfib[name] = {}
        for (name, key), label in self._labels.items():
            if isinstance(key, tuple):  # tunnel label
                _, index = key
                path = self._tunnel_paths[index]
                tunnel = self.topology.tunnels[index]
                pos = path.index(name)
                if pos == len(path) - 1:
                    continue  # tail receives explicit null, handled generically
                nxt = path[pos + 1]
                in_addr = self._link_addr(name, nxt)
                if nxt == path[-1]:
                    if tunnel.popping == Popping.UHP:
                        entry = _LfibEntry("swap0", 0, nxt, in_addr)
                    else:
                        entry = _LfibEntry("pop-php", None, nxt, in_addr)
                elif path[pos + 1] == path[-1]:
                    entry = _LfibEntry("pop-php", None, nxt, in_addr)
                else:
                    out = self._labels[(nxt, key)]
                    entry = _LfibEntry("swap", out, nxt, in_addr)
                self._lfib[name][label] = entry
                continue
            fec = key
            hop = self._bfs_next(name, fec)
            if hop is None:
                continue
            nxt, in_addr = hop
            downstream = self.advert(nxt, fec)
            if isinstance(downstream, int):
                entry = _LfibEntry("swap", downstream, nxt, in_addr)
            elif downstream == "explicit":
                entry = _LfibEntry("swap0", 0, nxt, in_addr)
            elif downstream == "implicit":
                entry = _LfibEntry("pop-php", None, nxt, in_addr)
            else:
                entry = _LfibEntry("pop-untagged", None, nxt, in_addr)
            self._lfib[name][label] = entry

    def _link_addr(self, here: str, there: str) -> IPv4Address:
        for peer, addr, _ in self._neighbors[here]:
            if peer == there:
                return addr
        raise ScenarioError(f"{here} and {there} are not adjacent")

    # ------------------------------------------------------------------
    # routing

    def _tables(self, router: Router, vrf: bool) -> list[tuple[IPv4Network, int, str, object]]:
        """Candidate routes as (prefix, preference, kind, data)."""
        rows: list[tuple[IPv4Network, int, str, object]] = []
        vrf_set = set(router.vrf_interfaces)
        has_vrf = bool(vrf_set)
        vpn_here = [r for r in self.topology.vpn_routes if r.router == router.name]
        if vrf and has_vrf:
            for iface in router.interfaces:
                if iface.ip in vrf_set:
                    rows.append((iface.network, 0, "connected", None))
            for route in vpn_here:
                if route.push == "plain":
                    rows.append((route.prefix, 1, "via", route.via_addr))
                else:
                    rows.append((route.prefix, 3, "vpn", route))
            return rows
        for iface in router.interfaces:
            if iface.ip not in vrf_set:
                rows.append((iface.network, 0, "connected", None))
        for static in router.statics:
            rows.append((static.prefix, 1, "via", static.via))
        if router.igp:
            for prefix in self._igp:
                rows.append((prefix, 2, "igp", None))
        for bgp in router.bgp:
            rows.append((bgp.prefix, 3, "bgp", bgp.nexthop))
        if not has_vrf:
            for route in vpn_here:
                if route.push == "plain":
                    rows.append((route.prefix, 1, "via", route.via_addr))
                else:
                    rows.append((route.prefix, 3, "vpn", route))
        if router.default_via is not None:
            rows.append((ipaddress.IPv4Network("0.0.0.0/0"), 9, "via", router.default_via))
        return rows

    def _tunnel_for(self, router: Router, fec: IPv4Network | None,
                    bgp_nexthop: IPv4Address | None) -> int | None:
        """Index of a tunnel at ``router`` covering the destination, if any."""
        for index, tunnel in enumerate(self.topology.tunnels):
            if tunnel.head != router.name:
                continue
            tail = self.topology.routers[tunnel.tail]
            if bgp_nexthop is not None and bgp_nexthop in tail.loopbacks:
                return index
            if fec is None:
                continue
            owners = self._prefix_owners(fec)
            if not owners:
                continue
            through = self._dist.get((router.name, tunnel.tail))
            if through is None:
                continue
            direct = min(self._dist[(router.name, o)] for o in owners)
            via_tail = through + min(self._dist[(tunnel.tail, o)] for o in owners)
            if direct == via_tail and direct > 0:
                return index
        return None

    def _tunnel_pushes(self, index: int) -> tuple[list[tuple[int, str]], str, IPv4Address]:
        path = self._tunnel_paths[index]
        tunnel = self.topology.tunnels[index]
        nxt = path[1]
        in_addr = self._link_addr(path[0], nxt)
        if nxt == path[-1]:  # one hop tunnel: head is the penultimate router
            if tunnel.popping == Popping.UHP:
                return [(0, "std")], nxt, in_addr
            return [], nxt, in_addr
        label = self._labels[(nxt, ("tunnel", index))]
        return [(label, "std")], nxt, in_addr

    def _ldp_pushes(self, router: Router, fec: IPv4Network | None,
                    next_router: str) -> list[tuple[int, str]]:
        if fec is None or not router.ldp:
            return []
        if self.topology.scoped_heads and router.binding == BindingMode.SCOPED:
            if router.name not in self.topology.scoped_heads:
                return []
        if not self._binds(router, fec) or self._owns_fec(router, fec):
            return []
        downstream = self.advert(next_router, fec)
        if isinstance(downstream, int):
            return [(downstream, "std")]
        if downstream == "explicit":
            return [(0, "std")]
        return []

    def route(self, router: Router, dst: IPv4Address,
              vrf: bool = False) -> _RouteInfo | None:
        key = (router.name, dst, vrf)
        if key in self._route_cache:
            return self._route_cache[key]
        info = self._route_uncached(router, dst, vrf)
        self._route_cache[key] = info
        return info

    def _route_uncached(self, router: Router, dst: IPv4Address, vrf: bool,
                        depth: int = 0) -> _RouteInfo | None:
        if depth > _RESOLVE_LIMIT:
            return None
        rows = [row for row in self._tables(router, vrf) if dst in row[0]]
        if not rows:
            return None
        rows.sort(key=lambda row: (-row[0].prefixlen, row[1]))
        prefix, _, kind, data = rows[0]

        if kind == "connected":
            owner = self._owner.get(dst)
            if owner is None or owner == router.name:
                # Forward onto the subnet toward its other endpoint if any;
                # used by blind VPN forwarding toward local addresses.
                others = [n for n in self._subnets.get(prefix, []) if n != router.name]
                if not others:
                    return None
                nxt = sorted(others)[0]
                return _RouteInfo(nxt, self._link_addr(router.name, nxt), prefix)
            if owner not in (p for p, _, _ in self._neighbors[router.name]):
                hop = self._bfs_next(router.name, prefix)
                if hop is None:
                    return None
                return _RouteInfo(hop[0], hop[1], prefix)
            if self._is_iface(dst, owner):
                return _RouteInfo(owner, dst, prefix)
            return _RouteInfo(owner, self._link_addr(router.name, owner), prefix)

        if kind == "via":
            assert isinstance(data, IPv4Address)
            inner = self._route_uncached(router, data, vrf, depth + 1)
            if inner is None:
                return None
            pushes = list(inner.pushes) or self._ldp_pushes(router, inner.fec, inner.next_router)
            return _RouteInfo(inner.next_router, inner.in_addr, inner.fec, pushes)

        if kind == "igp":
            tunnel = self._tunnel_for(router, prefix, None)
            if tunnel is not None:
                pushes, nxt, in_addr = self._tunnel_pushes(tunnel)
                return _RouteInfo(nxt, in_addr, prefix, pushes)
            hop = self._bfs_next(router.name, prefix)
            if hop is None:
                return None
            pushes = self._ldp_pushes(router, prefix, hop[0])
            return _RouteInfo(hop[0], hop[1], prefix, pushes)

        if kind == "bgp":
            assert isinstance(data, IPv4Address)
            tunnel = self._tunnel_for(router, None, data)
            if tunnel is not None:
                pushes, nxt, in_addr = self._tunnel_pushes(tunnel)
                return _RouteInfo(nxt, in_addr, None, pushes)
            inner = self._route_uncached(router, data, False, depth + 1)
            if inner is None:
                return None
            pushes = list(inner.pushes) or self._ldp_pushes(router, inner.fec, inner.next_router)
            return _RouteInfo(inner.next_router, inner.in_addr, inner.fec, pushes)

        if kind == "vpn":
            route = data
            remote = self.topology.routers[route.remote_pe]
            inner = self._route_uncached(router, remote.loopback, False, depth + 1)
            if inner is None:
                return None
            transport = list(inner.pushes) or self._ldp_pushes(
                router, inner.fec, inner.next_router
            )
            pushes: list[tuple[int, str]] = []
            if route.push == "double":
                if remote.vpn_label is None:
                    raise ScenarioError(f"{remote.name} has no vpn label")
                pushes.append((remote.vpn_label, "vpn"))
            # transport label goes on top of the stack
            pushes.extend((lbl, "vpn-transport") for lbl, _ in transport)
            return _RouteInfo(inner.next_router, inner.in_addr, inner.fec, pushes)

        return None

    def _is_iface(self, addr: IPv4Address, router_name: str) -> bool:
        return any(i.ip == addr for i in self.topology.routers[router_name].interfaces)

    # ------------------------------------------------------------------
    # packet walking

    def probe(self, target: IPv4Address, ttl: int, *, echo: bool = False) -> SimReply | None:
        """Send one probe from the vantage point, return the reply if any."""
        vantage_router = self._owner.get(self.topology.vantage)
        if vantage_router is None:
            raise ScenarioError("vantage address is not owned by any router")
        packet = _Packet(dst=target, ttl=ttl, is_echo=echo)
        response = self._walk(packet, vantage_router, None, origin=True)
        if response is None:
            return None
        reply = self._deliver_response(response)
        if reply is not None and self.topology.noise is not None:
            reply = self._apply_noise(reply)
        return reply

    def echo(self, target: IPv4Address) -> SimReply | None:
        return self.probe(target, 255, echo=True)

    def _apply_noise(self, reply: SimReply) -> SimReply:
        noise = self.topology.noise
        digest = zlib.crc32(f"{noise.seed}/{reply.source}".encode())
        if (digest % 1000) / 1000.0 >= noise.fraction:
            return reply
        delta = 1 + (digest // 7) % noise.max_delta
        return replace(reply, ttl=max(1, reply.ttl - delta))

    def _walk(self, packet: _Packet, at: str, in_addr: IPv4Address | None,
              *, origin: bool = False) -> _Response | None:
        """Walk ``packet`` until it is answered, delivered or dropped.

        Returns a :class:`_Response` when some router generates a reply
        that must still be routed back, or ``None`` if the packet is
        silently dropped or arrives at the vantage point (callers that
        care about vantage arrival use :meth:`_walk_reply`).
        """
        router = self.topology.routers[at]
        for _ in range(_WALK_LIMIT):
            if packet.stack:
                result = self._label_step(packet, router, in_addr)
            else:
                result = self._ip_step(packet, router, in_addr, origin=origin)
            origin = False
            if result is None:
                return None
            if isinstance(result, _Response):
                return result
            name, in_addr = result
            router = self.topology.routers[name]
        return None

    # -- plain IP plane ----------------------------------------------------

    def _ip_step(self, packet: _Packet, router: Router, in_addr: IPv4Address | None,
                 *, origin: bool = False):
        if in_addr is not None and in_addr in router.vrf_interfaces:
            packet.vrf = True  # before delivery/expiry: replies stay in the VRF
        if not origin:
            if router.owns(packet.dst):
                return self._respond_local(router, packet, in_addr)
            packet.ttl -= 1
            if packet.ttl <= 0:
                return self._expire(router, packet, in_addr,
                                    qttl=packet.ttl + 1, stack=())
        info = self.route(router, packet.dst, packet.vrf and bool(router.vrf_interfaces))
        if info is None:
            return None
        self._apply_pushes(router, packet, info)
        return info.next_router, info.in_addr

    def _apply_pushes(self, router: Router, packet: _Packet, info: _RouteInfo) -> None:
        if not info.pushes:
            return
        for label, mode in info.pushes:
            if mode == "vpn":
                ttl = 255
            elif mode == "vpn-transport":
                if router.os.is_cisco and packet.vrf:
                    ttl = packet.ttl
                else:
                    ttl = packet.ttl if router.propagate_ttl else 255
            else:
                ttl = packet.ttl if router.propagate_ttl else 255
            packet.stack.append(LSE(label, ttl))
        if any(mode in ("vpn", "vpn-transport") for _, mode in info.pushes):
            packet.vrf = False  # riding the core until the VPN label pops

    # -- label plane --------------------------------------------------------

    def _label_step(self, packet: _Packet, router: Router, in_addr: IPv4Address | None):
        top = packet.stack[-1]
        arrival_ip = packet.ttl
        arrival_stack = tuple((e.label, e.ttl) for e in reversed(packet.stack))

        if top.label == 0:
            return self._pop_ultimate(packet, router, in_addr, arrival_ip, arrival_stack)
        if router.vpn_label is not None and top.label == router.vpn_label:
            return self._pop_vpn(packet, router, in_addr, arrival_ip, arrival_stack)

        entry = self._lfib.get(router.name, {}).get(top.label)
        if entry is None:
            return None  # unknown label: drop

        if entry.action in ("swap", "swap0"):
            top.ttl -= 1
            if top.ttl <= 0:
                return self._label_expire(packet, router, in_addr, arrival_ip,
                                          arrival_stack, entry)
            top.label = entry.out_label if entry.action == "swap" else 0
            return entry.next_router, entry.in_addr

        if entry.action == "pop-php":
            lse_after = top.ttl - 1
            if lse_after <= 0:
                return self._pop_expire(packet, router, in_addr, arrival_ip, arrival_stack)
            packet.stack.pop()
            if packet.stack:
                inner = packet.stack[-1]
                inner.ttl = min(inner.ttl, lse_after)
            elif router.os == RouterOS.OLIVE:
                packet.ttl = lse_after if router.propagate_ttl else packet.ttl
            else:
                packet.ttl = min(packet.ttl, lse_after)
            return entry.next_router, entry.in_addr

        if entry.action == "pop-untagged":
            lse_after = top.ttl - 1
            if lse_after <= 0:
                return self._pop_expire(packet, router, in_addr, arrival_ip, arrival_stack)
            packet.stack.pop()
            packet.ttl = min(packet.ttl, lse_after)
            return self._continue_after_pop(packet, router, in_addr, arrival_ip,
                                            arrival_stack, decrement=True)
        return None

    def _pop_ultimate(self, packet: _Packet, router: Router, in_addr, arrival_ip,
                      arrival_stack):
        top = packet.stack[-1]
        lse_after = top.ttl - 1
        if lse_after <= 0:
            return self._pop_expire(packet, router, in_addr, arrival_ip, arrival_stack)
        packet.stack.pop()
        if packet.stack:
            inner = packet.stack[-1]
            if router.vpn_label is not None and inner.label == router.vpn_label:
                # A service label riding under explicit null keeps its own
                # TTL; quotes must show the stack exactly as it arrived here.
                return self._pop_vpn(packet, router, in_addr, arrival_ip,
                                     arrival_stack)
            inner.ttl = min(inner.ttl, lse_after)
            return router.name, in_addr  # keep processing remaining labels here
        if router.os == RouterOS.CISCO124:
            packet.ttl = min(packet.ttl, lse_after)
            return self._continue_after_pop(packet, router, in_addr, arrival_ip,
                                            arrival_stack, decrement=False)
        if router.os == RouterOS.CISCO152:
            if router.propagate_ttl:
                packet.ttl = lse_after
            else:
                packet.ttl = max(packet.ttl - 1, 1)
            return self._continue_after_pop(packet, router, in_addr, arrival_ip,
                                            arrival_stack, decrement=False)
        # Junos family: sync then take the normal IP path including decrement.
        packet.ttl = min(packet.ttl, lse_after)
        return self._continue_after_pop(packet, router, in_addr, arrival_ip,
                                        arrival_stack, decrement=True)

    def _pop_vpn(self, packet: _Packet, router: Router, in_addr, arrival_ip,
                 arrival_stack):
        packet.vrf = True
        top = packet.stack.pop()
        after = top.ttl - 1
        if after <= 0:
            packet.stack.append(top)
            return self._pop_expire(packet, router, in_addr, arrival_ip, arrival_stack)
        packet.ttl = min(packet.ttl, after)
        if router.os.is_juniper:
            # Per next-hop labels: hand the packet straight to the customer
            # side without looking at local addresses or spending a TTL.
            info = self.route(router, packet.dst, True)
            if info is None:
                return None
            self._apply_pushes(router, packet, info)
            return info.next_router, info.in_addr
        return self._continue_after_pop(packet, router, in_addr, arrival_ip,
                                        arrival_stack, decrement=True)

    def _continue_after_pop(self, packet: _Packet, router: Router, in_addr,
                            arrival_ip, arrival_stack, *, decrement: bool):
        quote_stack = arrival_stack if router.os.is_cisco else ()
        if router.owns(packet.dst) or (
            packet.vrf and packet.dst in router.vrf_interfaces
        ):
            return self._respond_local(
                router, packet, in_addr,
                qttl_override=min(arrival_ip, arrival_stack[0][1]) if arrival_stack else arrival_ip,
                stack_override=quote_stack,
            )
        if decrement:
            packet.ttl -= 1
            if packet.ttl <= 0:
                qttl = min(arrival_ip, arrival_stack[0][1]) if arrival_stack else arrival_ip
                return self._expire(router, packet, in_addr, qttl=qttl, stack=quote_stack)
        info = self.route(router, packet.dst, packet.vrf and bool(router.vrf_interfaces))
        if info is None:
            return None
        self._apply_pushes(router, packet, info)
        return info.next_router, info.in_addr

    # -- responses -----------------------------------------------------------

    def _source_for(self, router: Router, packet: _Packet,
                    in_addr: IPv4Address | None) -> IPv4Address:
        if packet.vrf and router.vrf_interfaces:
            return router.vrf_interfaces[0]
        if in_addr is not None:
            return in_addr
        return router.interfaces[0].ip if router.interfaces else router.loopback

    def _respond_local(self, router: Router, packet: _Packet,
                       in_addr: IPv4Address | None, qttl_override: int | None = None,
                       stack_override: tuple = ()):  # delivery
        if packet.is_echo:
            return _Response(router, packet.dst, ECHO_REPLY, None, (), packet.vrf)
        qttl = qttl_override if qttl_override is not None else packet.ttl
        if router.os.is_cisco:
            qttl = max(qttl - 1, 1)
        stack = self._hide_null(router, stack_override)
        return _Response(router, self._source_for(router, packet, in_addr),
                         DEST_UNREACH, qttl, stack, packet.vrf)

    def _expire(self, router: Router, packet: _Packet, in_addr: IPv4Address | None,
                qttl: int, stack: tuple):
        return _Response(router, self._source_for(router, packet, in_addr),
                         TTL_EXCEEDED, qttl, self._hide_null(router, stack), packet.vrf)

    def _label_expire(self, packet: _Packet, router: Router, in_addr, arrival_ip,
                      arrival_stack, entry: _LfibEntry):
        """The label TTL hit zero while swapping."""
        if router.os.is_cisco:
            qttl = arrival_ip
        else:
            qttl = min(arrival_ip, arrival_stack[0][1])
        response = _Response(router, self._source_for(router, packet, in_addr),
                             TTL_EXCEEDED, qttl, self._hide_null(router, arrival_stack),
                             packet.vrf)
        relaunch_ttl = 0
        if router.os.is_cisco:
            relaunch_ttl = 255
        elif router.icmp_tunneling:
            relaunch_ttl = 254
        if relaunch_ttl:
            out = entry.out_label if entry.action == "swap" else 0
            lse_ttl = relaunch_ttl if router.propagate_ttl else 255
            reply_packet = _Packet(dst=self.topology.vantage, ttl=relaunch_ttl,
                                   stack=[LSE(out, lse_ttl)])
            response.relaunch = _Relaunch(reply_packet, entry.next_router, entry.in_addr)
        return response

    def _pop_expire(self, packet: _Packet, router: Router, in_addr, arrival_ip,
                    arrival_stack):
        qttl = min(arrival_ip, arrival_stack[0][1])
        return _Response(router, self._source_for(router, packet, in_addr),
                         TTL_EXCEEDED, qttl, self._hide_null(router, arrival_stack),
                         packet.vrf)

    def _hide_null(self, router: Router, stack: tuple) -> tuple:
        if stack and router.os == RouterOS.CISCO152 and stack[0][0] == 0:
            return tuple(stack[1:])
        return stack

    # -- reply construction and return walk -----------------------------------

    def _initial_ttl(self, router: Router, kind: str) -> int:
        if router.os.is_cisco:
            return 255
        if router.os.is_juniper:
            return 64 if kind == ECHO_REPLY else 255
        return 64

    def _deliver_response(self, response: _Response) -> SimReply | None:
        if response.relaunch is not None:
            packet = response.relaunch.packet
            arrival = self._walk_reply(packet, response.relaunch.router,
                                       response.relaunch.in_addr)
        else:
            arrival = self._send_reply(response)
        if arrival is None:
            return None
        return SimReply(source=response.source, kind=response.kind, ttl=arrival,
                        qttl=response.qttl, stack=response.stack)

    def _send_reply(self, response: _Response) -> int | None:
        router = response.router
        ttl = self._initial_ttl(router, response.kind)
        packet = _Packet(dst=self.topology.vantage, ttl=ttl)
        vrf_reply = response.vrf and bool(router.vrf_interfaces)
        packet.vrf = vrf_reply
        info = self.route(router, packet.dst, vrf_reply)
        if info is None:
            return None
        if info.pushes:
            labels = []
            for label, mode in info.pushes:
                if mode == "vpn":
                    lse_ttl = 255
                elif router.os == RouterOS.OLIVE:
                    lse_ttl = 255
                elif router.propagate_ttl and mode == "std":
                    lse_ttl = packet.ttl
                else:
                    lse_ttl = 255
                labels.append(LSE(label, lse_ttl))
            if router.os == RouterOS.OLIVE:
                packet.ttl -= 1  # Olive spends one hop when it labels its reply
            packet.stack = labels
        return self._walk_reply(packet, info.next_router, info.in_addr)

    def _walk_reply(self, packet: _Packet, at: str, in_addr: IPv4Address | None) -> int | None:
        """Walk a reply toward the vantage point; return its arrival TTL."""
        router = self.topology.routers[at]
        for _ in range(_WALK_LIMIT):
            if not packet.stack and router.owns(packet.dst):
                return packet.ttl
            if packet.stack:
                result = self._label_step(packet, router, in_addr)
            else:
                result = self._ip_step(packet, router, in_addr)
            if result is None or isinstance(result, _Response):
                return None  # replies that die never reach the vantage point
            nxt, in_addr = result
            router = self.topology.routers[nxt]
        return None


class SimulatorSession:
    """Probe interface the measurement engine drives.

    The engine sees the same three primitives a live prober has: a TTL
    limited trace probe, an echo request, and a plain UDP probe used for
    existence checks.
    """

    def __init__(self, topology: Topology,
                 target: IPv4Address | str | None = None) -> None:
        self.sim = Simulation(topology)
        self.topology = topology
        self.probes_sent = 0
        self._target = _as_addr(target) if target is not None else topology.target

    @property
    def target(self) -> IPv4Address:
        return self._target

    @property
    def vantage(self) -> IPv4Address:
        return self.topology.vantage

    def trace_probe(self, ttl: int, target: IPv4Address | str | None = None,
                    flow_id: int = 0) -> SimReply | None:
        self.probes_sent += 1
        dst = _as_addr(target) if target is not None else self._target
        return self.sim.probe(dst, ttl)

    def echo(self, target: IPv4Address | str) -> SimReply | None:
        self.probes_sent += 1
        return self.sim.echo(_as_addr(target))

    def udp(self, target: IPv4Address | str, ttl: int = 64) -> SimReply | None:
        self.probes_sent += 1
        return self.sim.probe(_as_addr(target), ttl)

    def rtt(self, address: IPv4Address | str, ttl: int) -> float:
        digest = zlib.crc32(f"{address}/{ttl}".encode())
        return round(0.25 * ttl + (digest % 5000) / 1000.0, 3)

    def name_of(self, address: IPv4Address | str) -> str | None:
        return self.topology.names.get(_as_addr(address))
