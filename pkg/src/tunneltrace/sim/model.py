"""Topology data model for the MPLS simulator.

A :class:`Topology` is a set of :class:`Router` objects plus the control
plane inputs (IGP prefixes, BGP routes, static routes, label pins, traffic
engineering tunnels and VPN push routes).  Everything here is declarative;
the forwarding engine compiles it into routing and label tables.
"""

from __future__ import annotations

import enum
import ipaddress
from dataclasses import dataclass, field
from ipaddress import IPv4Address, IPv4Interface, IPv4Network


class ScenarioError(ValueError):
    """Raised when a scenario file or topology is inconsistent."""


class RouterOS(enum.Enum):
    """Operating system families with distinct TTL and quoting behaviour."""

    CISCO124 = "cisco124"
    CISCO152 = "cisco152"
    OLIVE = "olive"
    VMX = "vmx"
    PLAIN = "plain"

    @property
    def is_cisco(self) -> bool:
        return self in (RouterOS.CISCO124, RouterOS.CISCO152)

    @property
    def is_juniper(self) -> bool:
        return self in (RouterOS.OLIVE, RouterOS.VMX)


class BindingMode(enum.Enum):
    """Which forwarding equivalence classes a router binds labels for."""

    ALL_IGP = "all-igp"
    LOOPBACK_ONLY = "loopback-only"
    HOST_ROUTES = "host-routes"
    SCOPED = "scoped"
    NONE = "none"


class Popping(enum.Enum):
    """Who removes the last label of an LSP."""

    PHP = "php"
    UHP = "uhp"


@dataclass
class StaticRoute:
    prefix: IPv4Network
    via: IPv4Address


@dataclass
class BgpRoute:
    prefix: IPv4Network
    nexthop: IPv4Address


@dataclass
class Tunnel:
    """A traffic engineering tunnel from ``head`` to ``tail``'s loopback."""

    head: str
    tail: str
    popping: Popping = Popping.PHP


@dataclass
class VpnRoute:
    """A route installed by the VPN control plane on one PE.

    ``push`` selects the label stack used when the route fires:

    - ``double``: transport label toward the remote PE plus the VPN label.
    - ``single``: transport label only (return path on IOS boxes).
    - ``plain``: no labels, a static route inside the VPN context.
    """

    router: str
    prefix: IPv4Network
    remote_pe: str | None = None
    via_addr: IPv4Address | None = None
    push: str = "double"


@dataclass
class Router:
    """One device: interfaces, label distribution policy and OS quirks."""

    name: str
    os: RouterOS = RouterOS.PLAIN
    interfaces: list[IPv4Interface] = field(default_factory=list)
    loopbacks: list[IPv4Address] = field(default_factory=list)
    igp: bool = True
    ldp: bool = False
    binding: BindingMode = BindingMode.ALL_IGP
    popping: Popping = Popping.PHP
    propagate_ttl: bool = True
    uhp_acl: list[IPv4Network] = field(default_factory=list)
    icmp_tunneling: bool = False
    default_via: IPv4Address | None = None
    statics: list[StaticRoute] = field(default_factory=list)
    bgp: list[BgpRoute] = field(default_factory=list)
    vrf_interfaces: list[IPv4Address] = field(default_factory=list)
    vpn_label: int | None = None

    def owns(self, addr: IPv4Address) -> bool:
        return addr in self.loopbacks or any(i.ip == addr for i in self.interfaces)

    def interface_on(self, network: IPv4Network) -> IPv4Address | None:
        for iface in self.interfaces:
            if iface.ip in network:
                return iface.ip
        return None

    @property
    def loopback(self) -> IPv4Address:
        if not self.loopbacks:
            raise ScenarioError(f"router {self.name} has no loopback")
        return self.loopbacks[0]


@dataclass
class NoiseConfig:
    """Per-address reply path perturbation for calibration experiments."""

    seed: int = 0
    fraction: float = 0.0
    max_delta: int = 3


@dataclass
class Topology:
    """A complete scenario: devices plus control plane inputs."""

    name: str = "unnamed"
    vantage: IPv4Address = ipaddress.IPv4Address("0.0.0.0")
    target: IPv4Address = ipaddress.IPv4Address("0.0.0.0")
    routers: dict[str, Router] = field(default_factory=dict)
    igp_prefixes: list[IPv4Network] = field(default_factory=list)
    names: dict[IPv4Address, str] = field(default_factory=dict)
    label_pins: dict[tuple[str, IPv4Network], int] = field(default_factory=dict)
    tunnels: list[Tunnel] = field(default_factory=list)
    scoped_fecs: list[IPv4Network] = field(default_factory=list)
    scoped_heads: list[str] = field(default_factory=list)
    vpn_routes: list[VpnRoute] = field(default_factory=list)
    engine_overrides: dict[str, int] = field(default_factory=dict)
    noise: NoiseConfig | None = None

    def router_of(self, addr: IPv4Address) -> Router | None:
        for router in self.routers.values():
            if router.owns(addr):
                return router
        return None

    def validate(self) -> None:
        if not self.routers:
            raise ScenarioError("topology has no routers")
        seen: dict[IPv4Address, str] = {}
        for router in self.routers.values():
            for iface in router.interfaces:
                if iface.ip in seen and seen[iface.ip] != router.name:
                    raise ScenarioError(
                        f"address {iface.ip} on both {seen[iface.ip]} and {router.name}"
                    )
                seen[iface.ip] = router.name
        for tunnel in self.tunnels:
            if tunnel.head not in self.routers or tunnel.tail not in self.routers:
                raise ScenarioError(f"tunnel references unknown router: {tunnel}")
        for route in self.vpn_routes:
            if route.router not in self.routers:
                raise ScenarioError(f"vpn route references unknown router: {route}")
            if route.remote_pe is not None and route.remote_pe not in self.routers:
                raise ScenarioError(f"vpn route references unknown PE: {route}")
