"""Parser for the plain text scenario format.

A scenario file is a set of ``[section]`` blocks.  ``[scenario]``,
``[router NAME]``, ``[engine]`` and ``[noise]`` hold ``key = value`` pairs;
the remaining sections hold one declaration per line:

- ``[igp]``: one prefix per line, advertised to every router.
- ``[bgp]`` / ``[static]``: ``ROUTER: PREFIX via ADDR``.
- ``[labels]``: ``ROUTER PREFIX = LABEL`` pins for deterministic bindings.
- ``[names]``: ``ADDR = display-name`` for the reverse lookup table.
- ``[tunnels]``: ``HEAD -> TAIL popping=php|uhp`` traffic engineering LSPs.
- ``[fecs]``: ``heads = R1, R2`` and ``prefix = P`` lines restricting which
  destinations get labels when a router uses ``binding = scoped``.
- ``[vpn]``: ``pe ROUTER iface=ADDR label=N`` context declarations and
  ``route ROUTER PREFIX via PE push=double|single`` or
  ``route ROUTER PREFIX via-addr ADDR`` push routes.

Booleans accept ``yes``/``no``; lists are comma separated.  ``#`` starts a
comment.  Links are inferred from interfaces sharing a subnet.
"""

from __future__ import annotations

import ipaddress
import re
from ipaddress import IPv4Address, IPv4Network

from tunneltrace.sim.model import (
    BgpRoute,
    BindingMode,
    NoiseConfig,
    Popping,
    Router,
    RouterOS,
    ScenarioError,
    StaticRoute,
    Topology,
    Tunnel,
    VpnRoute,
)

_SECTION_RE = re.compile(r"^\[([^\]]+)\]$")
_TUNNEL_RE = re.compile(r"^(\S+)\s*->\s*(\S+)(?:\s+popping\s*=\s*(php|uhp))?$")
_ROUTE_LINE_RE = re.compile(r"^(\S+)\s*:\s*(\S+)\s+via\s+(\S+)$")
_LABEL_RE = re.compile(r"^(\S+)\s+(\S+)\s*=\s*(\d+)$")


def _boolean(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("yes", "true", "on", "1"):
        return True
    if lowered in ("no", "false", "off", "0"):
        return False
    raise ScenarioError(f"not a boolean: {value!r}")


def _addr(value: str) -> IPv4Address:
    try:
        return ipaddress.IPv4Address(value.strip())
    except ValueError as exc:
        raise ScenarioError(f"bad address {value!r}") from exc


def _network(value: str) -> IPv4Network:
    try:
        return ipaddress.IPv4Network(value.strip(), strict=False)
    except ValueError as exc:
        raise ScenarioError(f"bad prefix {value!r}") from exc


def _split_list(value: str) -> list[str]:
    return [part.strip() for part in value.split(",") if part.strip()]


def _apply_router_key(router: Router, key: str, value: str) -> None:
    if key == "os":
        try:
            router.os = RouterOS(value.strip())
        except ValueError as exc:
            raise ScenarioError(f"unknown os {value!r}") from exc
    elif key == "interfaces":
        router.interfaces = [
            ipaddress.IPv4Interface(part) for part in _split_list(value)
        ]
    elif key in ("loopback", "loopbacks"):
        router.loopbacks = [
            ipaddress.IPv4Interface(part).ip for part in _split_list(value)
        ]
    elif key == "igp":
        router.igp = _boolean(value)
    elif key == "ldp":
        router.ldp = _boolean(value)
    elif key == "binding":
        try:
            router.binding = BindingMode(value.strip())
        except ValueError as exc:
            raise ScenarioError(f"unknown binding mode {value!r}") from exc
    elif key == "popping":
        try:
            router.popping = Popping(value.strip())
        except ValueError as exc:
            raise ScenarioError(f"unknown popping mode {value!r}") from exc
    elif key == "propagate_ttl":
        router.propagate_ttl = _boolean(value)
    elif key == "uhp_acl":
        router.uhp_acl = [_network(part) for part in _split_list(value)]
    elif key == "icmp_tunneling":
        router.icmp_tunneling = _boolean(value)
    elif key == "default_via":
        router.default_via = _addr(value)
    elif key == "vrf_interfaces":
        router.vrf_interfaces = [_addr(part) for part in _split_list(value)]
    else:
        raise ScenarioError(f"unknown router key {key!r}")


def _parse_vpn_line(topology: Topology, line: str) -> None:
    parts = line.split()
    if parts[0] == "pe" and len(parts) >= 2:
        router = parts[1]
        if router not in topology.routers:
            raise ScenarioError(f"[vpn] pe references unknown router {router!r}")
        for option in parts[2:]:
            key, _, value = option.partition("=")
            if key == "iface":
                topology.routers[router].vrf_interfaces.append(_addr(value))
            elif key == "label":
                topology.routers[router].vpn_label = int(value)
            else:
                raise ScenarioError(f"unknown [vpn] pe option {option!r}")
        return
    if parts[0] == "route" and len(parts) >= 5 and parts[3] == "via-addr":
        topology.vpn_routes.append(
            VpnRoute(
                router=parts[1],
                prefix=_network(parts[2]),
                via_addr=_addr(parts[4]),
                push="plain",
            )
        )
        return
    if parts[0] == "route" and len(parts) >= 5 and parts[3] == "via":
        push = "double"
        for option in parts[5:]:
            key, _, value = option.partition("=")
            if key == "push":
                if value not in ("double", "single"):
                    raise ScenarioError(f"unknown vpn push mode {value!r}")
                push = value
            else:
                raise ScenarioError(f"unknown [vpn] route option {option!r}")
        topology.vpn_routes.append(
            VpnRoute(router=parts[1], prefix=_network(parts[2]),
                     remote_pe=parts[4], push=push)
        )
        return
    raise ScenarioError(f"bad [vpn] line {line!r}")


def parse_scenario(text: str) -> Topology:
    """Parse scenario ``text`` into a validated :class:`Topology`."""
    topology = Topology()
    section: str | None = None
    current_router: Router | None = None

    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        match = _SECTION_RE.match(line)
        if match:
            section = match.group(1).strip()
            current_router = None
            if section.startswith("router "):
                name = section.split(None, 1)[1].strip()
                if name in topology.routers:
                    raise ScenarioError(f"duplicate router {name!r}")
                current_router = Router(name=name)
                topology.routers[name] = current_router
            continue
        if section is None:
            raise ScenarioError(f"line outside any section: {line!r}")

        if current_router is not None:
            key, sep, value = line.partition("=")
            if not sep:
                raise ScenarioError(f"bad router line {line!r}")
            _apply_router_key(current_router, key.strip(), value.strip())
        elif section == "scenario":
            key, sep, value = line.partition("=")
            if not sep:
                raise ScenarioError(f"bad scenario line {line!r}")
            key, value = key.strip(), value.strip()
            if key == "name":
                topology.name = value
            elif key == "vantage":
                topology.vantage = _addr(value)
            elif key == "target":
                topology.target = _addr(value)
            else:
                raise ScenarioError(f"unknown scenario key {key!r}")
        elif section == "igp":
            topology.igp_prefixes.append(_network(line))
        elif section in ("bgp", "static"):
            match = _ROUTE_LINE_RE.match(line)
            if not match:
                raise ScenarioError(f"bad [{section}] line {line!r}")
            router_name, prefix, via = match.groups()
            if router_name not in topology.routers:
                raise ScenarioError(
                    f"[{section}] references unknown router {router_name!r}"
                )
            router = topology.routers[router_name]
            if section == "bgp":
                router.bgp.append(BgpRoute(_network(prefix), _addr(via)))
            else:
                router.statics.append(StaticRoute(_network(prefix), _addr(via)))
        elif section == "labels":
            match = _LABEL_RE.match(line)
            if not match:
                raise ScenarioError(f"bad [labels] line {line!r}")
            router_name, prefix, label = match.groups()
            if router_name not in topology.routers:
                raise ScenarioError(f"[labels] references unknown router {router_name!r}")
            topology.label_pins[(router_name, _network(prefix))] = int(label)
        elif section == "names":
            key, sep, value = line.partition("=")
            if not sep:
                raise ScenarioError(f"bad [names] line {line!r}")
            topology.names[_addr(key)] = value.strip()
        elif section == "tunnels":
            match = _TUNNEL_RE.match(line)
            if not match:
                raise ScenarioError(f"bad [tunnels] line {line!r}")
            head, tail, popping = match.groups()
            topology.tunnels.append(
                Tunnel(head=head, tail=tail,
                       popping=Popping(popping) if popping else Popping.PHP)
            )
        elif section == "fecs":
            key, sep, value = line.partition("=")
            if not sep:
                raise ScenarioError(f"bad [fecs] line {line!r}")
            key, value = key.strip(), value.strip()
            if key == "heads":
                topology.scoped_heads.extend(_split_list(value))
            elif key == "prefix":
                topology.scoped_fecs.append(_network(value))
            else:
                raise ScenarioError(f"unknown [fecs] key {key!r}")
        elif section == "vpn":
            _parse_vpn_line(topology, line)
        elif section == "engine":
            key, sep, value = line.partition("=")
            if not sep:
                raise ScenarioError(f"bad [engine] line {line!r}")
            topology.engine_overrides[key.strip()] = int(value.strip())
        elif section == "noise":
            key, sep, value = line.partition("=")
            if not sep:
                raise ScenarioError(f"bad [noise] line {line!r}")
            if topology.noise is None:
                topology.noise = NoiseConfig()
            key, value = key.strip(), value.strip()
            if key == "seed":
                topology.noise.seed = int(value)
            elif key == "fraction":
                topology.noise.fraction = float(value)
            elif key == "max_delta":
                topology.noise.max_delta = int(value)
            else:
                raise ScenarioError(f"unknown [noise] key {key!r}")
        else:
            raise ScenarioError(f"unknown section [{section}]")

    topology.validate()
    return topology
