"""Scenario catalog: bundled topologies and parametric chain builders.

The bundled ``data/*.topo`` files reproduce the validation testbeds (one
file per platform/configuration pair). The builders generate linear
topologies of arbitrary length for measurement sweeps:

* ``uturn_sweep_scenario`` builds label-switched chains whose u-turn
  values follow the closed-form expectation at every swept position;
* ``opaque_chain_scenario`` builds chains that surface a single opaque
  hop whose quoted LSE-TTL encodes the hidden length;
* ``invisible_chain_scenario`` / ``plain_chain_scenario`` build the
  positive/negative corpus used for trigger threshold calibration.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from tunneltrace.sim.model import ScenarioError, Topology
from tunneltrace.sim.parser import parse_scenario

_DATA = resources.files("tunneltrace.sim") / "data"


def builtin_scenario_names() -> list[str]:
    """Names of the bundled scenarios, without the ``.topo`` suffix."""
    return sorted(
        entry.name[: -len(".topo")]
        for entry in _DATA.iterdir()
        if entry.name.endswith(".topo")
    )


def load_builtin(name: str) -> Topology:
    """Load a bundled scenario by name."""
    entry = _DATA / f"{name}.topo"
    try:
        text = entry.read_text(encoding="utf-8")
    except (FileNotFoundError, OSError):
        raise ScenarioError(f"unknown bundled scenario: {name!r}") from None
    return parse_scenario(text)


def load_scenario(path: str | Path) -> Topology:
    """Load a scenario from a file path."""
    return parse_scenario(Path(path).read_text(encoding="utf-8"))


# -- parametric chain builders -------------------------------------------------
#
# Shared layout: VP -- PE1 -- M1 -- ... -- Mn -- (tail routers).  Link j uses
# 10.j.0.0/30 with .1 on the head side, .2 on the far side; the vantage link
# 10.0.0.0/30 stays outside the IGP, and PE1 carries loopback 10.255.0.1 so
# reply traffic can ride a return LSP toward it.

_LO = "10.255.0.1"


def _link(j: int) -> tuple[str, str, str]:
    return f"10.{j}.0.0/30", f"10.{j}.0.1", f"10.{j}.0.2"


def _chain_text(name: str, os_name: str, count: int, tail: int, *,
                propagate: bool, popping: str = "php", icmp: bool = False,
                ldp: bool = True, scoped_fec: str | None = None,
                igp_extra: tuple[str, ...] = (),
                noise: tuple[int, float, int] | None = None,
                engine: dict[str, int] | None = None,
                target: str | None = None) -> str:
    """Scenario text for a linear chain.

    ``count`` label routers M1..Mn sit between PE1 and ``tail`` plain
    routers T1..Tk; the target is the far address of the last link
    unless ``target`` overrides it.
    """
    lines = [f"[scenario]", f"name = {name}", "vantage = 10.0.0.1"]
    total = count + tail
    last_prefix, _, last_far = _link(total + 1)
    lines.append(f"target = {target or last_far}")
    lines.append("")

    flags = f"propagate_ttl = {'yes' if propagate else 'no'}"
    if icmp:
        flags += "\nicmp_tunneling = yes"

    _, vp_head, vp_far = _link(0)
    lines += ["[router VP]", f"os = {os_name}", f"interfaces = {vp_head}/30",
              "igp = no", f"default_via = {vp_far}", ""]
    _, m_head, _ = _link(1)
    lines += ["[router PE1]", f"os = {os_name}",
              f"interfaces = {vp_far}/30, {m_head}/30",
              f"loopback = {_LO}/32",
              f"ldp = {'yes' if ldp else 'no'}", f"popping = {popping}",
              flags, ""]
    for i in range(1, count + 1):
        _, _, near = _link(i)
        _, head, _ = _link(i + 1)
        lines += [f"[router M{i}]", f"os = {os_name}",
                  f"interfaces = {near}/30, {head}/30",
                  f"ldp = {'yes' if ldp else 'no'}", f"popping = {popping}",
                  flags, f"default_via = {_LO}", ""]
    for t in range(1, tail + 1):
        j = count + t
        _, _, near = _link(j)
        _, head, _ = _link(j + 1)
        _, back, _ = _link(j)
        lines += [f"[router T{t}]", f"os = {os_name}",
                  f"interfaces = {near}/30, {head}/30", "igp = no",
                  f"default_via = {back}", ""]
    lines += ["[router TEND]", f"os = {os_name}",
              f"interfaces = {last_far}/30", "igp = no",
              f"default_via = 10.{total + 1}.0.1", ""]

    lines.append("[igp]")
    for j in range(1, total + 2):
        prefix, _, _ = _link(j)
        lines.append(prefix)
    for prefix in igp_extra:
        lines.append(prefix)
    lines.append("")

    if scoped_fec is not None:
        lines += ["[fecs]", "heads = PE1", f"prefix = {scoped_fec}", ""]
    if noise is not None:
        seed, fraction, max_delta = noise
        lines += ["[noise]", f"seed = {seed}", f"fraction = {fraction}",
                  f"max_delta = {max_delta}", ""]
    if engine:
        lines.append("[engine]")
        lines += [f"{key} = {value}" for key, value in engine.items()]
        lines.append("")
    return "\n".join(lines)


def uturn_sweep_scenario(length: int, icmp_tunneling: bool = False) -> Topology:
    """Chain whose swept u-turn values follow the closed-form expectation.

    Without ICMP tunneling: a UHP chain of ``length`` swapping label
    routers (plus the pop-0 egress), all relaunching expired probes along
    the LSP; position ``i`` (probe TTL ``1 + i``) measures
    ``2 * (length - i + 1)``.

    With ICMP tunneling: a PHP chain of ``length`` label routers before
    the egress; positions ``1 .. length - 1`` measure
    ``2 * (length - i + 1) + 1`` (the penultimate router pops and answers
    directly, so it is not part of the sweep).

    Label bindings are scoped to the forward destination so every reply
    returns over plain IP.
    """
    if length < 1:
        raise ValueError("length must be >= 1")
    if icmp_tunneling:
        count = length + 1  # M1..Mlength before the egress M(length+1)
        fec, _, _ = _link(count + 1)
        text = _chain_text(f"uturn-php-icmp-{length}", "vmx", count, 1,
                           propagate=True, popping="php", icmp=True,
                           scoped_fec=fec)
    else:
        count = length + 1  # length swap routers, then the pop-0 egress
        fec, _, _ = _link(count + 1)
        text = _chain_text(f"uturn-uhp-{length}", "cisco152", count, 1,
                           propagate=True, popping="uhp", scoped_fec=fec)
    return parse_scenario(text)


def opaque_chain_scenario(length: int) -> Topology:
    """Chain showing one opaque hop whose LSE-TTL quotes ``255 - length``.

    ``length`` label routers hide behind an egress that holds a label
    binding for a route whose downstream is unlabelled, so the egress
    forwards the expired entry TTL inside its quotation.
    """
    if not 2 <= length <= 18:
        raise ValueError("length must be in 2..18 to stay in the opaque band")
    # M1..Mlength swap toward ME which pops untagged; two plain routers
    # behind ME own the destination prefix.
    count = length + 1  # the last label router is the untagged popper
    text = _chain_text(f"opaque-{length}", "cisco152", count, 1,
                       propagate=False, popping="php")
    return parse_scenario(text)


def invisible_chain_scenario(length: int, os_name: str = "cisco152",
                             noise: tuple[int, float, int] | None = None) -> Topology:
    """Chain hiding ``length`` label routers entirely (no TTL propagation).

    The hop after the hidden span shows a forward/return asymmetry of
    ``length`` (and, on Juniper OS, a return tunnel length of ``length``).
    """
    if length < 1:
        raise ValueError("length must be >= 1")
    # The destination link is owned by the last label router, so its
    # upstream neighbour pops and the probe expires one hop beyond the
    # hidden span; M1..Mlength never appear in the trace.
    count = length + 1
    _, _, dest = _link(count + 1)
    text = _chain_text(f"invisible-{os_name}-{length}", os_name, count, 1,
                       propagate=False, popping="php", noise=noise,
                       target=dest)
    return parse_scenario(text)


def plain_chain_scenario(length: int, os_name: str = "cisco152",
                         noise: tuple[int, float, int] | None = None) -> Topology:
    """Label-free chain of ``length`` routers: the negative control."""
    if length < 1:
        raise ValueError("length must be >= 1")
    text = _chain_text(f"plain-{os_name}-{length}", os_name, length, 1,
                       propagate=True, ldp=False, noise=noise)
    return parse_scenario(text)
