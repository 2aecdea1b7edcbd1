#!/usr/bin/env python3
"""Run every bundled scenario and diff its transcript against the goldens.

Prints one OK/DIFF line per scenario and exits nonzero when any transcript
deviates, showing a unified diff for each mismatch.
"""

from __future__ import annotations

import difflib
import sys
import time
from pathlib import Path

from tunneltrace.engine import config_from_overrides, run_trace
from tunneltrace.model import EngineConfig
from tunneltrace.report import dump_trace
from tunneltrace.sim import SimulatorSession, builtin_scenario_names, load_builtin

GOLDEN = Path(__file__).resolve().parent.parent / "tests" / "golden"


def transcript(name: str, target: str | None = None) -> str:
    topology = load_builtin(name)
    config = config_from_overrides(topology.engine_overrides,
                                   EngineConfig(starting_ttl=1))
    session = SimulatorSession(topology, target=target)
    return dump_trace(run_trace(session, config), include_rtt=False)


def main() -> int:
    runs = [(name, name, None) for name in builtin_scenario_names()]
    # The VPN egress PE as target: the one-hop return LSP corner case.
    runs.append(("juniper-vpn-pe", "juniper-vpn", "192.168.2.1"))
    failures = 0
    started = time.perf_counter()
    for label, name, target in runs:
        expected = (GOLDEN / f"{label}.txt").read_text(encoding="utf-8")
        actual = transcript(name, target)
        if actual == expected:
            print(f"OK    {label}")
        else:
            failures += 1
            print(f"DIFF  {label}")
            sys.stdout.writelines(difflib.unified_diff(
                expected.splitlines(keepends=True),
                actual.splitlines(keepends=True),
                fromfile=f"golden/{label}.txt", tofile="simulated"))
    elapsed = time.perf_counter() - started
    print(f"{len(runs) - failures}/{len(runs)} transcripts match "
          f"({elapsed:.2f}s)")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
