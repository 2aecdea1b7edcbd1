"""Command line interface.

Subcommands::

  trace TARGET [--backend live|sim --topology FILE]   one annotated trace
  simulate --scenario NAME                            run a bundled scenario
  campaign --targets FILE                             many traces, records out
  calibrate [--suite DIR] [--grid 0..4]               threshold ROC sweep
  stats RECORDS                                       aggregate a record file

Exit codes: 0 success, 1 usage error, 2 probing failure, 3 scenario or
record-schema error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from tunneltrace import report
from tunneltrace.calibrate import (
    CalibrationCase,
    calibration_corpus,
    ground_truth,
    roc_sweep,
)
from tunneltrace.engine import config_from_overrides, run_trace
from tunneltrace.model import AnnotatedTrace, EngineConfig
from tunneltrace.sim import (
    ScenarioError,
    SimulatorSession,
    Topology,
    builtin_scenario_names,
    load_builtin,
    load_scenario,
)
from tunneltrace.sim.model import NoiseConfig

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PROBING = 2
EXIT_SCENARIO = 3

# Engine override keys settable from the command line.
_FLAG_KEYS = ("t_frpla", "t_rtla", "t_lse_ttl", "t_uturn",
              "starting_ttl", "gap_limit")


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage errors exit with code 1."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1: {text}")
    return value


def _grid(text: str) -> range:
    """Parse ``A..B`` into the inclusive integer range."""
    try:
        low, high = text.split("..")
        start, stop = int(low), int(high)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"grid must look like 0..4: {text!r}") from None
    if stop < start:
        raise argparse.ArgumentTypeError(f"empty grid: {text!r}")
    return range(start, stop + 1)


def _noise(text: str) -> tuple[int, float, int]:
    """Parse ``SEED,FRACTION,MAX_DELTA``."""
    try:
        seed, fraction, delta = text.split(",")
        return int(seed), float(fraction), int(delta)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"noise must look like 7,0.3,3: {text!r}") from None


def _add_engine_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--t-frpla", type=int, metavar="N",
                        help="forward/return asymmetry trigger threshold")
    parser.add_argument("--t-rtla", type=int, metavar="N",
                        help="return tunnel length trigger threshold")
    parser.add_argument("--t-lse-ttl", type=int, metavar="N",
                        help="lower bound of the opaque quoted LSE-TTL band")
    parser.add_argument("--t-uturn", type=int, metavar="N",
                        help="u-turn indicator threshold")
    parser.add_argument("--brute-force", action="store_true",
                        help="attempt revelation at every hop pair")
    parser.add_argument("--starting-ttl", type=_positive_int, metavar="N",
                        help="first probed TTL")
    parser.add_argument("--gap-limit", type=_positive_int, metavar="N",
                        help="consecutive silent hops before giving up")
    parser.add_argument("--output", choices=("text", "records"),
                        help="transcript text or line-delimited records")


def _engine_config(args: argparse.Namespace, base: EngineConfig) -> EngineConfig:
    overrides = {key: getattr(args, key) for key in _FLAG_KEYS
                 if getattr(args, key) is not None}
    config = config_from_overrides(overrides, base)
    if args.brute_force:
        config.brute_force = True
    return config


def _load_topology(spec: str) -> Topology:
    """Load a scenario by bundled name or by file path."""
    path = Path(spec)
    if path.exists() or "/" in spec or spec.endswith(".topo"):
        return load_scenario(path)
    return load_builtin(spec)


def _sim_base(topology: Topology) -> EngineConfig:
    """Engine defaults for simulated testbeds: probe from the first hop."""
    return config_from_overrides(topology.engine_overrides,
                                 EngineConfig(starting_ttl=1))


def _emit(traces: list[AnnotatedTrace], output: str) -> None:
    if output == "records":
        report.dump_records(traces, sys.stdout)
    else:
        sys.stdout.write("\n".join(report.dump_trace(t) for t in traces))


# -- subcommands ---------------------------------------------------------------


def _cmd_trace(args: argparse.Namespace) -> int:
    if args.backend == "sim":
        if args.topology is None:
            print("trace: error: --backend sim requires --topology",
                  file=sys.stderr)
            return EXIT_USAGE
        try:
            topology = _load_topology(args.topology)
        except (ScenarioError, OSError) as exc:
            print(f"scenario error: {exc}", file=sys.stderr)
            return EXIT_SCENARIO
        config = _engine_config(args, _sim_base(topology))
        target = None if args.target == "-" else args.target
        session = SimulatorSession(topology, target=target)
        trace = run_trace(session, config)
    else:
        from tunneltrace.live import LiveSession
        config = _engine_config(args, EngineConfig())
        try:
            session = LiveSession(args.target)
        except OSError as exc:
            print(f"probing failure: {exc}", file=sys.stderr)
            return EXIT_PROBING
        try:
            trace = run_trace(session, config)
        finally:
            session.close()
    if not trace.hops:
        print("probing failure: no replies", file=sys.stderr)
        return EXIT_PROBING
    _emit([trace], args.output or "text")
    return EXIT_OK


def _cmd_simulate(args: argparse.Namespace) -> int:
    if args.list:
        for name in builtin_scenario_names():
            print(name)
        return EXIT_OK
    if args.scenario is None:
        print("simulate: error: --scenario is required", file=sys.stderr)
        return EXIT_USAGE
    try:
        topology = _load_topology(args.scenario)
    except (ScenarioError, OSError) as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_SCENARIO
    config = _engine_config(args, _sim_base(topology))
    trace = run_trace(SimulatorSession(topology), config)
    _emit([trace], args.output or "text")
    return EXIT_OK


def _cmd_campaign(args: argparse.Namespace) -> int:
    try:
        lines = Path(args.targets).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        print(f"campaign: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    targets = [line.strip() for line in lines
               if line.strip() and not line.startswith("#")]
    topology = None
    if args.backend == "sim":
        if args.topology is None:
            print("campaign: error: --backend sim requires --topology",
                  file=sys.stderr)
            return EXIT_USAGE
        try:
            topology = _load_topology(args.topology)
        except (ScenarioError, OSError) as exc:
            print(f"scenario error: {exc}", file=sys.stderr)
            return EXIT_SCENARIO

    traces: list[AnnotatedTrace] = []
    for target in targets:
        if topology is not None:
            config = _engine_config(args, _sim_base(topology))
            session = SimulatorSession(topology, target=target)
            traces.append(run_trace(session, config))
        else:
            from tunneltrace.live import LiveSession
            config = _engine_config(args, EngineConfig())
            try:
                session = LiveSession(target)
            except OSError as exc:
                print(f"probing failure for {target}: {exc}", file=sys.stderr)
                continue
            try:
                traces.append(run_trace(session, config))
            finally:
                session.close()
    if targets and not traces:
        return EXIT_PROBING
    _emit(traces, args.output or "records")
    return EXIT_OK


def _cmd_calibrate(args: argparse.Namespace) -> int:
    noise = args.noise
    if args.suite is not None:
        corpus: list[CalibrationCase] = []
        try:
            paths = sorted(Path(args.suite).glob("*.topo"))
            for path in paths:
                topology = load_scenario(path)
                if noise is not None:
                    topology.noise = NoiseConfig(*noise)
                corpus.append(CalibrationCase(topology.name, topology,
                                              ground_truth(topology)))
        except (ScenarioError, OSError) as exc:
            print(f"scenario error: {exc}", file=sys.stderr)
            return EXIT_SCENARIO
        if not corpus:
            print(f"scenario error: no *.topo files in {args.suite}",
                  file=sys.stderr)
            return EXIT_SCENARIO
    else:
        corpus = calibration_corpus(noise=noise)
    points = roc_sweep(corpus, args.grid, args.grid)
    if (args.output or "text") == "records":
        for point in points:
            print(json.dumps({
                "t_frpla": point.t_frpla, "t_rtla": point.t_rtla,
                "true_positives": point.true_positives,
                "false_positives": point.false_positives,
                "positives": point.positives, "negatives": point.negatives,
                "tpr": point.tpr, "fpr": point.fpr,
            }))
    else:
        print(f"{'t_frpla':>8} {'t_rtla':>7} {'tp':>4} {'fp':>4} "
              f"{'tpr':>6} {'fpr':>6}")
        for point in points:
            print(f"{point.t_frpla:>8} {point.t_rtla:>7} "
                  f"{point.true_positives:>4} {point.false_positives:>4} "
                  f"{point.tpr:>6.2f} {point.fpr:>6.2f}")
    return EXIT_OK


def _cmd_stats(args: argparse.Namespace) -> int:
    try:
        with open(args.records, encoding="utf-8") as stream:
            traces = report.load_records(stream)
    except OSError as exc:
        print(f"stats: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, KeyError) as exc:
        print(f"record schema error: {exc}", file=sys.stderr)
        return EXIT_SCENARIO
    summary = report.summarize(traces)
    summary["matrix"] = report.classify_stats(traces)["matrix"]
    json.dump(summary, sys.stdout, indent=2)
    print()
    return EXIT_OK


# -- entry point ---------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="tunneltrace",
                     description="Traceroute with MPLS tunnel detection "
                                 "and revelation.")
    commands = parser.add_subparsers(dest="command", required=True)

    trace = commands.add_parser("trace", help="run one annotated trace")
    trace.add_argument("target",
                       help="destination address ('-' for the scenario's "
                            "own target with --backend sim)")
    trace.add_argument("--backend", choices=("live", "sim"), default="live")
    trace.add_argument("--topology", metavar="FILE",
                       help="scenario file or bundled name (sim backend)")
    _add_engine_flags(trace)
    trace.set_defaults(func=_cmd_trace)

    simulate = commands.add_parser("simulate", help="run a bundled scenario")
    simulate.add_argument("--scenario", metavar="NAME",
                          help="bundled scenario name or file path")
    simulate.add_argument("--list", action="store_true",
                          help="list bundled scenario names")
    _add_engine_flags(simulate)
    simulate.set_defaults(func=_cmd_simulate)

    campaign = commands.add_parser("campaign", help="trace a list of targets")
    campaign.add_argument("--targets", metavar="FILE", required=True,
                          help="file with one target per line")
    campaign.add_argument("--backend", choices=("live", "sim"),
                          default="live")
    campaign.add_argument("--topology", metavar="FILE",
                          help="scenario file or bundled name (sim backend)")
    _add_engine_flags(campaign)
    campaign.set_defaults(func=_cmd_campaign)

    calibrate = commands.add_parser(
        "calibrate", help="sweep trigger thresholds against a labelled suite")
    calibrate.add_argument("--suite", metavar="DIR",
                           help="directory of scenario files (default: the "
                                "built-in calibration corpus)")
    calibrate.add_argument("--grid", type=_grid, default=range(0, 5),
                           metavar="A..B", help="inclusive threshold range")
    calibrate.add_argument("--noise", type=_noise, metavar="SEED,FRAC,DELTA",
                           help="inject return-path asymmetry")
    calibrate.add_argument("--output", choices=("text", "records"))
    calibrate.set_defaults(func=_cmd_calibrate)

    stats = commands.add_parser("stats", help="aggregate a record file")
    stats.add_argument("records", help="line-delimited record file")
    stats.set_defaults(func=_cmd_stats)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
