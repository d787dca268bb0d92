"""Command-line entry point: ``chessy target | run | bench``."""

from __future__ import annotations

import argparse
import logging
import sys
from fractions import Fraction
from pathlib import Path

from . import bench
from .adapter import SessionConfig, run_session
from .core import ClockSpec
from .errors import BusError, ChessyError, LinkError, MalformedMailbox, MalformedRequest, TimeRegression
from .kernel import load_address_map
from .script import WorkloadScript, parse_count
from .target import TargetEmulator, format_symbols, load_symbols, run_baseline, serve

log = logging.getLogger("chessy")

EXIT_USAGE = 2
EXIT_PROTOCOL = 3
EXIT_LINK = 4
EXIT_SESSION = 5

# applied after command-line flags and the config file
DEFAULTS = {
    "clock_hz": 50_000_000,
    "listen": "127.0.0.1:3333",
    "bus_miss": "fatal",
    "timeout": 10.0,
    "sizes": "4,64,1024,8192",
    "cycles": "0,1e5,1e6,1e7",
    "iters": 10,
    "mode": "modeled",
    "per_access_ms": "80",
    "per_byte_us": "0.4",
    "variant": "both",
    "accesses_per_iter": 3,
    "log_level": "warning",
    "seed": 0,
}
REQUIRED = {"target": ["script"], "run": ["target"]}


class ConfigError(Exception):
    pass


def read_config(path: str) -> dict[str, str]:
    """Plain ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _endpoint(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit():
        raise argparse.ArgumentTypeError(f"expected HOST:PORT, got {text!r}")
    return host or "127.0.0.1", int(port)


def _int_list(text: str) -> list[int]:
    try:
        return [parse_count(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value file; flags override it")
    p.add_argument("--log-level", choices=["debug", "info", "warning", "error"])
    p.add_argument("--seed", type=int)


def _link_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=["modeled", "measured"])
    p.add_argument("--per-access-ms")
    p.add_argument("--per-byte-us")
    p.add_argument("--map", help="address-map file (default: built-in map)")
    p.add_argument("--clock-hz", type=parse_count)
    p.add_argument("--csv", help="write CSV here instead of stdout")
    p.add_argument("--self-hosted", action="store_true", default=None,
                   help="drive a real loopback session even in modeled mode")


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(prog="chessy", description="Breakpoint-mediated co-emulation of a debugger-controlled target with simulated peripherals.")
    sub = parser.add_subparsers(dest="command", required=True)
    leaves = {}

    p = sub.add_parser("target", help="serve a workload script as an emulated target")
    _common(p)
    p.add_argument("--script")
    p.add_argument("--clock-hz", type=parse_count)
    p.add_argument("--listen", type=_endpoint)
    p.add_argument("--symbols-out", help="write the symbol file here")
    p.add_argument("--standalone", action="store_true", default=None,
                   help="run without a debugger; accesses read open-bus zeros")
    p.set_defaults(leaf="target")
    leaves["target"] = p

    p = sub.add_parser("run", help="attach to a target and service its accesses")
    _common(p)
    p.add_argument("--target", type=_endpoint)
    p.add_argument("--map")
    p.add_argument("--symbols")
    p.add_argument("--clock-hz", type=parse_count)
    p.add_argument("--bus-miss", choices=["fatal", "open"])
    p.add_argument("--trace", help="per-access trace CSV")
    p.add_argument("--arm-log", help="robot-arm command log CSV")
    p.add_argument("--script", help="same workload, run locally for the baseline duration")
    p.add_argument("--timeout", type=float)
    p.set_defaults(leaf="run")
    leaves["run"] = p

    p = sub.add_parser("bench", help="overhead benchmarks")
    bsub = p.add_subparsers(dest="bench_command", required=True)
    s = bsub.add_parser("sweep", help="read-compute-write sweep over sizes and compute delays")
    _common(s)
    _link_flags(s)
    s.add_argument("--sizes", type=_int_list)
    s.add_argument("--cycles", type=_int_list)
    s.add_argument("--iters", type=int)
    s.add_argument("--plot-data", help="write grouped series as JSON here")
    s.set_defaults(leaf="sweep")
    leaves["sweep"] = s

    t = bsub.add_parser("temponet", help="TempoNet-shaped EMG workloads")
    _common(t)
    _link_flags(t)
    t.add_argument("--variant", choices=["tns", "tnb", "both"])
    t.add_argument("--iters", type=int)
    t.add_argument("--accesses-per-iter", type=int)
    t.set_defaults(leaf="temponet")
    leaves["temponet"] = t
    return parser, leaves


def _merge(args: argparse.Namespace, leaf: argparse.ArgumentParser) -> None:
    actions = {a.dest: a for a in leaf._actions if a.dest not in ("help", "config", "leaf")}
    if args.config:
        for key, value in read_config(args.config).items():
            action = actions.get(key)
            if action is None:
                raise ConfigError(f"unknown config key {key!r}")
            if getattr(args, key) is not None:
                continue
            if action.nargs == 0:
                parsed = value.lower() in ("1", "true", "yes", "on")
            elif action.type is not None:
                try:
                    parsed = action.type(value)
                except (ValueError, argparse.ArgumentTypeError) as exc:
                    raise ConfigError(f"config key {key!r}: {exc}") from None
            else:
                parsed = value
            setattr(args, key, parsed)
    for dest in actions:
        if getattr(args, dest, None) is None and dest in DEFAULTS:
            action = actions[dest]
            value = DEFAULTS[dest]
            if isinstance(value, str) and action.type is not None:
                value = action.type(value)
            setattr(args, dest, value)
    for dest in actions:
        if getattr(args, dest, None) is None and actions[dest].nargs == 0:
            setattr(args, dest, False)


def _emit(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _link(args) -> bench.LinkModel:
    return bench.LinkModel(args.mode, Fraction(args.per_access_ms), Fraction(args.per_byte_us))


def cmd_target(args) -> int:
    script = WorkloadScript.load(args.script)
    clock = ClockSpec(args.clock_hz)
    if args.symbols_out:
        Path(args.symbols_out).write_text(format_symbols(load_symbols(None)))
    if args.standalone:
        emu = TargetEmulator(script, clock)
        mtime = emu.run_standalone()
        print(f"exit W00 mtime={mtime} accesses={len(emu.trace)}")
        return 0
    host, port = args.listen

    def announce(addr):
        print(f"listening on {addr[0]}:{addr[1]}", flush=True)

    return serve(script, clock, host, port, on_listening=announce)


def cmd_run(args) -> int:
    clock = ClockSpec(args.clock_hz)
    baseline_us = None
    if args.script:
        base = run_baseline(WorkloadScript.load(args.script), clock, load_address_map(args.map),
                            open_bus=args.bus_miss == "open")
        baseline_us = base.duration_us
    host, port = args.target
    cfg = SessionConfig(
        host=host,
        port=port,
        symbols=load_symbols(args.symbols),
        address_map=load_address_map(args.map),
        clock=clock,
        open_bus=args.bus_miss == "open",
        link_timeout=args.timeout,
        baseline_us=baseline_us,
    )
    report = run_session(cfg)
    _emit(report.trace_csv(), args.trace)
    if args.arm_log:
        try:
            arm = cfg.address_map.device("arm")
        except KeyError:
            log.warning("no robot arm mapped; --arm-log ignored")
        else:
            Path(args.arm_log).write_text(arm.log_csv())
    summary = f"exit W{report.exit_code:02x} accesses={report.n_accesses} bytes={report.total_bytes} cost_ms={report.protocol_cost_ms:.3f}"
    if report.overhead_pct is not None:
        summary += f" baseline_us={report.baseline_us} overhead_pct={report.overhead_pct:.3f}"
    print(summary, file=sys.stderr)
    return 0


def cmd_sweep(args) -> int:
    cfg = bench.SweepConfig(
        sizes=args.sizes,
        compute_cycles=args.cycles,
        iterations=args.iters,
        clock=ClockSpec(args.clock_hz),
        link=_link(args),
        seed=args.seed,
        map_text=Path(args.map).read_text() if args.map else None,
        self_hosted=args.self_hosted,
    )
    rows = bench.sweep_rows(cfg)
    _emit(bench.rows_to_csv(rows), args.csv)
    if args.plot_data:
        Path(args.plot_data).write_text(bench.plot_data(rows))
    return 0


def cmd_temponet(args) -> int:
    variants = ["tns", "tnb"] if args.variant == "both" else [args.variant]
    rows = bench.temponet_rows(
        variants, args.iters, _link(args), ClockSpec(args.clock_hz), args.accesses_per_iter,
        map_text=Path(args.map).read_text() if args.map else None, self_hosted=args.self_hosted,
    )
    _emit(bench.rows_to_csv(rows, bench.TEMPONET_COLUMNS), args.csv)
    return 0


COMMANDS = {"target": cmd_target, "run": cmd_run, "sweep": cmd_sweep, "temponet": cmd_temponet}


def main(argv: list[str] | None = None) -> int:
    parser, leaves = build_parser()
    args = parser.parse_args(argv)
    leaf = leaves[args.leaf]
    try:
        _merge(args, leaf)
    except (ConfigError, OSError) as exc:
        leaf.error(str(exc))
    for dest in REQUIRED.get(args.leaf, []):
        if getattr(args, dest) is None:
            leaf.error(f"the following arguments are required: --{dest.replace('_', '-')}")
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.leaf](args)
    except (TimeRegression, MalformedMailbox) as exc:
        log.error("protocol error: %s", exc)
        return EXIT_PROTOCOL
    except LinkError as exc:
        log.error("link error: %s", exc)
        return EXIT_LINK
    except (BusError, MalformedRequest, ChessyError) as exc:
        log.error("session error: %s", exc)
        return EXIT_SESSION
    except (OSError, ValueError) as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
