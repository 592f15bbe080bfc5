"""Command-line entry point.

Subcommands: sweep-power, sweep-reach, dump-constellation, dump-regions,
validate-channel.  A run is configured by a flat KEY = VALUE text file
(see README for the schema) plus command-line overrides; the resolved
config is written next to each CSV as a .config.json sidecar.
"""

import argparse
import dataclasses
import logging
import os
import sys

from .errors import ConfigError
from .harness import (
    RunConfig,
    dump_constellation,
    dump_regions,
    reach_at_q_threshold,
    sweep_power,
    sweep_reach,
    validate_channel,
    write_config_sidecar,
    write_sweep_csv,
)

_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(RunConfig)}


def _parse_value(name: str, raw: str):
    kind = _FIELD_TYPES[name]
    raw = raw.strip()
    if kind is bool:
        if raw.lower() in ("1", "true", "on", "yes"):
            return True
        if raw.lower() in ("0", "false", "off", "no"):
            return False
        raise ConfigError(f"{name}: cannot parse boolean from {raw!r}")
    if kind is int:
        return int(raw)
    if kind is float:
        return float(raw)
    if kind is tuple:
        items = [s for s in (part.strip() for part in raw.split(",")) if s]
        if name == "detectors":
            return tuple(items)
        return tuple(float(s) for s in items)
    return raw


def parse_config_file(path: str) -> dict:
    """Flat KEY = VALUE file; '#' starts a comment, blank lines ignored."""
    values = {}
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected KEY = VALUE, got {line!r}")
            key, raw = (s.strip() for s in line.split("=", 1))
            if key not in _FIELD_TYPES:
                raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
            values[key] = _parse_value(key, raw)
    return values


def build_config(args: argparse.Namespace) -> RunConfig:
    values = parse_config_file(args.config) if args.config else {}
    overrides = {
        "seed": args.seed,
        "workers": args.workers,
        "symbol_rate_gbaud": args.baud,
        "n_spans": args.spans,
        "n_test": args.n_test,
        "ssfm_step_km": args.step_km,
        "samples_per_symbol": args.sps,
    }
    if args.dm is not None:
        overrides["dispersion_managed"] = args.dm == "on"
    if getattr(args, "powers", None):
        overrides["launch_powers_dbm"] = tuple(args.powers)
    if getattr(args, "reaches", None):
        overrides["reaches_km"] = tuple(args.reaches)
    values.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**values)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat KEY = VALUE config file")
    parser.add_argument("--seed", type=int, help="master seed (64-bit unsigned)")
    parser.add_argument("--workers", type=int, help="concurrent sweep points")
    parser.add_argument("--out", default="results", help="output directory")
    parser.add_argument("--baud", type=float, help="symbol rate in Gbaud")
    parser.add_argument("--spans", type=int, help="number of 80 km spans")
    parser.add_argument("--dm", choices=["on", "off"], help="dispersion management")
    parser.add_argument("--n-test", dest="n_test", type=int, help="test symbols per polarization")
    parser.add_argument("--step-km", dest="step_km", type=float, help="split-step size")
    parser.add_argument("--sps", type=int, help="samples per symbol during propagation")


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = argparse.ArgumentParser(prog="pwlink")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep-power", help="Q-factor vs launch power")
    _add_common(p)
    p.add_argument("--powers", type=float, nargs="+", help="launch powers in dBm")
    p.add_argument("--csv-name", default="sweep_power.csv")

    p = sub.add_parser("sweep-reach", help="Q-factor vs reach at fixed power")
    _add_common(p)
    p.add_argument("--powers", type=float, nargs="+", help="the single fixed power in dBm")
    p.add_argument("--reaches", type=float, nargs="+", help="reaches in km")
    p.add_argument("--csv-name", default="sweep_reach.csv")

    p = sub.add_parser("dump-constellation", help="post-DSP symbol cloud of one point")
    _add_common(p)
    p.add_argument("--power-dbm", type=float, required=True)
    p.add_argument("--csv-name", default="constellation.csv")

    p = sub.add_parser("dump-regions", help="PW decision-region raster of one point")
    _add_common(p)
    p.add_argument("--power-dbm", type=float, required=True)
    p.add_argument("--grid-n", type=int, default=64)
    p.add_argument("--pol", choices=["x", "y"], default="x")
    p.add_argument("--csv-name", default="regions.csv")

    p = sub.add_parser("validate-channel", help="analytic propagation checks")
    _add_common(p)

    args = parser.parse_args(argv)
    try:
        cfg = build_config(args)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    os.makedirs(args.out, exist_ok=True)

    try:
        if args.command == "sweep-power":
            rows = sweep_power(cfg)
            path = os.path.join(args.out, args.csv_name)
            write_sweep_csv(rows, path)
            write_config_sidecar(cfg, path)
            print(f"wrote {path} ({len(rows)} rows)")
        elif args.command == "sweep-reach":
            rows = sweep_reach(cfg)
            path = os.path.join(args.out, args.csv_name)
            write_sweep_csv(rows, path)
            write_config_sidecar(cfg, path)
            for det in cfg.detectors:
                reach = reach_at_q_threshold(rows, det)
                txt = "not bracketed" if reach is None else f"{reach:.0f} km"
                print(f"reach at Q = 10 dB [{det}]: {txt}")
            print(f"wrote {path} ({len(rows)} rows)")
        elif args.command == "dump-constellation":
            path = os.path.join(args.out, args.csv_name)
            dump_constellation(cfg, args.power_dbm, path)
            write_config_sidecar(cfg, path)
            print(f"wrote {path}")
        elif args.command == "dump-regions":
            path = os.path.join(args.out, args.csv_name)
            dump_regions(cfg, args.power_dbm, path, n_cells=args.grid_n, polarization=args.pol)
            write_config_sidecar(cfg, path)
            print(f"wrote {path}")
        elif args.command == "validate-channel":
            ok, checks = validate_channel(cfg)
            for name, passed, detail in checks:
                print(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")
            return 0 if ok else 1
    except (ConfigError, ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
