"""Command-line entry point.

Subcommands:
    run            execute an experiment from a config file and/or overrides
    list-problems  show registered problems
    list-presets   show named configuration presets

Exit codes: 0 on success, 1 on configuration errors, 2 when any seed fails at
runtime.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError, build_experiment, describe_presets, parse_config_text
from .problems import list_problems
from .runner import run_experiment

__all__ = ["main"]


def _parse_overrides(tokens: list[str]) -> dict[str, str]:
    if len(tokens) % 2 != 0:
        raise ConfigError(f"overrides must come in --key value pairs, got {tokens}")
    out = {}
    for flag, value in zip(tokens[::2], tokens[1::2]):
        if not flag.startswith("--") or len(flag) <= 2:
            raise ConfigError(f"expected --key, got {flag!r}")
        out[flag[2:].replace("-", "_")] = value
    return out


def _cmd_run(args, extra: list[str]) -> int:
    mapping: dict[str, str] = {}
    if args.config is not None:
        path = Path(args.config)
        if not path.exists():
            print(f"config file not found: {path}", file=sys.stderr)
            return 1
        mapping.update(parse_config_text(path.read_text()))
    mapping.update(_parse_overrides(extra))
    if not mapping:
        raise ConfigError("nothing to run: pass --config and/or --key value overrides")
    exp = build_experiment(mapping)
    result = run_experiment(exp)
    for seed in sorted(result.seed_paths):
        status = "FAILED" if seed in result.failures else "ok"
        print(f"seed {seed}: {status} -> {result.seed_paths[seed]}")
    if result.aggregate_path is not None:
        print(f"aggregate -> {result.aggregate_path}")
    if result.failures:
        for seed, msg in sorted(result.failures.items()):
            print(f"seed {seed} failed:\n{msg}", file=sys.stderr)
        return 2
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="cibo",
        description="Constrained black-box optimization benchmark runner",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="run an experiment")
    run_p.add_argument("--config", help="path to a key=value config file")
    sub.add_parser("list-problems", help="show registered problems")
    sub.add_parser("list-presets", help="show named presets")

    args, extra = parser.parse_known_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args, extra)
        if args.command == "list-problems":
            for name, desc in sorted(list_problems().items()):
                print(f"{name:12s} {desc}")
            return 0
        if args.command == "list-presets":
            for name, desc in describe_presets().items():
                print(f"{name:18s} {desc}")
            return 0
    except ConfigError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return 1
    except Exception as err:  # pragma: no cover - defensive
        print(f"runtime error: {err}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
