"""Command line entry point: ``lana {gen,solve,run,verify} [--config PATH] [--key VALUE ...]``.

Every config field can be given as a flag; nested fields use dots
(``--generator.n 5``) and dashes stand for underscores (``--update-mode``).
Values are parsed as JSON when possible (``--seeds [0,1]``), otherwise kept
as strings. Flags override the document loaded with ``--config``.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ConfigError, RunConfig, _set_path, parse_config
from .harness import EXIT_COMPONENT, EXIT_CONFIG, EXIT_INVARIANT, EXIT_OK, GameValidationError, load_game, run_command
from .nash import NashConvergenceError, solve_nash


def _overrides(extra: list[str]) -> dict:
    doc: dict = {}
    i = 0
    while i < len(extra):
        flag = extra[i]
        if not flag.startswith("--") or i + 1 >= len(extra):
            raise ConfigError(flag, "expected '--key value' pairs")
        key = flag[2:].replace("-", "_")
        raw = extra[i + 1]
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        _set_path(doc, key, value)
        i += 2
    return doc


def _merge(base: dict, over: dict) -> dict:
    out = dict(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def build_config(config_path: str | None, extra: list[str]) -> RunConfig:
    doc = {}
    if config_path:
        try:
            doc = json.loads(Path(config_path).read_text())
        except OSError as e:
            raise ConfigError("--config", f"cannot read ({e.strerror})") from None
        except json.JSONDecodeError as e:
            raise ConfigError("--config", f"invalid JSON ({e.msg})") from None
    return parse_config(_merge(doc, _overrides(extra)))


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="lana", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("gen", "emit a random game file"),
        ("solve", "compute the Nash equilibrium of every context"),
        ("run", "run the dynamics for every seed and write CSV/JSON/SVG"),
        ("verify", "run the acceptance battery and print a pass/fail table"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="JSON config document")
        if name in ("gen", "solve"):
            p.add_argument("--out", help="write to this file instead of stdout")
    args, extra = parser.parse_known_args(argv)

    try:
        cfg = build_config(args.config, extra)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except TypeError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "verify":
        from .battery import run_battery

        results = run_battery(cfg)
        for r in results:
            print(r.line())
        failed = [r for r in results if not r.passed]
        print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
        return EXIT_INVARIANT if failed else EXIT_OK

    try:
        g = load_game(cfg)
    except GameValidationError as e:
        print(f"invalid game: {e}", file=sys.stderr)
        return EXIT_INVARIANT
    except OSError as e:
        print(f"config error: game_file: {e}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "gen":
        _emit(g.to_json(), args.out)
        return EXIT_OK

    if args.command == "solve":
        try:
            nash = solve_nash(g, cfg.nash_tol, cfg.nash_max_iter)
        except NashConvergenceError as e:
            print(f"solver failure: {e}", file=sys.stderr)
            return EXIT_COMPONENT
        _emit(json.dumps(nash.to_dict(), indent=1), args.out)
        return EXIT_OK

    code, summary = run_command(cfg)
    if "error" in summary:
        print(summary["error"], file=sys.stderr)
    else:
        print(f"wrote outputs to {cfg.output_dir} (exit {code})")
    return code


if __name__ == "__main__":
    sys.exit(main())
