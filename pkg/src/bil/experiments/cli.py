"""``bil <command> --config <path.json> [--out <dir>] [--threads <n>]``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ..errors import BilError, ConfigurationError, FieldFormatError, InfeasibleSchedule, SolverError
from .commands import EXIT_CONFIG, EXIT_FAIL, run
from .config import COMMANDS, load_config


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bil", description="Spectral toolkit and experiment harness.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--out", default=None, help="output directory (default: config 'out' or out/<command>)")
    p.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.threads < 1:
            raise ConfigurationError("--threads must be >= 1")
        cfg = load_config(args.config)
        if cfg.command != args.command:
            raise ConfigurationError(f"config is for '{cfg.command}', not '{args.command}'")
        out = Path(args.out or cfg.out or Path("out") / args.command)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{args.command}_config.json").write_text(json.dumps(cfg.to_json(), indent=2, sort_keys=True) + "\n")
        oc = run(cfg, out, args.threads)
    except (ConfigurationError, InfeasibleSchedule, FieldFormatError) as exc:
        print(f"bil: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"bil: solver failure: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except BilError as exc:
        print(f"bil: {exc}", file=sys.stderr)
        return EXIT_FAIL
    status = {0: "PASS", 1: "FAIL", 2: "INFEASIBLE"}[oc.status]
    line = f"{args.command}: {status}"
    if oc.first_failure:
        line += f" (first failure: {oc.first_failure})"
    if "feasibility" in oc.notes:
        line += f" [{oc.notes['feasibility']}]"
    print(line)
    return oc.status


if __name__ == "__main__":
    sys.exit(main())
