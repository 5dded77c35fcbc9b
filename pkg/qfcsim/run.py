from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

from pydantic import ValidationError

from .errors import ScenarioError
from .report import ReportFormat, ReportMeta, Table, emit_report
from .scenario import Scenario, load_scenario, scenario_hash, with_seed
from .settings import get_env_settings
from .stages import STAGES, run_stage

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_STAGE = 3
EXIT_IO = 4


def format_validation_error(exc: ValidationError) -> List[str]:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(part) for part in err.get("loc", ())) or "<root>"
        lines.append(f"{loc}: {err.get('msg', 'invalid value')}")
    return lines


def resolve_output_dir(flag: Optional[str], scenario: Scenario, env_default: Path) -> Path:
    if flag:
        return Path(flag)
    if scenario.outputs:
        return Path(scenario.outputs)
    return env_default


def selected_stages(command: str) -> List[str]:
    return list(STAGES) if command == "all" else [command]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--config",
        default="paper-defaults",
        help="Scenario JSON file, or the name of a bundled scenario",
    )
    common.add_argument("--seed", type=int, default=None, help="Override the scenario root seed")
    common.add_argument("--out", default=None, help="Output directory")
    common.add_argument("--format", choices=["csv", "json", "both"], default="both")
    common.add_argument(
        "--workers",
        type=int,
        default=None,
        help="Threads for per-channel work (default QFC_WORKERS or 1)",
    )
    common.add_argument("--verbose", action="store_true", help="Debug logging")

    parser = argparse.ArgumentParser(prog="qfcsim")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "spectrum": "Fit the resonance comb and tabulate the tuning coefficients",
        "hysteresis": "Forward/backward heater sweeps at each pump power",
        "lock": "Closed- and open-loop transmission under resonance drift",
        "tomo": "Per-channel tomography, fidelities and visibilities",
        "power-fit": "Singles versus pump power fits and resonance classification",
        "jsi": "Joint spectral intensity over all channel pairs",
        "metrics": "CAR sweep, bandwidths, brightness and efficiencies",
        "all": "Run every stage",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text)
    return parser


def run_scenario(
    config: Union[str, Path],
    command: str = "all",
    seed: Optional[int] = None,
    out: Optional[str] = None,
    fmt: ReportFormat = "both",
    workers: Optional[int] = None,
) -> int:
    """Load, run the selected stages, and write the report. Returns the exit status."""
    settings = get_env_settings()
    try:
        scenario = load_scenario(config)
        if seed is not None:
            scenario = with_seed(scenario, seed)
    except ValidationError as exc:
        print(f"Invalid scenario {config}:", file=sys.stderr)
        for line in format_validation_error(exc):
            print(f"  {line}", file=sys.stderr)
        return EXIT_CONFIG
    except (ScenarioError, OSError) as exc:
        print(f"Cannot load scenario: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    width = workers if workers and workers > 0 else settings.workers
    out_dir = resolve_output_dir(out, scenario, settings.output_dir)
    meta = ReportMeta(scenario_hash(scenario), scenario.root_seed)

    tables: Dict[str, Table] = {}
    summary: Dict[str, Any] = {}
    for name in selected_stages(command):
        try:
            result = run_stage(name, scenario, width)
        except ScenarioError as exc:
            print(f"Stage {exc.stage} failed: {exc}", file=sys.stderr)
            return EXIT_STAGE
        tables.update(result.tables)
        summary[name] = result.summary

    try:
        written = emit_report(tables, out_dir, fmt, meta, summary)
    except OSError as exc:
        print(f"Cannot write report to {out_dir}: {exc}", file=sys.stderr)
        return EXIT_IO

    print(f"{len(written)} files written to {out_dir} (scenario {meta.scenario_hash}, seed {meta.root_seed})")
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    settings = get_env_settings()
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else getattr(logging, settings.log_level, logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    return run_scenario(args.config, args.command, args.seed, args.out, args.format, args.workers)


if __name__ == "__main__":
    raise SystemExit(main())
