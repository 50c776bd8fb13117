# src/cli.py
"""
Command-line front-end.

    python -m src.cli simulate scenarios/basic.yaml
    python -m src.cli sweep --strategy dual-full --half 4
    python -m src.cli attack scenarios/brute_force.yaml scenarios/basic_small_key.yaml
    python -m src.cli efficiency --strategy basic --n 127
    python -m src.cli mtbf --rate 1e15 --bits 128
    python -m src.cli vectors
"""
import argparse
import logging
import os
import sys
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional

from dotenv import load_dotenv
from pydantic import ValidationError

from .adversary import SECONDS_PER_YEAR, predicted_mtbf, run_attack_campaign
from .channel import best_case_burst, burst_sweep, max_tolerated_burst, run, summarize_sweep
from .config import load_adversary, load_scenario, load_settings, parse_strategy, strategy_label
from .errors import InvalidArgument
from .report import render_fraction, to_csv, to_json
from .transmitter import theoretical_efficiency
from .wire import frame_to_dict, golden_vectors

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2

_STRATEGY_KINDS = {
    "basic": "basic",
    "overlapped": "overlapped",
    "dual-full": "dual_full",
    "dual-sparse": "dual_sparse",
}


def _configure_logging() -> None:
    load_dotenv()
    level = os.getenv("TRUDI_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )


def _strategy_from_args(args) -> Dict:
    if args.strategy is None:
        raise InvalidArgument("--strategy is required")
    kind = _STRATEGY_KINDS[args.strategy]
    data: Dict = {"kind": kind, "hash": {"algorithm": args.algorithm, "key_bits": args.key_bits}}
    if kind in ("basic", "overlapped", "dual_sparse"):
        data["n"] = args.n
    if kind == "overlapped":
        data["q"] = args.q
    if kind == "dual_full":
        data["half"] = args.half
        data["j_keys"] = args.j_keys
    if kind == "dual_sparse":
        data["m"] = args.m
    return data


# -------------------
# Commands
# -------------------

def cmd_simulate(args) -> List[Dict]:
    scenario = load_scenario(args.scenario)
    if args.seed is not None:
        scenario = scenario.model_copy(update={"seed": args.seed})
    return [run(scenario).to_dict()]


def cmd_sweep(args) -> Dict:
    if args.config:
        config = load_scenario(args.config).strategy
    else:
        config = parse_strategy(_strategy_from_args(args))
    workers = args.workers or load_settings().sweep_workers
    rows = burst_sweep(config, horizon=args.horizon, workers=workers)
    summary = summarize_sweep(rows)
    return {
        "strategy": strategy_label(config),
        "max_tolerated_burst": max_tolerated_burst(config),
        "best_case_burst": best_case_burst(config),
        "sweep": summary,
        "rows": [r.to_dict() for r in rows],
    }


def cmd_attack(args) -> List[Dict]:
    adversary = load_adversary(args.adversary)
    scenario = load_scenario(args.scenario)
    if args.seed is not None:
        scenario = scenario.model_copy(update={"seed": args.seed})
    return [run_attack_campaign(adversary, scenario).to_dict()]


def cmd_efficiency(args) -> List[Dict]:
    config = parse_strategy(_strategy_from_args(args))
    return [{
        "strategy": strategy_label(config),
        "eta_kt": render_fraction(theoretical_efficiency(config)),
        "period_frames": config.period_frames,
        "keys_per_period": config.keys_per_period,
    }]


def cmd_mtbf(args) -> List[Dict]:
    try:
        rate = Fraction(args.rate)
    except (ValueError, ZeroDivisionError) as e:
        raise InvalidArgument(f"bad --rate {args.rate!r}") from e
    seconds = predicted_mtbf(rate, args.bits)
    return [{
        "hash_rate": render_fraction(rate),
        "key_bits": args.bits,
        "mtbf_seconds": render_fraction(seconds),
        "mtbf_years": render_fraction(seconds / SECONDS_PER_YEAR),
    }]


def cmd_vectors(args) -> List[Dict]:
    return [
        {
            "name": v["name"],
            "key_bytes": v["key_bytes"],
            "sc_key": v["sc_key"],
            "frame": frame_to_dict(v["frame"]),
            "encoded": v["encoded"],
        }
        for v in golden_vectors()
    ]


# -------------------
# Parser
# -------------------

def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    parser.add_argument("--output", type=Path, default=None, help="write results here instead of stdout")
    parser.add_argument("--format", choices=["json", "csv"], default="json")


def _add_strategy(parser: argparse.ArgumentParser, required: bool) -> None:
    defaults = load_settings().hash
    parser.add_argument("--strategy", choices=sorted(_STRATEGY_KINDS), required=required)
    parser.add_argument("--n", type=int, default=127, help="chain length (basic, overlapped, dual-sparse)")
    parser.add_argument("--q", type=int, default=1, help="adjacent J-frames (overlapped)")
    parser.add_argument("--half", "--N", dest="half", type=int, default=64, help="half length N (dual-full)")
    parser.add_argument("--j-keys", type=int, choices=[2, 3], default=2, help="keys per J-frame (dual-full)")
    parser.add_argument("--m", type=int, default=3, help="start-up key spacing (dual-sparse)")
    parser.add_argument("--algorithm", default=defaults.algorithm)
    parser.add_argument("--key-bits", type=int, default=defaults.key_bits)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trudi", description="TRUDI origin-authentication simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one scenario file")
    p.add_argument("scenario", type=Path)
    _add_common(p)
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("sweep", help="exhaustive burst-loss sweep")
    p.add_argument("--config", type=Path, default=None, help="scenario file whose strategy is swept")
    p.add_argument("--horizon", type=int, default=None, help="frames per run (>= two periods)")
    p.add_argument("--workers", type=int, default=None)
    _add_strategy(p, required=False)
    _add_common(p)
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("attack", help="run an attack campaign")
    p.add_argument("adversary", type=Path)
    p.add_argument("scenario", type=Path)
    _add_common(p)
    p.set_defaults(handler=cmd_attack)

    p = sub.add_parser("efficiency", help="closed-form key transmission efficiency")
    _add_strategy(p, required=True)
    _add_common(p)
    p.set_defaults(handler=cmd_efficiency)

    p = sub.add_parser("mtbf", help="mean time before a keychain is brute-forced")
    p.add_argument("--rate", required=True, help="hashes per second, e.g. 1e15")
    p.add_argument("--bits", type=int, required=True)
    _add_common(p)
    p.set_defaults(handler=cmd_mtbf)

    p = sub.add_parser("vectors", help="golden frame encodings")
    _add_common(p)
    p.set_defaults(handler=cmd_vectors)
    return parser


def _render(result, fmt: str) -> str:
    if fmt == "csv":
        rows = result["rows"] if isinstance(result, dict) else result
        return to_csv(rows)
    payload = result[0] if isinstance(result, list) and len(result) == 1 else result
    return to_json(payload) + "\n"


def main(argv: Optional[List[str]] = None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code not in (0, None) else EXIT_OK

    try:
        result = args.handler(args)
    except (InvalidArgument, ValidationError) as e:
        print(f"trudi {args.command}: {e}", file=sys.stderr)
        return EXIT_CONFIG

    text = _render(result, args.format)
    if args.output:
        args.output.write_text(text, encoding="utf-8")
        logger.info(f"Wrote {args.output}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
