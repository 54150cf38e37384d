"""Election and end-to-end simulation subcommands"""
import argparse
import json
import logging
import shutil
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np

from src import config
from src.agent import NetworkHarness, run_directory, write_json
from src.exceptions import ConfigError, StoreError
from src.services.analytics_service import AnalyticsService
from src.services.qdpos_voting import BallotMatrix

logger = logging.getLogger(__name__)


def _add_scenario_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        '--config', type=Path, default=config.REFERENCE_SCENARIO_FILE, help="Scenario key-value file",
    )
    parser.add_argument('--seed', type=int, help="Seed; also fixes the output subdirectory name")
    parser.add_argument('--out-dir', type=Path, default=Path('runs'), help="Base output directory")


def register(subparsers) -> None:
    election = subparsers.add_parser('election', help="Run one weighted representative election")
    _add_scenario_args(election)
    election.add_argument('--ballots', type=Path, help="JSON file pinning ballot matrices and indices")
    election.set_defaults(handler=run_election)

    simulate = subparsers.add_parser('simulate', help="Election, production rounds, incentives and sync")
    _add_scenario_args(simulate)
    simulate.set_defaults(handler=run_simulate)


def load_pinned_ballots(path: Path) -> Tuple[Dict[str, BallotMatrix], Dict[str, list]]:
    """``{"dim": d, "candidates": {k: {"matrix": [[...]], "indices": [...]}}}``"""
    if not path.is_file():
        raise StoreError(f"Ballot file not found: {path}")
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
        dim = int(data['dim'])
        ballots, indices = {}, {}
        for candidate, entry in data['candidates'].items():
            entries = np.array(entry['matrix'], dtype=np.int64)
            if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
                raise ValueError(f"ballot matrix for {candidate} is not square")
            ballots[candidate] = BallotMatrix(candidate, entries % dim, dim)
            indices[candidate] = [int(g) for g in entry['indices']]
        return ballots, indices
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise StoreError(f"Corrupt ballot file {path}: {e}")


def _scenario(args: argparse.Namespace) -> Dict:
    scenario = config.load_scenario(args.config)
    logger.info(f"Loaded scenario {args.config} with {len(scenario.get('VOTERS', []))} voters")
    return scenario


def run_election(args: argparse.Namespace) -> int:
    scenario = _scenario(args)
    ballots: Optional[Dict[str, BallotMatrix]] = None
    indices = None
    if args.ballots:
        ballots, indices = load_pinned_ballots(args.ballots)

    output_dir = run_directory(args.out_dir, args.seed)
    harness = NetworkHarness(scenario, seed=args.seed)
    result = harness.run_election(ballots=ballots, indices=indices)
    write_json(output_dir / 'election_transcript.json', result.transcript)

    frame = AnalyticsService().election_frame(result.transcript)
    for row in frame.itertuples():
        marker = '*' if row.elected else ' '
        print(f"{marker} {row.candidate}: {row.total} {row.row_results}")
    print(f"elected {', '.join(result.elected)}; output in {output_dir}")
    return 0


def run_simulate(args: argparse.Namespace) -> int:
    scenario = _scenario(args)
    if not scenario.get('VALIDATORS'):
        raise ConfigError("A simulation needs VALIDATORS in its scenario")

    output_dir = run_directory(args.out_dir, args.seed)
    chain_dir = output_dir / 'chain'
    if chain_dir.exists():
        shutil.rmtree(chain_dir)
    harness = NetworkHarness(scenario, seed=args.seed, chain_dir=chain_dir)
    outcome = harness.simulate(output_dir)
    summary = outcome['summary']
    print(
        f"elected {', '.join(summary['elected'])}; {summary['blocks']} blocks; "
        f"balances {summary['balances']}; output in {output_dir}"
    )
    return 0
