"""Chain subcommands: build, verify and tamper experiments"""
import argparse
import json
import logging
from pathlib import Path
from typing import Any, Dict, List

import numpy as np

from src import config
from src.agent import write_json
from src.exceptions import ConfigError, StoreError
from src.services.analytics_service import AnalyticsService
from src.services.block_chain import (
    ChainParams,
    TamperKind,
    build_block,
    sampled_acceptance_bound,
    tamper_block,
    validate_block,
)
from src.services.chain_store import ChainStore, build_synthetic_chain
from src.services.qw_hash import HashParams
from src.services.walk_engine import CoinParams

logger = logging.getLogger(__name__)

PARAMS_FILE = 'chain_params.json'


def _add_chain_params(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--dim', type=int, default=config.DEFAULT_POSITION_DIM, help="Cycle size M")
    parser.add_argument('--walkers', type=int, default=config.DEFAULT_WALKERS, help="Walkers per block n")
    parser.add_argument('--step-bound', type=int, default=config.DEFAULT_STEP_BOUND, help="Step bound t_max")
    parser.add_argument('--cycle', type=int, default=config.HASH_CYCLE_SIZE, help="Hash cycle size n_h")


def register(subparsers) -> None:
    build = subparsers.add_parser('chain-build', help="Build an honest chain from synthetic signed transactions")
    build.add_argument('--out', type=Path, required=True, help="Chain directory to create")
    build.add_argument('--blocks', type=int, default=10, help="Number of blocks")
    build.add_argument('--transactions', type=int, default=2, help="Transactions per block")
    build.add_argument('--seed', type=int, help="Seed for keys and payloads")
    _add_chain_params(build)
    build.set_defaults(handler=run_chain_build)

    verify = subparsers.add_parser('chain-verify', help="Re-validate every block of a stored chain")
    verify.add_argument('--chain', type=Path, required=True, help="Chain directory")
    verify.add_argument('--sampled', action='store_true', help="One seeded measurement per walker")
    verify.add_argument('--seed', type=int, help="Seed for sampled validation")
    verify.add_argument('--out', type=Path, help="Write the chain report as JSON")
    verify.set_defaults(handler=run_chain_verify)

    tamper = subparsers.add_parser('tamper-experiment', help="Mutate one block repeatedly and measure detection")
    tamper.add_argument('--chain', type=Path, required=True, help="Chain directory")
    tamper.add_argument('--block', type=int, required=True, help="Index of the block to mutate")
    tamper.add_argument(
        '--mutation', choices=[kind.value for kind in TamperKind], default=TamperKind.TX_BYTE.value,
    )
    tamper.add_argument('--trials', type=int, default=1000, help="Number of mutation trials")
    tamper.add_argument('--sampled', action='store_true', help="One seeded measurement per walker")
    tamper.add_argument('--seed', type=int, help="Seed for mutations and measurements")
    tamper.add_argument('--out', type=Path, help="Write the tamper report as JSON")
    tamper.set_defaults(handler=run_tamper_experiment)


def chain_params_from_args(args: argparse.Namespace) -> ChainParams:
    return ChainParams(
        n_walkers=args.walkers,
        position_dim=args.dim,
        step_bound=args.step_bound,
        coin=CoinParams(),
        hash_params=HashParams(cycle_size=args.cycle),
    )


def save_chain_params(chain_dir: Path, params: ChainParams) -> None:
    write_json(chain_dir / PARAMS_FILE, {
        'n_walkers': params.n_walkers,
        'position_dim': params.position_dim,
        'step_bound': params.step_bound,
        'hash_cycle': params.hash_params.cycle_size,
        'coin': {'xi': params.coin.xi, 'theta': params.coin.theta, 'eta': params.coin.eta},
    })


def load_chain_params(chain_dir: Path) -> ChainParams:
    """Parameters recorded next to the blocks by ``chain-build``"""
    path = Path(chain_dir) / PARAMS_FILE
    if not path.is_file():
        raise StoreError(f"No {PARAMS_FILE} in {chain_dir}")
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
        return ChainParams(
            n_walkers=data['n_walkers'],
            position_dim=data['position_dim'],
            step_bound=data['step_bound'],
            coin=CoinParams(**data['coin']),
            hash_params=HashParams(cycle_size=data['hash_cycle']),
        )
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise StoreError(f"Corrupt {path}: {e}")


def open_chain(chain_dir: Path) -> ChainStore:
    chain_dir = Path(chain_dir)
    if not chain_dir.is_dir():
        raise StoreError(f"Chain directory not found: {chain_dir}")
    return ChainStore.open_existing(chain_dir, load_chain_params(chain_dir))


def run_chain_build(args: argparse.Namespace) -> int:
    if args.blocks < 1 or args.transactions < 1:
        raise ConfigError("--blocks and --transactions must be positive")
    params = chain_params_from_args(args)
    store = ChainStore(args.out, params)
    if len(store):
        raise StoreError(f"{args.out} already holds {len(store)} blocks")

    save_chain_params(args.out, params)
    rng = np.random.default_rng(args.seed)
    blocks = build_synthetic_chain(store, args.blocks, args.transactions, rng)
    print(f"built {len(blocks)} blocks in {args.out}, tip {store.tip_hash().hex()}")
    return 0


def run_chain_verify(args: argparse.Namespace) -> int:
    store = open_chain(args.chain)
    report = store.verify(rng=np.random.default_rng(args.seed), sampled=args.sampled)
    if args.out:
        write_json(args.out, report.to_dict())

    if report.accepted:
        print(f"accept: {report.blocks_checked} blocks")
        return 0
    failure = report.failures[0]
    print(f"reject: block {failure.block_index}: {'; '.join(failure.evidence)}")
    return 1


def _expected_detection_rate(kind: TamperKind, params: ChainParams, sampled: bool):
    if kind in (TamperKind.TX_BYTE, TamperKind.PREV_HASH):
        return 1.0
    if kind is TamperKind.STATE_SUBSTITUTION:
        return 1.0 - sampled_acceptance_bound(params) if sampled else 1.0
    return None


def run_tamper_experiment(args: argparse.Namespace) -> int:
    if args.trials < 1:
        raise ConfigError(f"--trials must be positive, got {args.trials}")
    store = open_chain(args.chain)
    if not 0 <= args.block < len(store):
        raise StoreError(f"Block {args.block} is outside the chain (length {len(store)})")

    params = store.params
    rng = np.random.default_rng(args.seed)
    baseline = store.verify(rng=rng, sampled=args.sampled)
    if not baseline.accepted:
        print(f"reject: baseline chain fails at block {baseline.first_failure}")
        return 1

    block = store.load_block(args.block)
    prev_hash = (
        store.load_block(args.block - 1).header.own_hash if args.block else params.genesis_hash()
    )
    kind = TamperKind(args.mutation)
    donor = None
    if kind is TamperKind.STEP_REPLAY:
        donor = build_block(
            prev_hash, block.body.transactions, block.header.timestamp + 1, params, index=block.index,
        )

    trials: List[Dict[str, Any]] = []
    for _ in range(args.trials):
        mutated = tamper_block(block, kind, rng, donor=donor)
        result = validate_block(mutated, prev_hash, params, rng=rng, sampled=args.sampled)
        trials.append({'internal_ok': result.internal_ok, 'linkage_ok': result.linkage_ok})

    analytics = AnalyticsService()
    summary = analytics.summarize_tamper_trials(
        trials,
        block_index=args.block,
        mutation=kind.value,
        sampled=args.sampled,
        expected_detection_rate=_expected_detection_rate(kind, params, args.sampled),
    )
    report = analytics.tamper_report(summary)
    if args.out:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        write_json(args.out, report)
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0
