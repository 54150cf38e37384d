"""`walk` subcommand: initial and final distributions of a single walker"""
import argparse
import logging
from pathlib import Path

import numpy as np

from src import config
from src.agent import write_json
from src.exceptions import ConfigError, InvalidDimension, InvalidIndex
from src.services.analytics_service import AnalyticsService
from src.services.walk_engine import CoinParams, WalkConfig, evolve, initial_state, walker_distribution

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser('walk', help="Evolve one walker and dump its position distributions")
    parser.add_argument('--dim', type=int, default=config.DEFAULT_POSITION_DIM, help="Cycle size M")
    parser.add_argument('--start', type=int, required=True, help="Initial position x")
    parser.add_argument('--steps', type=int, required=True, help="Number of walk steps t")
    parser.add_argument('--coin', type=int, default=0, choices=(0, 1), help="Initial coin state")
    parser.add_argument('--theta', type=float, default=CoinParams().theta, help="Coin angle theta")
    parser.add_argument('--out', type=Path, required=True, help="Output JSON file")
    parser.add_argument('--gnuplot', type=Path, help="Also write whitespace-separated columns here")
    parser.set_defaults(handler=run_walk)


def run_walk(args: argparse.Namespace) -> int:
    if args.steps < 0:
        raise ConfigError(f"--steps must be >= 0, got {args.steps}")
    try:
        walk = WalkConfig(args.dim, CoinParams(theta=args.theta))
        start = initial_state(walk, args.start, args.coin)
    except (InvalidDimension, InvalidIndex) as e:
        raise ConfigError(str(e))

    final = evolve(start, walk, args.steps)
    initial_probs = walker_distribution(start)
    final_probs = walker_distribution(final)
    if not np.isclose(final_probs.sum(), 1.0, atol=config.AMPLITUDE_TOLERANCE):
        logger.warning(f"Final distribution sums to {final_probs.sum():.12f}")

    args.out.parent.mkdir(parents=True, exist_ok=True)
    write_json(args.out, {
        'labels': list(range(args.dim)),
        'initial': initial_probs.tolist(),
        'final': final_probs.tolist(),
        'metadata': {
            'dim': args.dim,
            'start': args.start,
            'steps': args.steps,
            'coin': args.coin,
            'theta': args.theta,
        },
    })
    if args.gnuplot:
        analytics = AnalyticsService()
        frame = analytics.distribution_frame(initial_probs, final_probs)
        analytics.write_gnuplot_columns(
            frame, args.gnuplot, f"walk M={args.dim} start={args.start} steps={args.steps}",
        )
    logger.info(f"Walk M={args.dim} from {args.start} for {args.steps} steps written to {args.out}")
    return 0
