"""`hash` subcommand: quantum-walk digest of a file"""
import argparse
import logging
from pathlib import Path

from src import config
from src.exceptions import StoreError
from src.services.qw_hash import HashParams, hash_message

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser('hash', help="Print the quantum-walk hash of a file as hex")
    parser.add_argument('--input', required=True, type=Path, help="File to hash")
    parser.add_argument('--cycle', type=int, default=config.HASH_CYCLE_SIZE, help="Cycle size n_h")
    parser.set_defaults(handler=run_hash)


def run_hash(args: argparse.Namespace) -> int:
    if not args.input.is_file():
        raise StoreError(f"Input file not found: {args.input}")
    message = args.input.read_bytes()
    digest = hash_message(message, HashParams(cycle_size=args.cycle))
    logger.info(f"Hashed {len(message)} bytes from {args.input} on a {args.cycle}-cycle")
    print(digest.hex())
    return 0
