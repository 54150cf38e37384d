"""Main application module for the quantum-walk chain simulator"""
import argparse
import logging
import sys
from typing import Optional, Sequence

from src import config
from src.agent import setup_logging
from src.components import chain_commands, election_commands, hash_command, walk_command
from src.exceptions import (
    ConfigError,
    EmptyMessage,
    InvalidDimension,
    InvalidIndex,
    ProtocolAbort,
    QuantumChainError,
    RoundFailed,
    StoreError,
    SyncMismatch,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_REJECT = 1
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_ABORT = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='qwc',
        description="Quantum-walk blockchain with quantum delegated proof of stake, simulated classically.",
    )
    parser.add_argument('--log-dir', default=str(config.LOG_DIR), help="Directory for the rotating log file")
    parser.add_argument('--log-level', default=config.LOG_LEVEL, help="Logging level")
    subparsers = parser.add_subparsers(dest='command', metavar='command')
    subparsers.required = True

    hash_command.register(subparsers)
    walk_command.register(subparsers)
    chain_commands.register(subparsers)
    election_commands.register(subparsers)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main application entry point"""
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_dir, args.log_level.upper())

    try:
        return args.handler(args)
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (StoreError, EmptyMessage) as e:
        logger.error(f"Input error: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except ProtocolAbort as e:
        logger.error(f"Protocol aborted: {e}")
        print(f"abort: {e.reason}", file=sys.stderr)
        if e.detail:
            print(e.detail, file=sys.stderr)
        return EXIT_ABORT
    except (RoundFailed, SyncMismatch) as e:
        logger.error(f"Protocol aborted: {e}")
        print(f"abort: {type(e).__name__}", file=sys.stderr)
        print(str(e), file=sys.stderr)
        return EXIT_ABORT
    except (InvalidDimension, InvalidIndex) as e:
        logger.error(f"Invalid parameters: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except QuantumChainError as e:
        logger.error(f"Application error: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ABORT


if __name__ == "__main__":
    sys.exit(main())
