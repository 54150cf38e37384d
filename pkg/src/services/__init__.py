"""Quantum-walk chain - services package"""

from .block_chain import Block, ChainParams, build_block, validate_block, verify_chain
from .qdpos_voting import run_ballot, secure_sum, tally
from .qw_hash import HashParams, hash_message
from .walk_engine import CoinParams, WalkConfig, evolve, inverse_evolve

__all__ = [
    'Block',
    'ChainParams',
    'CoinParams',
    'HashParams',
    'WalkConfig',
    'build_block',
    'evolve',
    'hash_message',
    'inverse_evolve',
    'run_ballot',
    'secure_sum',
    'tally',
    'validate_block',
    'verify_chain',
]
