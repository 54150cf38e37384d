"""Quantum block construction and validation

Each block carries ``n`` walker states. A walker starts at a position read
from the predecessor's hash, walks a number of steps derived from the block
contents and timestamp, and is stored in its evolved form. Validators undo
the walk with the announced step counts and check the walker is back where
the predecessor's hash says it started, then recompute the block hash.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from src import config
from src.exceptions import EmptyBlock, InvalidDimension, Malformed, QuantumChainError
from src.services.qudit_state import (
    MeasurementBasis,
    StateVector,
    SubsystemLayout,
    from_amplitudes,
    measure,
    random_state,
)
from src.services.qw_hash import DEFAULT_PARAMS, Digest, HashParams, hash_message, stretch_digest
from src.services.walk_engine import CoinParams, WalkConfig, evolve, initial_state, inverse_evolve

logger = logging.getLogger(__name__)

TIMESTAMP_MASK = 0xFFFF


def _u32(value: int) -> bytes:
    return int(value).to_bytes(4, 'little')


def _u64(value: int) -> bytes:
    return int(value).to_bytes(8, 'little')


def _field(data: bytes) -> bytes:
    return _u32(len(data)) + data


@dataclass(frozen=True)
class Transaction:
    sender: str
    receiver: str
    payload: bytes
    signature: bytes = b''
    timestamp: int = 0
    nonce: int = 0

    def signing_bytes(self) -> bytes:
        """Canonical bytes covered by the signature"""
        return b''.join([
            _field(self.sender.encode('utf-8')),
            _field(self.receiver.encode('utf-8')),
            _field(bytes(self.payload)),
            _u64(self.timestamp),
            _u64(self.nonce),
        ])

    def serialize(self) -> bytes:
        """Length-prefixed fields in declared order, little-endian integers"""
        return b''.join([
            _field(self.sender.encode('utf-8')),
            _field(self.receiver.encode('utf-8')),
            _field(bytes(self.payload)),
            _field(bytes(self.signature)),
            _u64(self.timestamp),
            _u64(self.nonce),
        ])

    def to_dict(self) -> Dict[str, Any]:
        return {
            'sender': self.sender,
            'receiver': self.receiver,
            'payload': bytes(self.payload).hex(),
            'signature': bytes(self.signature).hex(),
            'timestamp': self.timestamp,
            'nonce': self.nonce,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'Transaction':
        return cls(
            sender=data['sender'],
            receiver=data['receiver'],
            payload=bytes.fromhex(data['payload']),
            signature=bytes.fromhex(data['signature']),
            timestamp=int(data['timestamp']),
            nonce=int(data['nonce']),
        )


def serialize_transactions(transactions: Sequence[Transaction]) -> bytes:
    return _u32(len(transactions)) + b''.join(tx.serialize() for tx in transactions)


def block_content(transactions: Sequence[Transaction], timestamp: int) -> bytes:
    """Bytes that feed both the block hash and the step counts"""
    if not transactions:
        raise EmptyBlock("A block needs at least one transaction")
    return serialize_transactions(transactions) + _u64(timestamp)


@dataclass(frozen=True)
class ChainParams:
    n_walkers: int = config.DEFAULT_WALKERS
    position_dim: int = config.DEFAULT_POSITION_DIM
    step_bound: int = config.DEFAULT_STEP_BOUND
    coin: CoinParams = field(default_factory=CoinParams)
    hash_params: HashParams = DEFAULT_PARAMS

    def __post_init__(self):
        if self.n_walkers < 1:
            raise InvalidDimension(f"Need at least one walker, got {self.n_walkers}")
        if self.step_bound < 1:
            raise InvalidDimension(f"Step bound must be >= 1, got {self.step_bound}")
        # validates position_dim as a power of two
        WalkConfig(self.position_dim, self.coin)

    @property
    def walk_config(self) -> WalkConfig:
        return WalkConfig(self.position_dim, self.coin)

    @property
    def segment_bits(self) -> int:
        return self.walk_config.bits

    def genesis_hash(self) -> Digest:
        return bytes(self.hash_params.digest_size)


@dataclass(frozen=True)
class BlockHeader:
    index: int
    prev_hash: Digest
    own_hash: Digest
    timestamp: int


@dataclass(frozen=True)
class BlockBody:
    n_walkers: int
    initial_positions: List[int]
    step_counts: List[int]
    final_states: List[StateVector]
    transactions: List[Transaction]


@dataclass(frozen=True)
class Block:
    header: BlockHeader
    body: BlockBody

    @property
    def index(self) -> int:
        return self.header.index

    def to_dict(self) -> Dict[str, Any]:
        return {
            'header': {
                'index': self.header.index,
                'prev_hash': self.header.prev_hash.hex(),
                'own_hash': self.header.own_hash.hex(),
                'timestamp': self.header.timestamp,
            },
            'body': {
                'n_walkers': self.body.n_walkers,
                'initial_positions': list(self.body.initial_positions),
                'step_counts': list(self.body.step_counts),
                'final_states': [
                    {
                        'dims': list(state.dims),
                        'amplitudes': [[float(a.real), float(a.imag)] for a in state.amplitudes],
                    }
                    for state in self.body.final_states
                ],
                'transactions': [tx.to_dict() for tx in self.body.transactions],
            },
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'Block':
        try:
            header = data['header']
            body = data['body']
            states = []
            for item in body['final_states']:
                amplitudes = [complex(re, im) for re, im in item['amplitudes']]
                states.append(from_amplitudes(SubsystemLayout(tuple(item['dims'])), amplitudes))
            return cls(
                header=BlockHeader(
                    index=int(header['index']),
                    prev_hash=bytes.fromhex(header['prev_hash']),
                    own_hash=bytes.fromhex(header['own_hash']),
                    timestamp=int(header['timestamp']),
                ),
                body=BlockBody(
                    n_walkers=int(body['n_walkers']),
                    initial_positions=[int(x) for x in body['initial_positions']],
                    step_counts=[int(t) for t in body['step_counts']],
                    final_states=states,
                    transactions=[Transaction.from_dict(tx) for tx in body['transactions']],
                ),
            )
        except (KeyError, TypeError, ValueError, QuantumChainError) as e:
            raise Malformed(f"Block record is malformed: {e}")


@dataclass
class ValidationReport:
    block_index: int
    internal_ok: bool
    linkage_ok: bool
    walker_checks: List[Dict[str, Any]] = field(default_factory=list)
    evidence: List[str] = field(default_factory=list)

    @property
    def accepted(self) -> bool:
        return self.internal_ok and self.linkage_ok

    def to_dict(self) -> Dict[str, Any]:
        return {
            'block_index': self.block_index,
            'accepted': self.accepted,
            'internal_ok': self.internal_ok,
            'linkage_ok': self.linkage_ok,
            'walker_checks': self.walker_checks,
            'evidence': self.evidence,
        }


@dataclass
class ChainReport:
    blocks_checked: int
    failures: List[ValidationReport] = field(default_factory=list)

    @property
    def accepted(self) -> bool:
        return not self.failures

    @property
    def first_failure(self) -> Optional[int]:
        return self.failures[0].block_index if self.failures else None

    def to_dict(self) -> Dict[str, Any]:
        return {
            'accepted': self.accepted,
            'blocks_checked': self.blocks_checked,
            'first_failure': self.first_failure,
            'failures': [report.to_dict() for report in self.failures],
        }


def derive_initial_positions(prev_hash: Digest, params: ChainParams) -> List[int]:
    """Split the (stretched) hash into n big-endian L-bit segments"""
    bits = params.segment_bits
    total = params.n_walkers * bits
    stretched = stretch_digest(prev_hash, total, params.hash_params) if prev_hash else bytes((total + 7) // 8)
    value = int.from_bytes(stretched, 'big') >> (len(stretched) * 8 - total)
    mask = params.position_dim - 1
    return [
        (value >> (bits * (params.n_walkers - 1 - j))) & mask
        for j in range(params.n_walkers)
    ]


def derive_step_counts(transactions: Sequence[Transaction], timestamp: int, params: ChainParams) -> List[int]:
    """t_j = (s_j + r) mod T + 1

    s_j is the j-th of n equal segments of the block content (zero-padded at
    the end), read big-endian; r is the low 16 bits of the timestamp.
    """
    content = block_content(transactions, timestamp)
    n = params.n_walkers
    padded = content + bytes(-len(content) % n)
    segment = len(padded) // n
    r = timestamp & TIMESTAMP_MASK
    return [
        (int.from_bytes(padded[j * segment:(j + 1) * segment], 'big') + r) % params.step_bound + 1
        for j in range(n)
    ]


def compute_block_hash(transactions: Sequence[Transaction], timestamp: int, params: ChainParams) -> Digest:
    return hash_message(block_content(transactions, timestamp), params.hash_params)


def build_block(
    prev_hash: Digest,
    transactions: Sequence[Transaction],
    timestamp: int,
    params: ChainParams,
    index: int = 0,
) -> Block:
    """Evolve every walker from its hash-derived start and seal the block"""
    transactions = list(transactions)
    positions = derive_initial_positions(prev_hash, params)
    steps = derive_step_counts(transactions, timestamp, params)
    walk = params.walk_config
    states = [
        evolve(initial_state(walk, x), walk, t)
        for x, t in zip(positions, steps)
    ]
    own_hash = compute_block_hash(transactions, timestamp, params)

    logger.info(
        f"Built block {index}: positions {positions}, steps {steps}, hash {own_hash.hex()[:16]}..."
    )
    return Block(
        header=BlockHeader(index=index, prev_hash=bytes(prev_hash), own_hash=own_hash, timestamp=timestamp),
        body=BlockBody(
            n_walkers=params.n_walkers,
            initial_positions=positions,
            step_counts=steps,
            final_states=states,
            transactions=transactions,
        ),
    )


def _check_structure(block: Block, params: ChainParams) -> None:
    body = block.body
    if body.n_walkers != params.n_walkers:
        raise Malformed(f"Block {block.index} has {body.n_walkers} walkers, expected {params.n_walkers}")
    if len(body.step_counts) != body.n_walkers or len(body.final_states) != body.n_walkers:
        raise Malformed(f"Block {block.index} walker lists do not match n_walkers={body.n_walkers}")
    for j, state in enumerate(body.final_states):
        if state.dims != (params.position_dim, 2):
            raise Malformed(f"Block {block.index} walker {j} has layout {list(state.dims)}")
    if not body.transactions:
        raise Malformed(f"Block {block.index} carries no transactions")


def validate_block(
    block: Block,
    prev_hash: Digest,
    params: ChainParams,
    rng: Optional[np.random.Generator] = None,
    sampled: bool = False,
) -> ValidationReport:
    """Backward-evolution check plus hash linkage check

    The default compares each inverse-evolved walker with |x, 0> directly.
    ``sampled`` instead takes one seeded position measurement per walker.
    """
    _check_structure(block, params)
    if sampled and rng is None:
        raise Malformed("Sampled validation needs an rng")

    report = ValidationReport(block_index=block.index, internal_ok=True, linkage_ok=True)
    walk = params.walk_config
    expected_positions = derive_initial_positions(prev_hash, params)
    steps = derive_step_counts(block.body.transactions, block.header.timestamp, params)

    if steps != list(block.body.step_counts):
        report.internal_ok = False
        report.evidence.append(f"step counts {list(block.body.step_counts)} do not match recomputed {steps}")

    for j, (state, x, t) in enumerate(zip(block.body.final_states, expected_positions, steps)):
        recovered = inverse_evolve(state, walk, t)
        if sampled:
            outcome, _ = measure(recovered, [0], MeasurementBasis.COMPUTATIONAL, rng)
            passed = outcome[0] == x
            check = {'walker': j, 'expected_position': x, 'measured_position': outcome[0], 'passed': passed}
        else:
            fidelity = initial_state(walk, x).fidelity(recovered)
            passed = fidelity >= 1.0 - config.AMPLITUDE_TOLERANCE
            check = {'walker': j, 'expected_position': x, 'fidelity': fidelity, 'passed': passed}
        report.walker_checks.append(check)
        if not passed:
            report.internal_ok = False
            report.evidence.append(f"walker {j} did not return to position {x} after {t} inverse steps")

    recomputed = compute_block_hash(block.body.transactions, block.header.timestamp, params)
    if recomputed != block.header.own_hash:
        report.linkage_ok = False
        report.evidence.append("hash mismatch: recomputed block hash differs from header")
    if block.header.prev_hash != bytes(prev_hash):
        report.linkage_ok = False
        report.evidence.append("prev_hash mismatch: header does not point at the predecessor")

    if report.accepted:
        logger.info(f"Block {block.index} accepted")
    else:
        logger.warning(f"Block {block.index} rejected: {'; '.join(report.evidence)}")
    return report


def verify_chain(
    blocks: Sequence[Block],
    params: ChainParams,
    rng: Optional[np.random.Generator] = None,
    sampled: bool = False,
) -> ChainReport:
    """Re-validate every block against its predecessor's recomputed hash"""
    report = ChainReport(blocks_checked=len(blocks))
    expected_prev = params.genesis_hash()

    for position, block in enumerate(blocks):
        result = validate_block(block, expected_prev, params, rng=rng, sampled=sampled)
        if block.index != position:
            result.linkage_ok = False
            result.evidence.append(f"index {block.index} found at chain position {position}")
        if not result.accepted:
            report.failures.append(result)
        expected_prev = compute_block_hash(block.body.transactions, block.header.timestamp, params)

    if report.accepted:
        logger.info(f"Chain of {len(blocks)} blocks verified")
    else:
        logger.warning(
            f"Chain rejected at block {report.first_failure} "
            f"({len(report.failures)} failing blocks)"
        )
    return report


class TamperKind(str, Enum):
    TX_BYTE = 'tx-byte'
    STATE_SUBSTITUTION = 'state-substitution'
    STEP_REPLAY = 'step-replay'
    PREV_HASH = 'prev-hash'


def tamper_block(
    block: Block,
    kind: TamperKind,
    rng: np.random.Generator,
    donor: Optional[Block] = None,
) -> Block:
    """Return a mutated copy of ``block``; the header hash is left as built"""
    kind = TamperKind(kind)
    body = block.body

    if kind is TamperKind.TX_BYTE:
        tx_index = int(rng.integers(len(body.transactions)))
        tx = body.transactions[tx_index]
        if not tx.payload:
            raise Malformed(f"Transaction {tx_index} of block {block.index} has no payload to flip")
        payload = bytearray(tx.payload)
        offset = int(rng.integers(len(payload)))
        payload[offset] ^= int(rng.integers(1, 256))
        transactions = list(body.transactions)
        transactions[tx_index] = replace(tx, payload=bytes(payload))
        return replace(block, body=replace(body, transactions=transactions))

    if kind is TamperKind.STATE_SUBSTITUTION:
        states = [random_state(state.layout, rng) for state in body.final_states]
        return replace(block, body=replace(body, final_states=states))

    if kind is TamperKind.STEP_REPLAY:
        if donor is None:
            raise Malformed("Step replay needs a donor block")
        return replace(block, body=replace(
            body,
            step_counts=list(donor.body.step_counts),
            final_states=list(donor.body.final_states),
        ))

    forged = bytes(rng.integers(0, 256, size=len(block.header.prev_hash), dtype=np.uint8))
    return replace(block, header=replace(block.header, prev_hash=forged))


def sampled_acceptance_bound(params: ChainParams) -> float:
    """Chance a fully substituted block survives one measurement per walker"""
    return math.pow(1.0 / params.position_dim, params.n_walkers)
