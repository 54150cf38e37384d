"""Block production rounds, validator approval and full-node sync"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Set, Tuple

import numpy as np

from src import config
from src.exceptions import ConfigError, RoundFailed, SyncMismatch
from src.services.block_chain import (
    Block,
    ChainParams,
    TamperKind,
    Transaction,
    build_block,
    tamper_block,
    validate_block,
)
from src.services.chain_store import ChainStore
from src.services.channel_service import AdversaryKind, AdversaryModel
from src.services.qdpos_voting import secure_sum
from src.services.signature_service import KeyPair, PublicKey, SignatureService

logger = logging.getLogger(__name__)

APPROVAL_DIM = 2


class Role(str, Enum):
    VOTER = 'voter'
    CANDIDATE = 'candidate'
    REPRESENTATIVE = 'representative'
    VALIDATOR = 'validator'
    FULL_NODE = 'full-node'


@dataclass
class Node:
    id: str
    stake: float = 1.0
    keypair: Optional[KeyPair] = None
    roles: Set[Role] = field(default_factory=set)
    reward_balance: int = 0
    responsive: bool = True
    local_tip_hash: Optional[bytes] = None

    @property
    def public_key(self) -> Optional[PublicKey]:
        return self.keypair.public_key if self.keypair else None

    def has_role(self, role: Role) -> bool:
        return role in self.roles


class SimulatedClock:
    """Discrete simulated time in milliseconds"""

    def __init__(self, start_ms: int = 0):
        self.now_ms = start_ms

    def advance(self, ms: int) -> int:
        self.now_ms += ms
        return self.now_ms


class TransactionPool:
    """Pending transactions with signature checks and a replay seen-set"""

    def __init__(self, signatures: SignatureService, public_keys: Dict[str, PublicKey]):
        self.signatures = signatures
        self.public_keys = public_keys
        self.pending: List[Transaction] = []
        self.seen: Set[Tuple[str, int]] = set()

    def submit(self, transaction: Transaction) -> bool:
        key = (transaction.sender, transaction.nonce)
        if key in self.seen:
            logger.warning(f"Rejected replayed transaction {transaction.sender}#{transaction.nonce}")
            return False
        if not self.signatures.verify_signature(self.public_keys.get(transaction.sender), transaction):
            logger.warning(f"Rejected transaction {transaction.sender}#{transaction.nonce}: bad signature")
            return False
        self.seen.add(key)
        self.pending.append(transaction)
        return True

    def drain(self) -> List[Transaction]:
        pending, self.pending = self.pending, []
        return pending


@dataclass(frozen=True)
class RoundConfig:
    representatives: Tuple[str, ...]
    validators: Tuple[str, ...]
    block_interval_ms: int = config.BLOCK_INTERVAL_MS
    approval_quorum: Fraction = config.APPROVAL_QUORUM

    def __post_init__(self):
        quorum = Fraction(self.approval_quorum)
        object.__setattr__(self, 'approval_quorum', quorum)
        if not Fraction(1, 2) < quorum <= 1:
            raise ConfigError(f"Approval quorum must lie in (1/2, 1], got {quorum}")
        if not self.representatives:
            raise ConfigError("A production round needs at least one representative")
        if self.block_interval_ms < 1:
            raise ConfigError(f"Block interval must be positive, got {self.block_interval_ms}")

    @property
    def approvals_needed(self) -> int:
        return approvals_needed(len(self.validators), self.approval_quorum)


def approvals_needed(validators: int, quorum: Fraction) -> int:
    """ceil(quorum * V), exact"""
    return math.ceil(Fraction(quorum) * validators)


def quorum_reached(approvals: int, validators: int, quorum: Fraction) -> bool:
    return approvals >= approvals_needed(validators, quorum)


@dataclass
class ProductionAttempt:
    representative: str
    outcome: str
    window_start_ms: int
    approvals: int = 0
    approving_validators: List[str] = field(default_factory=list)
    evidence: List[str] = field(default_factory=list)
    misbehaviour: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return {
            'representative': self.representative,
            'outcome': self.outcome,
            'window_start_ms': self.window_start_ms,
            'approvals': self.approvals,
            'approving_validators': list(self.approving_validators),
            'evidence': list(self.evidence),
            'misbehaviour': self.misbehaviour,
        }


@dataclass
class RoundReport:
    round_index: int
    approvals_needed: int
    attempts: List[ProductionAttempt] = field(default_factory=list)
    block_index: Optional[int] = None
    block_hash: Optional[str] = None
    transactions: int = 0

    @property
    def accepted(self) -> bool:
        return self.block_index is not None

    @property
    def producer(self) -> Optional[str]:
        for attempt in self.attempts:
            if attempt.outcome == 'accepted':
                return attempt.representative
        return None

    def to_dict(self) -> Dict[str, Any]:
        return {
            'round_index': self.round_index,
            'accepted': self.accepted,
            'approvals_needed': self.approvals_needed,
            'block_index': self.block_index,
            'block_hash': self.block_hash,
            'transactions': self.transactions,
            'producer': self.producer,
            'attempts': [attempt.to_dict() for attempt in self.attempts],
        }


@dataclass
class SyncReport:
    block_index: int
    checked: List[str] = field(default_factory=list)
    divergent: List[str] = field(default_factory=list)

    @property
    def consistent(self) -> bool:
        return not self.divergent

    def to_dict(self) -> Dict[str, Any]:
        return {
            'block_index': self.block_index,
            'consistent': self.consistent,
            'checked': list(self.checked),
            'divergent': list(self.divergent),
        }


def _produce(
    representative: str,
    prev_hash: bytes,
    transactions: Sequence[Transaction],
    timestamp: int,
    params: ChainParams,
    index: int,
    adversary: Optional[AdversaryModel],
    rng: np.random.Generator,
) -> Block:
    block = build_block(prev_hash, transactions, timestamp, params, index=index)
    if adversary is not None and adversary.controls(representative):
        if adversary.kind is AdversaryKind.BLOCK_TAMPER:
            logger.warning(f"Representative {representative} tampers with block {index}")
            block = tamper_block(block, TamperKind.TX_BYTE, rng)
        elif adversary.kind is AdversaryKind.STATE_SUBSTITUTION:
            logger.warning(f"Representative {representative} substitutes the walk states of block {index}")
            block = tamper_block(block, TamperKind.STATE_SUBSTITUTION, rng)
    return block


def run_production_round(
    round_config: RoundConfig,
    pool: TransactionPool,
    store: ChainStore,
    nodes: Dict[str, Node],
    clock: SimulatedClock,
    rng: np.random.Generator,
    round_index: int = 0,
    adversary: Optional[AdversaryModel] = None,
    delta: int = config.DEFAULT_DELTA,
    sampled: bool = False,
) -> RoundReport:
    """One block slot: representatives try in order until a block is approved

    An idle representative lets its window lapse; a rejected block's
    transactions go to the next representative. Approvals are summed
    anonymously with the ballot machinery (d = 2, one unit vote each).
    """
    params = store.params
    transactions = pool.drain()
    report = RoundReport(
        round_index=round_index,
        approvals_needed=round_config.approvals_needed,
        transactions=len(transactions),
    )
    if not transactions:
        raise RoundFailed(f"Round {round_index} has no transactions to include", report)

    for representative in round_config.representatives:
        node = nodes[representative]
        attempt = ProductionAttempt(representative=representative, outcome='timeout', window_start_ms=clock.now_ms)
        report.attempts.append(attempt)

        if not node.responsive:
            clock.advance(round_config.block_interval_ms)
            logger.warning(f"Round {round_index}: representative {representative} missed its window")
            continue

        prev_hash = store.tip_hash()
        block = _produce(
            representative, prev_hash, transactions, clock.now_ms, params, len(store), adversary, rng,
        )
        clock.advance(round_config.block_interval_ms)

        votes = []
        for validator in round_config.validators:
            if not nodes[validator].responsive:
                votes.append(0)
                continue
            result = validate_block(block, prev_hash, params, rng=rng, sampled=sampled)
            votes.append(1 if result.accepted else 0)
            if result.accepted:
                attempt.approving_validators.append(validator)
            else:
                attempt.misbehaviour = True
                attempt.evidence.extend(f"{validator}: {item}" for item in result.evidence)

        if len(votes) >= 2:
            attempt.approvals = secure_sum(
                f"approval-{round_index}-{representative}", votes, APPROVAL_DIM, delta, rng,
            )
        else:
            attempt.approvals = sum(votes)

        if quorum_reached(attempt.approvals, len(round_config.validators), round_config.approval_quorum):
            append_report = store.append_block(block, rng=rng, sampled=sampled)
            if append_report.accepted:
                attempt.outcome = 'accepted'
                report.block_index = block.index
                report.block_hash = block.header.own_hash.hex()
                logger.info(
                    f"Round {round_index}: block {block.index} by {representative} accepted "
                    f"({attempt.approvals}/{len(round_config.validators)} approvals)"
                )
                return report
            attempt.evidence.extend(append_report.evidence)

        attempt.outcome = 'rejected'
        logger.warning(
            f"Round {round_index}: block by {representative} rejected "
            f"({attempt.approvals} approvals, {report.approvals_needed} needed)"
        )

    raise RoundFailed(f"Round {round_index}: every representative failed to produce an accepted block", report)


def finalize_and_sync(block: Block, nodes: Sequence[Node], params: ChainParams) -> SyncReport:
    """Full nodes rebuild the block from classical data and compare amplitudes"""
    report = SyncReport(block_index=block.index)
    for node in nodes:
        if not node.has_role(Role.FULL_NODE):
            continue
        report.checked.append(node.id)
        prev_hash = node.local_tip_hash if node.local_tip_hash is not None else block.header.prev_hash
        rebuilt = build_block(prev_hash, block.body.transactions, block.header.timestamp, params, index=block.index)
        identical = rebuilt.header.own_hash == block.header.own_hash and all(
            ours.allclose(theirs)
            for ours, theirs in zip(rebuilt.body.final_states, block.body.final_states)
        )
        if identical:
            node.local_tip_hash = block.header.own_hash
        else:
            report.divergent.append(node.id)

    if report.divergent:
        logger.warning(f"Block {block.index}: nodes {report.divergent} diverged during sync")
        raise SyncMismatch(report)
    logger.info(f"Block {block.index} synchronized on {len(report.checked)} full nodes")
    return report
