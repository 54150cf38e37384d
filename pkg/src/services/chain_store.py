"""Directory-backed chain persistence, one JSON file per block"""
import json
import logging
from pathlib import Path
from typing import List, Optional, Union

import numpy as np

from src.exceptions import Malformed, StoreError
from src.services.block_chain import (
    Block,
    ChainParams,
    ChainReport,
    ValidationReport,
    build_block,
    compute_block_hash,
    validate_block,
    verify_chain,
)
from src.services.qw_hash import Digest
from src.services.signature_service import SignatureService

BLOCK_FILE_PATTERN = 'block_*.json'


def block_filename(index: int) -> str:
    return f"block_{index:06d}.json"


class ChainStore:
    """Single-writer store of numbered block files"""

    def __init__(self, storage_dir: Union[str, Path], params: ChainParams):
        self.logger = logging.getLogger(__name__)
        self.storage_dir = Path(storage_dir)
        self.params = params
        try:
            self.storage_dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            self.logger.error(f"Failed to create chain directory {self.storage_dir}: {e}")
            raise StoreError(f"Failed to create chain directory {self.storage_dir}: {e}")

    @classmethod
    def open_existing(cls, storage_dir: Union[str, Path], params: ChainParams) -> 'ChainStore':
        """Open a store that must already exist on disk"""
        path = Path(storage_dir)
        if not path.is_dir():
            raise StoreError(f"Chain directory not found: {path}")
        return cls(path, params)

    def _paths(self) -> List[Path]:
        return sorted(self.storage_dir.glob(BLOCK_FILE_PATTERN))

    def __len__(self) -> int:
        return len(self._paths())

    def write_block(self, block: Block) -> Path:
        """Write ``block`` to its numbered file, overwriting any previous copy"""
        path = self.storage_dir / block_filename(block.index)
        try:
            with open(path, 'w', encoding='utf-8') as f:
                json.dump(block.to_dict(), f, indent=2)
            self.logger.debug(f"Wrote block {block.index} to {path}")
            return path
        except OSError as e:
            self.logger.error(f"Failed to write block {block.index}: {e}")
            raise StoreError(f"Failed to write block {block.index}: {e}")

    def load_block(self, index: int) -> Block:
        path = self.storage_dir / block_filename(index)
        if not path.exists():
            raise StoreError(f"Block {index} not found in {self.storage_dir}")
        try:
            with open(path, 'r', encoding='utf-8') as f:
                return Block.from_dict(json.load(f))
        except (json.JSONDecodeError, Malformed) as e:
            self.logger.error(f"Corrupt block file {path}: {e}")
            raise StoreError(f"Corrupt block file {path}: {e}")

    def load_blocks(self) -> List[Block]:
        blocks = []
        for position, path in enumerate(self._paths()):
            expected = block_filename(position)
            if path.name != expected:
                raise StoreError(f"Chain has a gap: found {path.name}, expected {expected}")
            blocks.append(self.load_block(position))
        self.logger.info(f"Loaded {len(blocks)} blocks from {self.storage_dir}")
        return blocks

    def tip_hash(self) -> Digest:
        """Recomputed hash of the last stored block (genesis hash when empty)"""
        count = len(self)
        if count == 0:
            return self.params.genesis_hash()
        tip = self.load_block(count - 1)
        return compute_block_hash(tip.body.transactions, tip.header.timestamp, self.params)

    def append_block(
        self,
        block: Block,
        rng: Optional[np.random.Generator] = None,
        sampled: bool = False,
    ) -> ValidationReport:
        """Validate ``block`` against the tip and store it when accepted"""
        expected_index = len(self)
        report = validate_block(block, self.tip_hash(), self.params, rng=rng, sampled=sampled)
        if block.index != expected_index:
            report.linkage_ok = False
            report.evidence.append(f"index {block.index} appended at height {expected_index}")

        if report.accepted:
            self.write_block(block)
            self.logger.info(f"Appended block {block.index} to {self.storage_dir}")
        else:
            self.logger.warning(f"Refused to append block {block.index}: {'; '.join(report.evidence)}")
        return report

    def verify(self, rng: Optional[np.random.Generator] = None, sampled: bool = False) -> ChainReport:
        return verify_chain(self.load_blocks(), self.params, rng=rng, sampled=sampled)


def build_synthetic_chain(
    store: ChainStore,
    n_blocks: int,
    transactions_per_block: int,
    rng: np.random.Generator,
    signatures: Optional[SignatureService] = None,
    start_ms: int = 1_000,
    interval_ms: int = 1_000,
) -> List[Block]:
    """Append ``n_blocks`` honest blocks of freshly signed transfers"""
    signatures = signatures or SignatureService(
        hash_params=store.params.hash_params,
        capacity=n_blocks * transactions_per_block,
    )
    sender = signatures.generate_keypair('node-0', rng)

    blocks = []
    for i in range(n_blocks):
        timestamp = start_ms + i * interval_ms + int(rng.integers(interval_ms))
        transactions = [
            signatures.sign_transaction(
                sender,
                f"node-{1 + j % 3}",
                f"transfer {int(rng.integers(1, 1000))}".encode('utf-8'),
                timestamp,
            )
            for j in range(transactions_per_block)
        ]
        block = build_block(store.tip_hash(), transactions, timestamp, store.params, index=len(store))
        report = store.append_block(block)
        if not report.accepted:
            raise StoreError(f"Synthetic block {block.index} failed validation: {report.evidence}")
        blocks.append(block)
    return blocks
