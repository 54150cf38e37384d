"""One-time hash-based transaction signatures

Lamport-style keys with the quantum-walk hash as the one-way function.
Each node holds a small batch of one-time keys; a transaction's nonce picks
the key, so a key is never reused and running out raises KeyExhausted.
"""
import logging
from dataclasses import dataclass, replace
from typing import List, Optional, Tuple

import numpy as np

from src import config
from src.exceptions import KeyExhausted
from src.services.block_chain import Transaction
from src.services.qw_hash import DEFAULT_PARAMS, HashParams, hash_message

SECRET_BYTES = 8


@dataclass(frozen=True)
class PublicKey:
    node_id: str
    # commitments[key][bit] = (hash of secret for 0, hash of secret for 1)
    commitments: Tuple[Tuple[Tuple[bytes, bytes], ...], ...]


@dataclass
class KeyPair:
    node_id: str
    secrets: List[List[Tuple[bytes, bytes]]]
    public_key: PublicKey
    next_key: int = 0

    @property
    def remaining(self) -> int:
        return len(self.secrets) - self.next_key


class SignatureService:
    def __init__(
        self,
        hash_params: HashParams = DEFAULT_PARAMS,
        bits: int = config.SIGNATURE_BITS,
        capacity: int = config.SIGNATURE_CAPACITY,
    ):
        self.logger = logging.getLogger(__name__)
        self.hash_params = hash_params
        self.bits = bits
        self.capacity = capacity

    def _commit(self, secret: bytes) -> bytes:
        return hash_message(secret, self.hash_params)

    def message_bits(self, message: bytes) -> List[int]:
        digest = hash_message(message, self.hash_params)
        unpacked = np.unpackbits(np.frombuffer(digest, dtype=np.uint8))
        return [int(b) for b in unpacked[:self.bits]]

    def generate_keypair(self, node_id: str, rng: np.random.Generator) -> KeyPair:
        """``capacity`` one-time keys of 2 x ``bits`` random secrets each"""
        secrets = []
        commitments = []
        for _ in range(self.capacity):
            key = [(rng.bytes(SECRET_BYTES), rng.bytes(SECRET_BYTES)) for _ in range(self.bits)]
            secrets.append(key)
            commitments.append(tuple((self._commit(s0), self._commit(s1)) for s0, s1 in key))
        self.logger.info(f"Generated {self.capacity} one-time keys for node {node_id}")
        return KeyPair(node_id=node_id, secrets=secrets, public_key=PublicKey(node_id, tuple(commitments)))

    def sign_transaction(
        self,
        keypair: KeyPair,
        receiver: str,
        payload: bytes,
        timestamp: int,
    ) -> Transaction:
        """Build and sign a transaction with the next unused key"""
        if keypair.remaining <= 0:
            raise KeyExhausted(f"Node {keypair.node_id} has used all {len(keypair.secrets)} one-time keys")
        nonce = keypair.next_key
        keypair.next_key += 1

        unsigned = Transaction(
            sender=keypair.node_id,
            receiver=receiver,
            payload=bytes(payload),
            timestamp=timestamp,
            nonce=nonce,
        )
        key = keypair.secrets[nonce]
        revealed = [key[i][bit] for i, bit in enumerate(self.message_bits(unsigned.signing_bytes()))]
        self.logger.debug(f"Node {keypair.node_id} signed transaction nonce {nonce}")
        return replace(unsigned, signature=b''.join(revealed))

    def verify_signature(self, public_key: Optional[PublicKey], transaction: Transaction) -> bool:
        if public_key is None or not transaction.signature:
            return False
        if transaction.sender != public_key.node_id:
            return False
        if not 0 <= transaction.nonce < len(public_key.commitments):
            return False
        if len(transaction.signature) != self.bits * SECRET_BYTES:
            return False

        commitments = public_key.commitments[transaction.nonce]
        for i, bit in enumerate(self.message_bits(transaction.signing_bytes())):
            part = transaction.signature[i * SECRET_BYTES:(i + 1) * SECRET_BYTES]
            if self._commit(part) != commitments[i][bit]:
                return False
        return True
