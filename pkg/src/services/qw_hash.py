"""Quantum-walk hash

A message-controlled two-particle walk on a cycle of ``cycle_size`` nodes.
Both particles share one 4-dimensional coin; every message bit picks the
coin for one step (C0 for 0, C1 for 1) and the shift moves each particle
one node forward when its coin bit is 0 and leaves it in place when the bit
is 1. The digest is read off the final joint position distribution.
"""
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np

from src import config
from src.exceptions import DegenerateState, EmptyMessage, InvalidDimension, InvalidIndex

logger = logging.getLogger(__name__)

Digest = bytes

EXTRACTION_SCALE = 10 ** 8
ROUNDING_DECIMALS = 12


@dataclass(frozen=True)
class HashParams:
    cycle_size: int = config.HASH_CYCLE_SIZE
    initial_coin: Tuple[complex, complex, complex, complex] = (0.5, 0.5j, -0.5, -0.5j)
    initial_positions: Tuple[int, int] = (0, 3)
    min_steps: int = config.HASH_MIN_STEPS

    def __post_init__(self):
        if self.cycle_size < 4:
            raise InvalidDimension(f"Hash cycle needs at least 4 nodes, got {self.cycle_size}")
        if len(self.initial_coin) != 4:
            raise InvalidDimension("Initial coin needs four amplitudes")
        norm = sum(abs(a) ** 2 for a in self.initial_coin)
        if abs(norm - 1.0) > config.AMPLITUDE_TOLERANCE:
            raise DegenerateState(f"Initial coin is not normalized (norm^2 = {norm:.12f})")
        if len(self.initial_positions) != 2 or any(
            not 0 <= p < self.cycle_size for p in self.initial_positions
        ):
            raise InvalidIndex(f"Initial positions {self.initial_positions} outside the cycle")
        if self.min_steps < 1:
            raise InvalidIndex(f"min_steps must be >= 1, got {self.min_steps}")

    @property
    def digest_size(self) -> int:
        return self.cycle_size ** 2


DEFAULT_PARAMS = HashParams()


def grover_coins() -> Tuple[np.ndarray, np.ndarray]:
    """(C0, C1): the 4x4 Grover coin and the alternative coin"""
    c0 = 0.5 * np.ones((4, 4), dtype=np.complex128) - np.eye(4, dtype=np.complex128)
    c1 = 0.5 * np.array([
        [1, 1, 1, 1],
        [1, 1, -1, -1],
        [1, -1, 1, -1],
        [1, -1, -1, 1],
    ], dtype=np.complex128)
    return c0, c1


_C0, _C1 = grover_coins()
_COIN_T = (np.ascontiguousarray(_C0.T), np.ascontiguousarray(_C1.T))


@lru_cache(maxsize=16)
def _shift_gather(n: int) -> np.ndarray:
    """Source index for every flat (x1, x2, coin) entry after one shift"""
    x1, x2, coin = np.meshgrid(np.arange(n), np.arange(n), np.arange(4), indexing='ij')
    move1 = 1 - (coin >> 1)
    move2 = 1 - (coin & 1)
    source = ((x1 - move1) % n) * n * 4 + ((x2 - move2) % n) * 4 + coin
    return source.reshape(-1)


def message_bits(message: bytes, min_steps: int) -> np.ndarray:
    """Message bits (MSB first), repeated until at least ``min_steps`` long"""
    bits = np.unpackbits(np.frombuffer(message, dtype=np.uint8))
    steps = max(bits.size, min_steps)
    return np.resize(bits, steps)


def final_distribution(message: bytes, params: HashParams = DEFAULT_PARAMS) -> np.ndarray:
    """Joint (n_h, n_h) position distribution after the message-driven walk"""
    if not message:
        raise EmptyMessage("Cannot hash an empty message")

    n = params.cycle_size
    psi = np.zeros((n, n, 4), dtype=np.complex128)
    psi[params.initial_positions[0], params.initial_positions[1], :] = params.initial_coin
    flat = psi.reshape(-1)
    gather = _shift_gather(n)

    for bit in message_bits(bytes(message), params.min_steps):
        flat = (flat.reshape(-1, 4) @ _COIN_T[bit]).reshape(-1)
        flat = flat[gather]

    probabilities = (np.abs(flat.reshape(n, n, 4)) ** 2).sum(axis=2)
    return probabilities


def extract_digest(probabilities: np.ndarray) -> Digest:
    """byte_i = floor(p_i * 1e8) mod 256 over the row-major probabilities"""
    rounded = np.round(np.asarray(probabilities, dtype=np.float64).reshape(-1), ROUNDING_DECIMALS)
    scaled = np.floor(rounded * EXTRACTION_SCALE).astype(np.int64)
    return (scaled % 256).astype(np.uint8).tobytes()


def hash_message(message: bytes, params: HashParams = DEFAULT_PARAMS) -> Digest:
    """Digest of ``message``; n_h^2 bytes long"""
    digest = extract_digest(final_distribution(message, params))
    logger.debug(f"Hashed {len(message)} bytes on a {params.cycle_size}-cycle: {digest.hex()[:16]}...")
    return digest


def stretch_digest(digest: Digest, out_bits: int, params: Optional[HashParams] = None) -> bytes:
    """Truncate or extend ``digest`` to exactly ``out_bits`` bits

    Extension appends hash(digest || counter) blocks with a 4-byte
    little-endian counter. Bits past ``out_bits`` in the last byte are zero.
    """
    if out_bits < 1:
        raise InvalidIndex(f"out_bits must be >= 1, got {out_bits}")
    params = params or DEFAULT_PARAMS

    stretched = bytes(digest)
    counter = 0
    while len(stretched) * 8 < out_bits:
        stretched += hash_message(bytes(digest) + counter.to_bytes(4, 'little'), params)
        counter += 1

    n_bytes = (out_bits + 7) // 8
    out = bytearray(stretched[:n_bytes])
    spare = n_bytes * 8 - out_bits
    if spare:
        out[-1] &= (0xFF << spare) & 0xFF
    return bytes(out)


def bit_difference(a: bytes, b: bytes) -> int:
    """Number of differing bits between two equal-length byte strings"""
    xor = np.bitwise_xor(np.frombuffer(a, dtype=np.uint8), np.frombuffer(b, dtype=np.uint8))
    return int(np.unpackbits(xor).sum())
