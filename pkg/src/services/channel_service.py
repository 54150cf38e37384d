"""Simulated quantum channel with decoy-state eavesdropping checks"""
import logging
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from src import config
from src.exceptions import ChannelCompromised, ConfigError
from src.services.qudit_state import (
    MeasurementBasis,
    StateVector,
    SubsystemLayout,
    apply_unitary,
    fourier_matrix,
    measure,
    new_basis_state,
)

logger = logging.getLogger(__name__)

BASES = (MeasurementBasis.COMPUTATIONAL, MeasurementBasis.FOURIER)


class AdversaryKind(str, Enum):
    NONE = 'none'
    INTERCEPT_RESEND = 'intercept_resend'
    BLOCK_TAMPER = 'block_tamper'
    VOTE_FORGER = 'vote_forger'
    STATE_SUBSTITUTION = 'state_substitution'


@dataclass(frozen=True)
class AdversaryModel:
    """Who misbehaves and how; ``node_id`` is None for an outside eavesdropper"""
    kind: AdversaryKind = AdversaryKind.NONE
    node_id: Optional[str] = None
    mode: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, 'kind', AdversaryKind(self.kind))

    def controls(self, node_id: str) -> bool:
        return self.kind is not AdversaryKind.NONE and self.node_id == node_id


@dataclass
class DecoyCheck:
    position: int
    basis: str
    value: int
    outcome: int
    passed: bool


@dataclass
class ChannelReport:
    sender: str
    receiver: str
    threshold: float
    delivered: int
    decoys: List[DecoyCheck] = field(default_factory=list)

    @property
    def failures(self) -> int:
        return sum(1 for check in self.decoys if not check.passed)

    @property
    def error_rate(self) -> float:
        return self.failures / len(self.decoys) if self.decoys else 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            'sender': self.sender,
            'receiver': self.receiver,
            'threshold': self.threshold,
            'delivered': self.delivered,
            'error_rate': self.error_rate,
            'failed_decoys': [check.position for check in self.decoys if not check.passed],
            'decoys': [asdict(check) for check in self.decoys],
        }


@dataclass
class QuantumChannel:
    sender: str
    receiver: str
    decoy_rate: float = config.DECOY_RATE
    threshold: float = config.DECOY_ERROR_THRESHOLD
    adversary: Optional[AdversaryModel] = None
    dim: Optional[int] = None

    def __post_init__(self):
        if not 0.0 < self.decoy_rate < 1.0:
            raise ConfigError(f"Decoy rate must lie in (0, 1), got {self.decoy_rate}")
        if not 0.0 <= self.threshold <= 1.0:
            raise ConfigError(f"Decoy threshold must lie in [0, 1], got {self.threshold}")

    @property
    def intercepted(self) -> bool:
        return self.adversary is not None and self.adversary.kind is AdversaryKind.INTERCEPT_RESEND

    def transmitter(self, rng: np.random.Generator) -> Callable[[List[StateVector]], List[StateVector]]:
        """Callable that sends a batch over this channel and returns what arrives"""
        def send(states: List[StateVector]) -> List[StateVector]:
            delivered, _ = transmit_with_decoys(self, states, rng)
            return delivered
        return send


def decoy_count(decoy_rate: float, n_items: int) -> int:
    """Decoys so that they make up ``decoy_rate`` of the sequence (at least one)"""
    return max(1, int(round(decoy_rate * n_items / (1.0 - decoy_rate))))


def prepare_decoy(dim: int, basis: MeasurementBasis, value: int) -> StateVector:
    """|value> or F|value> on a single qudit"""
    state = new_basis_state(SubsystemLayout((dim,)), [value])
    if basis is MeasurementBasis.FOURIER:
        state = apply_unitary(state, fourier_matrix(dim), [0])
    return state


def intercept_resend(state: StateVector, rng: np.random.Generator) -> StateVector:
    """Measure every qudit in a random basis and forward the collapsed state"""
    for target in range(len(state.dims)):
        basis = BASES[int(rng.integers(2))]
        _, state = measure(state, [target], basis, rng)
    return state


def transmit_with_decoys(
    channel: QuantumChannel,
    states: List[StateVector],
    rng: np.random.Generator,
) -> Tuple[List[StateVector], ChannelReport]:
    """Interleave secret decoys, let the adversary act, then check the decoys

    Raises ChannelCompromised when the decoy error rate exceeds the threshold.
    """
    states = list(states)
    dim = channel.dim or (states[0].dims[0] if states else 2)
    n_decoys = decoy_count(channel.decoy_rate, len(states))
    total = len(states) + n_decoys
    positions = set(int(p) for p in rng.choice(total, size=n_decoys, replace=False))

    sequence: List[StateVector] = []
    prepared: Dict[int, Tuple[MeasurementBasis, int]] = {}
    payload = iter(states)
    for slot in range(total):
        if slot in positions:
            basis = BASES[int(rng.integers(2))]
            value = int(rng.integers(dim))
            prepared[slot] = (basis, value)
            sequence.append(prepare_decoy(dim, basis, value))
        else:
            sequence.append(next(payload))

    if channel.intercepted:
        sequence = [intercept_resend(item, rng) for item in sequence]

    report = ChannelReport(
        sender=channel.sender,
        receiver=channel.receiver,
        threshold=channel.threshold,
        delivered=len(states),
    )
    for slot in sorted(prepared):
        basis, value = prepared[slot]
        outcome, _ = measure(sequence[slot], [0], basis, rng)
        report.decoys.append(DecoyCheck(
            position=slot,
            basis=basis.value,
            value=value,
            outcome=outcome[0],
            passed=outcome[0] == value,
        ))

    if report.error_rate > channel.threshold:
        logger.warning(
            f"Channel {channel.sender} -> {channel.receiver}: decoy error rate "
            f"{report.error_rate:.3f} above {channel.threshold:.3f}"
        )
        raise ChannelCompromised(report)

    logger.debug(
        f"Channel {channel.sender} -> {channel.receiver}: {len(states)} states, "
        f"{n_decoys} decoys, error rate {report.error_rate:.3f}"
    )
    delivered = [item for slot, item in enumerate(sequence) if slot not in prepared]
    return delivered, report
