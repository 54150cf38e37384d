"""Error types raised across the simulator"""
from typing import Any, Optional


class QuantumChainError(Exception):
    """Base class for all simulator errors"""


# Statevector simulation
class InvalidIndex(QuantumChainError):
    pass


class InvalidDimension(QuantumChainError):
    pass


class NotUnitary(QuantumChainError):
    pass


class DimensionMismatch(QuantumChainError):
    pass


class DegenerateState(QuantumChainError):
    pass


# Hashing and blocks
class EmptyMessage(QuantumChainError):
    pass


class EmptyBlock(QuantumChainError):
    pass


class Malformed(QuantumChainError):
    pass


class StoreError(QuantumChainError):
    pass


# Voting
class InvalidSpec(QuantumChainError):
    pass


class InvalidWeight(QuantumChainError):
    pass


class InvalidVote(QuantumChainError):
    pass


class OverWeight(InvalidVote):
    """A voter tried to cast more votes than its quantized weight"""


class IncompleteBallot(QuantumChainError):
    pass


class InvalidCount(QuantumChainError):
    pass


class ProtocolAbort(QuantumChainError):
    """Protocol stopped; ``reason`` names the failing check"""

    def __init__(self, reason: str, detail: Optional[str] = None):
        self.reason = reason
        self.detail = detail
        super().__init__(f"{reason}: {detail}" if detail else reason)


# Network
class ChannelCompromised(ProtocolAbort):
    """Decoy error rate exceeded the channel threshold"""

    def __init__(self, report: Any):
        self.report = report
        super().__init__(
            'ChannelCompromised',
            f"decoy error rate {report.error_rate:.3f} above threshold {report.threshold:.3f}"
        )


class RoundFailed(QuantumChainError):
    def __init__(self, message: str, report: Any = None):
        self.report = report
        super().__init__(message)


class SyncMismatch(QuantumChainError):
    def __init__(self, report: Any):
        self.report = report
        super().__init__(f"Nodes diverged from the canonical block: {', '.join(report.divergent)}")


class KeyExhausted(QuantumChainError):
    pass


class ConfigError(QuantumChainError):
    pass
