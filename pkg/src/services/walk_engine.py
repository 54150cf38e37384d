"""Two-direction discrete-time quantum walk on a cycle"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from src.exceptions import DimensionMismatch, InvalidDimension, InvalidIndex
from src.services.qudit_state import (
    StateVector,
    SubsystemLayout,
    new_basis_state,
    position_distribution,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CoinParams:
    """Angles of the general 2x2 coin; the defaults give the Hadamard gate"""
    xi: float = 0.0
    theta: float = math.pi / 4
    eta: float = 0.0


@dataclass(frozen=True)
class WalkConfig:
    position_dim: int
    coin: CoinParams = field(default_factory=CoinParams)

    def __post_init__(self):
        if self.position_dim < 2:
            raise InvalidDimension(f"Cycle needs at least 2 positions, got {self.position_dim}")
        if self.position_dim & (self.position_dim - 1):
            raise InvalidDimension(f"Cycle size must be a power of two, got {self.position_dim}")

    @property
    def layout(self) -> SubsystemLayout:
        return SubsystemLayout((self.position_dim, 2))

    @property
    def bits(self) -> int:
        return self.position_dim.bit_length() - 1


def coin_matrix(params: CoinParams) -> np.ndarray:
    xi, theta, eta = params.xi, params.theta, params.eta
    return np.array([
        [np.exp(1j * xi) * np.cos(theta), np.exp(1j * eta) * np.sin(theta)],
        [np.exp(-1j * eta) * np.sin(theta), -np.exp(-1j * xi) * np.cos(theta)],
    ], dtype=np.complex128)


def shift_matrix(M: int) -> np.ndarray:
    """Controlled shift on walker (x) coin, flat index x*2 + c"""
    if M < 2:
        raise InvalidDimension(f"Shift needs M >= 2, got {M}")
    matrix = np.zeros((2 * M, 2 * M), dtype=np.complex128)
    for x in range(M):
        matrix[((x + 1) % M) * 2, x * 2] = 1.0
        matrix[((x - 1) % M) * 2 + 1, x * 2 + 1] = 1.0
    return matrix


def step_operator(config: WalkConfig) -> np.ndarray:
    """Dense U = S (I (x) C), coin first then shift"""
    coin_layer = np.kron(np.eye(config.position_dim), coin_matrix(config.coin))
    return shift_matrix(config.position_dim) @ coin_layer


def initial_state(config: WalkConfig, position: int, coin: int = 0) -> StateVector:
    """|position>|coin> on the walk layout"""
    return new_basis_state(config.layout, [position, coin])


def _walk_array(state: StateVector, config: WalkConfig) -> np.ndarray:
    if state.dims != (config.position_dim, 2):
        raise DimensionMismatch(
            f"Walk over {config.position_dim} positions needs layout [{config.position_dim}, 2], "
            f"got {list(state.dims)}"
        )
    return np.array(state.tensor())


def evolve(state: StateVector, config: WalkConfig, t: int) -> StateVector:
    """Apply U^t by t rounds of local coin and shift updates"""
    if t < 0:
        raise InvalidIndex(f"Step count must be non-negative, got {t}")
    psi = _walk_array(state, config)
    if t == 0:
        return state

    coin = coin_matrix(config.coin)
    for _ in range(t):
        psi = psi @ coin.T
        psi[:, 0] = np.roll(psi[:, 0], 1)
        psi[:, 1] = np.roll(psi[:, 1], -1)

    logger.debug(f"Evolved walk over {config.position_dim} positions by {t} steps")
    return StateVector(state.layout, psi.reshape(-1))


def inverse_evolve(state: StateVector, config: WalkConfig, t: int) -> StateVector:
    """Apply (U^dagger)^t = ((I (x) C^dagger) S^dagger)^t"""
    if t < 0:
        raise InvalidIndex(f"Step count must be non-negative, got {t}")
    psi = _walk_array(state, config)
    if t == 0:
        return state

    coin_dagger = coin_matrix(config.coin).conj().T
    for _ in range(t):
        psi[:, 0] = np.roll(psi[:, 0], -1)
        psi[:, 1] = np.roll(psi[:, 1], 1)
        psi = psi @ coin_dagger.T

    logger.debug(f"Inverse-evolved walk over {config.position_dim} positions by {t} steps")
    return StateVector(state.layout, psi.reshape(-1))


def walker_distribution(state: StateVector) -> np.ndarray:
    """Position marginal of a walker (x) coin state"""
    return position_distribution(state, [0])


def sensitivity_report(
    config: WalkConfig,
    reference: Dict[str, int],
    perturbed: Dict[str, int],
    coin: Optional[int] = 0,
) -> Dict[str, float]:
    """Total-variation distance between the final distributions of two runs

    ``reference`` and ``perturbed`` each hold ``start`` and ``steps``.
    """
    final = []
    for run in (reference, perturbed):
        state = evolve(initial_state(config, run['start'], coin), config, run['steps'])
        final.append(walker_distribution(state))

    distance = 0.5 * float(np.abs(final[0] - final[1]).sum())
    logger.info(
        f"Sensitivity {reference} vs {perturbed} on M={config.position_dim}: TV distance {distance:.6f}"
    )
    return {
        'total_variation': distance,
        'overlap': float(np.minimum(final[0], final[1]).sum()),
    }
