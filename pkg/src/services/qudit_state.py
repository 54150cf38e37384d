"""Dense qudit statevector simulation

Basis states, tensor-product layouts, unitary application on chosen
subsystems and seeded projective measurement in the computational and
Fourier bases. States are immutable; every operation returns a new value.
"""
import logging
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import List, Sequence, Tuple

import numpy as np

from src import config
from src.exceptions import (
    DegenerateState,
    DimensionMismatch,
    InvalidDimension,
    InvalidIndex,
    NotUnitary,
)

logger = logging.getLogger(__name__)


class MeasurementBasis(str, Enum):
    COMPUTATIONAL = 'computational'
    FOURIER = 'fourier'


@dataclass(frozen=True)
class SubsystemLayout:
    """Dimensions of the subsystems of a tensor-product space"""
    dims: Tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        object.__setattr__(self, 'dims', dims)
        if not dims:
            raise InvalidDimension("Layout needs at least one subsystem")
        if any(d < 2 for d in dims):
            raise InvalidDimension(f"Every subsystem dimension must be >= 2, got {list(dims)}")
        if self.size > config.MAX_AMPLITUDES:
            raise InvalidDimension(
                f"Layout {list(dims)} needs {self.size} amplitudes, cap is {config.MAX_AMPLITUDES}"
            )

    @property
    def size(self) -> int:
        return int(np.prod(self.dims, dtype=object))

    def check_targets(self, targets: Sequence[int]) -> Tuple[int, ...]:
        targets = tuple(int(t) for t in targets)
        if len(set(targets)) != len(targets):
            raise InvalidIndex(f"Duplicate target subsystems: {list(targets)}")
        for t in targets:
            if not 0 <= t < len(self.dims):
                raise InvalidIndex(f"Subsystem {t} out of range for layout {list(self.dims)}")
        return targets


@dataclass(frozen=True)
class StateVector:
    """Normalized amplitude array over a SubsystemLayout"""
    layout: SubsystemLayout
    amplitudes: np.ndarray

    def __post_init__(self):
        amplitudes = np.array(self.amplitudes, dtype=np.complex128).reshape(-1)
        if amplitudes.size != self.layout.size:
            raise DimensionMismatch(
                f"{amplitudes.size} amplitudes given for a layout of size {self.layout.size}"
            )
        norm = float(np.vdot(amplitudes, amplitudes).real)
        if abs(norm - 1.0) > config.AMPLITUDE_TOLERANCE:
            raise DegenerateState(f"State is not normalized (norm^2 = {norm:.12f})")
        amplitudes.flags.writeable = False
        object.__setattr__(self, 'amplitudes', amplitudes)

    @property
    def dims(self) -> Tuple[int, ...]:
        return self.layout.dims

    def tensor(self) -> np.ndarray:
        """Amplitudes reshaped to one axis per subsystem (read-only view)"""
        return self.amplitudes.reshape(self.layout.dims)

    def fidelity(self, other: 'StateVector') -> float:
        """|<self|other>|^2"""
        if self.layout != other.layout:
            raise DimensionMismatch(f"Layouts differ: {list(self.dims)} vs {list(other.dims)}")
        return float(abs(np.vdot(self.amplitudes, other.amplitudes)) ** 2)

    def allclose(self, other: 'StateVector', atol: float = config.AMPLITUDE_TOLERANCE) -> bool:
        return self.layout == other.layout and bool(
            np.allclose(self.amplitudes, other.amplitudes, rtol=0.0, atol=atol)
        )


def layout_of(*dims: int) -> SubsystemLayout:
    return SubsystemLayout(tuple(dims))


def new_basis_state(layout: SubsystemLayout, indices: Sequence[int]) -> StateVector:
    """Computational basis state |indices[0], indices[1], ...>"""
    if len(indices) != len(layout.dims):
        raise InvalidIndex(f"Expected {len(layout.dims)} indices, got {len(indices)}")
    for i, (index, dim) in enumerate(zip(indices, layout.dims)):
        if not 0 <= index < dim:
            raise InvalidIndex(f"Index {index} out of range [0, {dim}) for subsystem {i}")

    amplitudes = np.zeros(layout.size, dtype=np.complex128)
    amplitudes[np.ravel_multi_index(tuple(indices), layout.dims)] = 1.0
    return StateVector(layout, amplitudes)


def from_amplitudes(layout: SubsystemLayout, amplitudes: Sequence[complex], normalize: bool = False) -> StateVector:
    """Build a state from raw amplitudes, optionally renormalizing"""
    amplitudes = np.asarray(amplitudes, dtype=np.complex128).reshape(-1)
    if normalize:
        norm = np.linalg.norm(amplitudes)
        if norm < config.AMPLITUDE_TOLERANCE:
            raise DegenerateState("Cannot normalize a zero vector")
        amplitudes = amplitudes / norm
    return StateVector(layout, amplitudes)


def random_state(layout: SubsystemLayout, rng: np.random.Generator) -> StateVector:
    """Haar-random pure state (normalized complex Gaussian vector)"""
    raw = rng.normal(size=layout.size) + 1j * rng.normal(size=layout.size)
    return from_amplitudes(layout, raw, normalize=True)


def is_unitary(matrix: np.ndarray, tolerance: float = config.UNITARY_TOLERANCE) -> bool:
    matrix = np.asarray(matrix)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        return False
    deviation = matrix.conj().T @ matrix - np.eye(matrix.shape[0])
    return float(np.max(np.abs(deviation))) <= tolerance


def _apply_to_tensor(tensor: np.ndarray, matrix: np.ndarray, targets: Tuple[int, ...]) -> np.ndarray:
    """Contract ``matrix`` with the target axes of ``tensor``"""
    dims = tensor.shape
    moved = np.moveaxis(tensor, targets, tuple(range(len(targets))))
    target_size = int(np.prod([dims[t] for t in targets]))
    rest_shape = moved.shape[len(targets):]
    updated = matrix @ moved.reshape(target_size, -1)
    updated = updated.reshape(tuple(dims[t] for t in targets) + rest_shape)
    return np.moveaxis(updated, tuple(range(len(targets))), targets)


def apply_unitary(state: StateVector, matrix: np.ndarray, targets: Sequence[int]) -> StateVector:
    """Apply ``matrix`` to the ordered ``targets``, identity elsewhere"""
    targets = state.layout.check_targets(targets)
    matrix = np.asarray(matrix, dtype=np.complex128)
    expected = int(np.prod([state.dims[t] for t in targets]))
    if matrix.shape != (expected, expected):
        raise DimensionMismatch(
            f"Matrix of shape {matrix.shape} cannot act on subsystems {list(targets)} (dimension {expected})"
        )
    if not is_unitary(matrix):
        raise NotUnitary(f"Matrix acting on {list(targets)} is not unitary")

    updated = _apply_to_tensor(state.tensor(), matrix, targets)
    return StateVector(state.layout, updated.reshape(-1))


@lru_cache(maxsize=64)
def _fourier(d: int) -> np.ndarray:
    j, k = np.meshgrid(np.arange(d), np.arange(d), indexing='ij')
    matrix = np.exp(2j * np.pi * ((j * k) % d) / d) / np.sqrt(d)
    matrix.flags.writeable = False
    return matrix


def fourier_matrix(d: int) -> np.ndarray:
    """d-dimensional DFT matrix, entry (j, k) = w^(jk)/sqrt(d) with w = e^(2 pi i/d)"""
    if d < 2:
        raise InvalidDimension(f"Fourier matrix needs d >= 2, got {d}")
    return _fourier(int(d)).copy()


def _rotate_to_fourier(tensor: np.ndarray, targets: Tuple[int, ...]) -> np.ndarray:
    for t in targets:
        tensor = _apply_to_tensor(tensor, _fourier(tensor.shape[t]).conj().T, (t,))
    return tensor


def _rotate_from_fourier(tensor: np.ndarray, targets: Tuple[int, ...]) -> np.ndarray:
    for t in targets:
        tensor = _apply_to_tensor(tensor, _fourier(tensor.shape[t]), (t,))
    return tensor


def _marginal(tensor: np.ndarray, targets: Tuple[int, ...]) -> np.ndarray:
    probabilities = np.abs(tensor) ** 2
    others = tuple(i for i in range(tensor.ndim) if i not in targets)
    marginal = probabilities.sum(axis=others) if others else probabilities
    # sum() keeps the remaining axes in ascending order; reorder to match targets
    order = np.argsort(np.argsort(targets))
    return np.transpose(marginal, order) if len(targets) > 1 else marginal


def measure(
    state: StateVector,
    targets: Sequence[int],
    basis: MeasurementBasis,
    rng: np.random.Generator,
) -> Tuple[List[int], StateVector]:
    """Projective measurement of ``targets``; returns outcomes and the collapsed state

    A Fourier-basis measurement rotates each target by F^dagger, measures in
    the computational basis and rotates back, so the collapsed state is the
    corresponding Fourier eigenstate.
    """
    targets = state.layout.check_targets(targets)
    basis = MeasurementBasis(basis)
    tensor = np.array(state.tensor())
    if basis is MeasurementBasis.FOURIER:
        tensor = _rotate_to_fourier(tensor, targets)

    marginal = _marginal(tensor, targets).reshape(-1)
    total = float(marginal.sum())
    if total < config.AMPLITUDE_TOLERANCE:
        raise DegenerateState("Cannot measure a zero-norm state")

    cumulative = np.cumsum(marginal / total)
    flat = int(np.searchsorted(cumulative, rng.random(), side='right'))
    flat = min(flat, marginal.size - 1)
    outcomes = [int(o) for o in np.unravel_index(flat, tuple(state.dims[t] for t in targets))]

    # Project onto the observed outcome
    index = [slice(None)] * tensor.ndim
    mask = np.zeros(tensor.shape, dtype=bool)
    for t, o in zip(targets, outcomes):
        index[t] = o
    mask[tuple(index)] = True
    collapsed = np.where(mask, tensor, 0.0)
    collapsed = collapsed / np.linalg.norm(collapsed)

    if basis is MeasurementBasis.FOURIER:
        collapsed = _rotate_from_fourier(collapsed, targets)

    logger.debug(f"Measured subsystems {list(targets)} in {basis.value} basis: {outcomes}")
    return outcomes, StateVector(state.layout, collapsed.reshape(-1))


def position_distribution(state: StateVector, targets: Sequence[int]) -> np.ndarray:
    """Marginal probabilities of ``targets`` flattened row-major"""
    targets = state.layout.check_targets(targets)
    return _marginal(state.tensor(), targets).reshape(-1)


def sample_outcomes(
    state: StateVector,
    basis: MeasurementBasis,
    rng: np.random.Generator,
) -> List[int]:
    """Measure every subsystem of ``state`` jointly"""
    outcomes, _ = measure(state, range(len(state.dims)), basis, rng)
    return outcomes
