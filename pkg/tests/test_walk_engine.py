import math

import numpy as np
import pytest

from src.exceptions import DimensionMismatch, InvalidDimension, InvalidIndex
from src.services.qudit_state import is_unitary, layout_of, new_basis_state
from src.services.walk_engine import (
    CoinParams,
    WalkConfig,
    coin_matrix,
    evolve,
    initial_state,
    inverse_evolve,
    sensitivity_report,
    shift_matrix,
    step_operator,
    walker_distribution,
)

HADAMARD = np.array([[1, 1], [1, -1]]) / math.sqrt(2)


def dense_walk_operator(M: int) -> np.ndarray:
    """S (I (x) H) built independently of the library"""
    shift = np.zeros((2 * M, 2 * M))
    for x in range(M):
        shift[((x + 1) % M) * 2 + 0, x * 2 + 0] = 1
        shift[((x - 1) % M) * 2 + 1, x * 2 + 1] = 1
    return shift @ np.kron(np.eye(M), HADAMARD)


def test_default_coin_is_hadamard():
    assert np.allclose(coin_matrix(CoinParams()), HADAMARD)


@pytest.mark.parametrize("params", [CoinParams(), CoinParams(0.3, 1.1, -0.7), CoinParams(math.pi, 0.0, 0.5)])
def test_coin_and_step_operator_are_unitary(params):
    assert is_unitary(coin_matrix(params))
    assert is_unitary(step_operator(WalkConfig(8, params)))


def test_shift_moves_coin_zero_right_and_coin_one_left():
    S = shift_matrix(4)
    state = np.zeros(8)
    state[3 * 2 + 0] = 1
    assert np.argmax(S @ state) == 0 * 2 + 0
    state = np.zeros(8)
    state[0 * 2 + 1] = 1
    assert np.argmax(S @ state) == 3 * 2 + 1


def test_config_rejects_non_power_of_two():
    with pytest.raises(InvalidDimension):
        WalkConfig(12)
    with pytest.raises(InvalidDimension):
        WalkConfig(1)


def test_zero_steps_is_identity():
    walk = WalkConfig(16)
    start = initial_state(walk, 6)
    assert evolve(start, walk, 0).allclose(start)
    assert walker_distribution(start)[6] == pytest.approx(1.0)


def test_negative_steps_rejected():
    walk = WalkConfig(16)
    with pytest.raises(InvalidIndex):
        evolve(initial_state(walk, 0), walk, -1)


def test_one_step_splits_evenly():
    walk = WalkConfig(16)
    distribution = walker_distribution(evolve(initial_state(walk, 6), walk, 1))
    assert distribution[5] == pytest.approx(0.5)
    assert distribution[7] == pytest.approx(0.5)


@pytest.mark.parametrize("start,steps", [(6, 5), (8, 4), (0, 17), (15, 32)])
def test_evolve_matches_dense_matrix_power(start, steps):
    walk = WalkConfig(16)
    state = initial_state(walk, start)
    oracle = np.linalg.matrix_power(dense_walk_operator(16), steps) @ state.amplitudes
    assert np.allclose(evolve(state, walk, steps).amplitudes, oracle, atol=1e-12)


def test_evolve_matches_library_step_operator_for_general_coin():
    walk = WalkConfig(8, CoinParams(0.4, 0.9, 1.3))
    state = initial_state(walk, 3, coin=1)
    oracle = np.linalg.matrix_power(step_operator(walk), 7) @ state.amplitudes
    assert np.allclose(evolve(state, walk, 7).amplitudes, oracle, atol=1e-12)


def test_inverse_evolve_recovers_start(rng):
    walk = WalkConfig(16, CoinParams(0.2, 0.6, 0.1))
    for _ in range(10):
        start = initial_state(walk, int(rng.integers(16)), coin=int(rng.integers(2)))
        steps = int(rng.integers(1, 40))
        assert start.fidelity(inverse_evolve(evolve(start, walk, steps), walk, steps)) >= 1 - 1e-9


def test_wrong_steps_do_not_recover_start():
    walk = WalkConfig(16)
    start = initial_state(walk, 4)
    evolved = evolve(start, walk, 9)
    assert start.fidelity(inverse_evolve(evolved, walk, 8)) < 0.5


def test_evolve_rejects_foreign_layout():
    walk = WalkConfig(16)
    with pytest.raises(DimensionMismatch):
        evolve(new_basis_state(layout_of(8, 2), [0, 0]), walk, 1)


def test_distribution_sums_to_one():
    walk = WalkConfig(32)
    distribution = walker_distribution(evolve(initial_state(walk, 10), walk, 25))
    assert distribution.sum() == pytest.approx(1.0, abs=1e-9)
    assert np.all(distribution >= 0)


def test_sensitivity_report_detects_small_changes():
    walk = WalkConfig(16)
    same = sensitivity_report(walk, {'start': 6, 'steps': 5}, {'start': 6, 'steps': 5})
    assert same['total_variation'] == pytest.approx(0.0, abs=1e-12)
    assert same['overlap'] == pytest.approx(1.0)

    shifted = sensitivity_report(walk, {'start': 6, 'steps': 5}, {'start': 8, 'steps': 4})
    assert shifted['total_variation'] > 0.3
