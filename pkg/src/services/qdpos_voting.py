"""Weighted quantum voting for representative election

Weights are quantized to integer vote budgets. Each candidate hands every
voter a secret row index taken from a shared Cat state with distinct
offsets, then builds a ballot box whose rows are Fourier outcomes of
all-zero-offset Cat states (each row sums to 0 mod d). A voter adds their
vote to the entry of their own column sitting at their secret row; row
sums then reveal each vote without linking it to a voter.
"""
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Set, Tuple

import numpy as np

from src.exceptions import (
    IncompleteBallot,
    InvalidCount,
    InvalidSpec,
    InvalidVote,
    InvalidWeight,
    OverWeight,
    ProtocolAbort,
)
from src.services.qudit_state import (
    MeasurementBasis,
    StateVector,
    SubsystemLayout,
    measure,
)

logger = logging.getLogger(__name__)

MISSING = -1

Transmit = Callable[[List[StateVector]], List[StateVector]]


@dataclass(frozen=True)
class CatStateSpec:
    particles: int
    dim: int
    offsets: Tuple[int, ...]

    def __post_init__(self):
        offsets = tuple(int(o) for o in self.offsets)
        object.__setattr__(self, 'offsets', offsets)
        if self.particles < 2:
            raise InvalidSpec(f"Cat state needs at least 2 particles, got {self.particles}")
        if self.dim < 2:
            raise InvalidSpec(f"Cat state needs dim >= 2, got {self.dim}")
        if len(offsets) != self.particles:
            raise InvalidSpec(f"Expected {self.particles} offsets, got {len(offsets)}")
        if offsets[0] != 0:
            raise InvalidSpec(f"First offset must be 0, got {offsets[0]}")
        if any(not 0 <= o < self.dim for o in offsets):
            raise InvalidSpec(f"Offsets {list(offsets)} must lie in [0, {self.dim})")
        if not self.is_ballot_phase and not self.is_index_phase:
            raise InvalidSpec(
                f"Offsets {list(offsets)} with dim {self.dim} are neither all zero "
                f"nor mutually distinct with dim == particles"
            )

    @property
    def is_ballot_phase(self) -> bool:
        return all(o == 0 for o in self.offsets)

    @property
    def is_index_phase(self) -> bool:
        return self.dim == self.particles and len(set(self.offsets)) == self.particles

    @property
    def layout(self) -> SubsystemLayout:
        return SubsystemLayout((self.dim,) * self.particles)


@dataclass(frozen=True)
class VoterProfile:
    id: str
    weight: float
    quantized_weight: int


@dataclass(frozen=True)
class PrivacyIndexSet:
    candidate: str
    indices: Tuple[int, ...]
    checked_groups: Tuple[int, ...] = ()
    used_group: Optional[int] = None

    @property
    def is_permutation(self) -> bool:
        return sorted(self.indices) == list(range(len(self.indices)))


@dataclass
class BallotMatrix:
    """Rows g, columns l (voter l's column)"""
    candidate: str
    entries: np.ndarray
    dim: int

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def column(self, voter: int) -> List[int]:
        return [int(v) for v in self.entries[:, voter]]

    def with_column(self, voter: int, column: Sequence[int]) -> 'BallotMatrix':
        entries = self.entries.copy()
        entries[:, voter] = column
        return BallotMatrix(self.candidate, entries, self.dim)

    def row_sums(self) -> List[int]:
        return [int(s) % self.dim for s in self.entries.sum(axis=1)]


@dataclass
class TallySheet:
    candidate: str
    row_results: List[int]
    dim: int

    @property
    def total(self) -> int:
        return sum(self.row_results)

    def to_dict(self) -> Dict[str, object]:
        return {'candidate': self.candidate, 'row_results': list(self.row_results), 'total': self.total}


@dataclass
class VerificationRecord:
    """Outcome of the spot checks on one batch of prepared groups"""
    checked_groups: List[int] = field(default_factory=list)
    failed_groups: List[int] = field(default_factory=list)

    @property
    def failure_rate(self) -> float:
        return len(self.failed_groups) / len(self.checked_groups) if self.checked_groups else 0.0


def prepare_cat_state(spec: CatStateSpec) -> StateVector:
    """(1/sqrt(d)) sum_l |l, l+o_2, ..., l+o_n> (additions mod d)"""
    amplitudes = np.zeros(spec.layout.size, dtype=np.complex128)
    dims = spec.layout.dims
    for l in range(spec.dim):
        index = tuple((l + o) % spec.dim for o in spec.offsets)
        amplitudes[np.ravel_multi_index(index, dims)] = 1.0 / math.sqrt(spec.dim)
    return StateVector(spec.layout, amplitudes)


def quantize_weights(weights: Sequence[float], total_votes: int) -> List[int]:
    """floor(w_l / W * T_v), computed exactly from the decimal weights"""
    if total_votes < 1:
        raise InvalidWeight(f"Total votes must be >= 1, got {total_votes}")
    exact = []
    for w in weights:
        value = Fraction(str(w))
        if value <= 0:
            raise InvalidWeight(f"Weights must be positive, got {w}")
        exact.append(value)
    total = sum(exact)
    return [math.floor(w / total * total_votes) for w in exact]


def voter_profiles(ids: Sequence[str], weights: Sequence[float], total_votes: int) -> List[VoterProfile]:
    if len(ids) != len(weights):
        raise InvalidWeight(f"{len(ids)} voters but {len(weights)} weights")
    quantized = quantize_weights(weights, total_votes)
    return [VoterProfile(id=i, weight=float(w), quantized_weight=q) for i, w, q in zip(ids, weights, quantized)]


def ballot_dimension(total_votes: int) -> int:
    """Smallest power of two >= T_v + 1"""
    d = 2
    while d < total_votes + 1:
        d *= 2
    return d


def offset_tuples(n: int, count: int, rng: np.random.Generator) -> List[Tuple[int, ...]]:
    """``count`` offset tuples (0, permutation of 1..n-1), distinct when possible"""
    if n < 2:
        raise InvalidSpec(f"Need at least 2 particles, got {n}")
    available = math.factorial(n - 1)
    if available < count:
        logger.warning(
            f"Only {available} distinct offset tuples exist for n={n}; sampling {count} with replacement"
        )
        return [(0,) + tuple(int(v) for v in rng.permutation(np.arange(1, n))) for _ in range(count)]

    chosen: List[Tuple[int, ...]] = []
    seen: Set[Tuple[int, ...]] = set()
    while len(chosen) < count:
        candidate = (0,) + tuple(int(v) for v in rng.permutation(np.arange(1, n)))
        if candidate not in seen:
            seen.add(candidate)
            chosen.append(candidate)
    return chosen


def _corrupted_offsets(offsets: Tuple[int, ...]) -> Tuple[int, ...]:
    if len(offsets) < 3:
        raise InvalidSpec("A two-particle index group has no alternative offsets")
    rest = offsets[1:]
    return (0,) + rest[1:] + rest[:1]


def _check_index_group(
    copy_a: StateVector,
    copy_b: StateVector,
    disclosed: Tuple[int, ...],
    n: int,
    rng: np.random.Generator,
) -> bool:
    targets = range(n)
    outcomes, _ = measure(copy_a, targets, MeasurementBasis.COMPUTATIONAL, rng)
    distinct = len(set(outcomes)) == n
    matches = all((outcomes[j] - outcomes[0]) % n == disclosed[j] for j in range(n))
    fourier, _ = measure(copy_b, targets, MeasurementBasis.FOURIER, rng)
    return distinct and matches and sum(fourier) % n == 0


def _choose_checked(total: int, delta: int, rng: np.random.Generator) -> List[int]:
    return sorted(int(g) for g in rng.choice(total, size=delta, replace=False))


def _abort_if_failed(record: VerificationRecord, abort_threshold: float, stage: str) -> None:
    if record.failure_rate > abort_threshold:
        logger.warning(
            f"{stage}: {len(record.failed_groups)} of {len(record.checked_groups)} checked groups failed"
        )
        raise ProtocolAbort(
            'VerificationFailed',
            f"{stage}: groups {record.failed_groups} failed verification",
        )


def distribute_indices(
    candidate: str,
    n: int,
    delta: int,
    rng: np.random.Generator,
    transmit: Optional[Transmit] = None,
    corrupt_groups: Optional[Set[int]] = None,
    abort_threshold: float = 0.0,
) -> PrivacyIndexSet:
    """Hand each of ``n`` voters a secret, unique row index

    The candidate prepares 1+delta groups, each two copies of a Cat state
    with its own disclosed offsets. Voters spot-check delta random groups
    (distinct computational outcomes matching the disclosed offsets on one
    copy, Fourier outcomes summing to 0 mod n on the other) and measure the
    remaining group computationally; outcome l is voter l's index.
    ``corrupt_groups`` makes the candidate prepare those groups with
    offsets other than the disclosed ones.
    """
    if n < 2 or delta < 1:
        raise InvalidSpec(f"distribute_indices needs n >= 2 and delta >= 1, got n={n}, delta={delta}")
    corrupt_groups = corrupt_groups or set()
    groups = 1 + delta

    disclosed = offset_tuples(n, groups, rng)
    states: List[StateVector] = []
    for g, offsets in enumerate(disclosed):
        actual = _corrupted_offsets(offsets) if g in corrupt_groups else offsets
        state = prepare_cat_state(CatStateSpec(n, n, actual))
        states.extend([state, state])

    if transmit is not None:
        states = transmit(states)

    checked = _choose_checked(groups, delta, rng)
    record = VerificationRecord(checked_groups=checked)
    for g in checked:
        if not _check_index_group(states[2 * g], states[2 * g + 1], disclosed[g], n, rng):
            record.failed_groups.append(g)
    _abort_if_failed(record, abort_threshold, f"Index distribution for {candidate}")

    used = next(g for g in range(groups) if g not in checked)
    copy = int(rng.integers(2))
    outcomes, _ = measure(states[2 * used + copy], range(n), MeasurementBasis.COMPUTATIONAL, rng)

    logger.info(f"Distributed privacy indices for candidate {candidate} (checked groups {checked})")
    return PrivacyIndexSet(
        candidate=candidate,
        indices=tuple(outcomes),
        checked_groups=tuple(checked),
        used_group=used,
    )


def _check_ballot_group(state: StateVector, n: int, d: int, rng: np.random.Generator) -> bool:
    if rng.random() < 0.5:
        outcomes, _ = measure(state, range(n), MeasurementBasis.COMPUTATIONAL, rng)
        return len(set(outcomes)) == 1
    outcomes, _ = measure(state, range(n), MeasurementBasis.FOURIER, rng)
    return sum(outcomes) % d == 0


def build_ballot_box(
    candidate: str,
    n: int,
    d: int,
    delta: int,
    rng: np.random.Generator,
    transmit: Optional[Transmit] = None,
    abort_threshold: float = 0.0,
) -> BallotMatrix:
    """Fill an n x n ballot matrix from n+delta all-zero-offset Cat states

    Checked groups are measured in a random basis: computational outcomes
    must all agree, Fourier outcomes must sum to 0 mod d. Every remaining
    group is Fourier-measured into one row.
    """
    if delta < 0:
        raise InvalidSpec(f"delta must be >= 0, got {delta}")
    spec = CatStateSpec(n, d, (0,) * n)
    template = prepare_cat_state(spec)
    states = [template] * (n + delta)
    if transmit is not None:
        states = transmit(states)

    checked = _choose_checked(n + delta, delta, rng) if delta else []
    record = VerificationRecord(checked_groups=checked)
    for g in checked:
        if not _check_ballot_group(states[g], n, d, rng):
            record.failed_groups.append(g)
    _abort_if_failed(record, abort_threshold, f"Ballot box for {candidate}")

    rows = []
    for g in range(n + delta):
        if g in checked:
            continue
        outcomes, _ = measure(states[g], range(n), MeasurementBasis.FOURIER, rng)
        rows.append(outcomes)

    matrix = BallotMatrix(candidate, np.array(rows, dtype=np.int64), d)
    logger.info(f"Built {n}x{n} ballot box for candidate {candidate} with d={d}")
    return matrix


def cast_vote(
    column: Sequence[int],
    index: int,
    vote: int,
    d: int,
    quantized_weight: int,
) -> List[int]:
    """Add ``vote`` mod d at the voter's secret row; other rows untouched"""
    if vote < 0:
        raise InvalidVote(f"Votes must be non-negative, got {vote}")
    if vote > quantized_weight:
        raise OverWeight(f"Vote {vote} exceeds quantized weight {quantized_weight}")
    if not 0 <= index < len(column):
        raise InvalidVote(f"Index {index} outside a column of {len(column)} rows")
    updated = [int(v) for v in column]
    updated[index] = (updated[index] + vote) % d
    return updated


def assemble_ballot(candidate: str, columns: Mapping[int, Sequence[int]], n: int, d: int) -> BallotMatrix:
    """Collect published columns; unpublished columns are marked missing"""
    entries = np.full((n, n), MISSING, dtype=np.int64)
    for voter, column in columns.items():
        entries[:, voter] = column
    return BallotMatrix(candidate, entries, d)


def tally(matrix: BallotMatrix, d: Optional[int] = None) -> TallySheet:
    """result_g = (sum_l r'_{g,l}) mod d"""
    d = d or matrix.dim
    missing = sorted({int(l) for l in np.argwhere(matrix.entries == MISSING)[:, 1]})
    if missing:
        raise IncompleteBallot(f"Ballot for {matrix.candidate} is missing columns {missing}")
    results = [int(s) % d for s in matrix.entries.sum(axis=1)]
    logger.debug(f"Tally for {matrix.candidate}: rows {results}")
    return TallySheet(matrix.candidate, results, d)


def verify_inclusion(
    voter: VoterProfile,
    indices: Mapping[str, int],
    tallies: Mapping[str, TallySheet],
    cast_total: Optional[int] = None,
) -> bool:
    """sum_k result^k at the voter's row equals their weight (or what they cast)"""
    expected = voter.quantized_weight if cast_total is None else cast_total
    observed = sum(tallies[k].row_results[indices[k]] for k in indices)
    if observed != expected:
        logger.warning(f"Inclusion check failed for voter {voter.id}: found {observed}, expected {expected}")
        return False
    return True


def select_representatives(
    tallies: Sequence[TallySheet],
    r: int,
    rng: Optional[np.random.Generator] = None,
) -> List[str]:
    """Top ``r`` by total, ties to the lower candidate id; shuffled when ``rng`` is given"""
    if not 1 <= r <= len(tallies):
        raise InvalidCount(f"Cannot select {r} representatives from {len(tallies)} candidates")
    ranked = sorted(tallies, key=lambda sheet: (-sheet.total, sheet.candidate))
    elected = [sheet.candidate for sheet in ranked[:r]]
    if rng is not None:
        elected = [elected[i] for i in rng.permutation(len(elected))]
    return elected


def run_ballot(
    candidate: str,
    voters: Sequence[VoterProfile],
    votes: Sequence[int],
    indices: PrivacyIndexSet,
    d: int,
    delta: int,
    rng: np.random.Generator,
    matrix: Optional[BallotMatrix] = None,
    transmit: Optional[Transmit] = None,
) -> Tuple[BallotMatrix, TallySheet]:
    """Build (or take) a ballot box, cast every voter's vote and tally it"""
    if matrix is None:
        matrix = build_ballot_box(candidate, len(voters), d, delta, rng, transmit=transmit)
    for l, (voter, vote) in enumerate(zip(voters, votes)):
        column = cast_vote(matrix.column(l), indices.indices[l], vote, d, voter.quantized_weight)
        matrix = matrix.with_column(l, column)
    return matrix, tally(matrix, d)


def secure_sum(
    label: str,
    votes: Sequence[int],
    d: int,
    delta: int,
    rng: np.random.Generator,
    transmit: Optional[Transmit] = None,
) -> int:
    """Anonymous sum of unit-weight votes through the ballot machinery"""
    n = len(votes)
    if n < 2:
        return int(sum(votes))
    voters = [VoterProfile(id=f"{label}-{l}", weight=1.0, quantized_weight=1) for l in range(n)]
    indices = distribute_indices(label, n, delta, rng, transmit=transmit)
    _, sheet = run_ballot(label, voters, votes, indices, d, delta, rng, transmit=transmit)
    return sheet.total
